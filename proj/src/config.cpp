#include "mst/config.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "mst/errors.hpp"

namespace mst {

namespace {

const std::vector<std::string> kKeys = {
    "model.dim", "model.heads", "model.ff", "model.enc_layers", "model.dec_layers",
    "model.sources", "model.strategy", "model.max_len", "model.dropout", "model.seed",
    "model.feature_dim", "model.shared_embeddings",
    "task.kind", "task.vocab", "task.min_len", "task.max_len", "task.sources", "task.examples",
    "task.seed", "task.variant", "task.source_noise", "task.classes", "task.feature_dim",
    "task.feature_noise",
    "train.steps", "train.batch", "train.warmup", "train.factor", "train.eval_interval",
    "train.seed", "train.dropout",
    "decode.width", "decode.alpha", "decode.max_len", "decode.threads",
    "viz.layer", "viz.head", "viz.encoder", "viz.format", "viz.example",
    "eval.corrupt_source", "eval.seed",
    "data.file", "data.out", "io.model", "io.out",
};

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

AppConfig::AppConfig() = default;

const std::vector<std::string>& AppConfig::valid_keys() { return kKeys; }

void AppConfig::put(const std::string& key, const std::string& value) {
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
        std::string msg = "unknown config key '" + key + "'. Valid keys:";
        for (const std::string& k : kKeys) msg += "\n  " + k;
        throw UsageError(msg);
    }
    values_[key] = value;
}

void AppConfig::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open config file '" + path + "'");
    std::string line;
    while (std::getline(f, line)) {
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line without '=': " + line);
        put(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void AppConfig::set(const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw UsageError("--set expects key=value, got '" + assignment + "'");
    put(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool AppConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string AppConfig::get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::size_t AppConfig::get_size(const std::string& key, std::size_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stoul(it->second);
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "' expects an integer, got '" + it->second + "'");
    }
}

double AppConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "' expects a number, got '" + it->second + "'");
    }
}

std::uint64_t AppConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "' expects an integer, got '" + it->second + "'");
    }
}

bool AppConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "1" || it->second == "true") return true;
    if (it->second == "0" || it->second == "false") return false;
    throw UsageError("config key '" + key + "' expects true/false, got '" + it->second + "'");
}

std::vector<double> AppConfig::get_doubles(const std::string& key) const {
    auto it = values_.find(key);
    std::vector<double> out;
    if (it == values_.end()) return out;
    std::size_t pos = 0;
    const std::string& s = it->second;
    while (pos <= s.size()) {
        std::size_t nxt = s.find(',', pos);
        std::string field = s.substr(pos, nxt == std::string::npos ? nxt : nxt - pos);
        if (!trim(field).empty()) {
            try {
                out.push_back(std::stod(trim(field)));
            } catch (const std::exception&) {
                throw UsageError("config key '" + key + "' expects comma-separated numbers");
            }
        }
        if (nxt == std::string::npos) break;
        pos = nxt + 1;
    }
    return out;
}

std::vector<std::string> AppConfig::resolved_lines() const {
    std::vector<std::string> lines;
    for (const auto& [k, v] : values_) lines.push_back(k + "=" + v);
    return lines;
}

} // namespace mst

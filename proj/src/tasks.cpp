#include "mst/tasks.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mst/errors.hpp"
#include "mst/prng.hpp"

namespace mst {

const char* kBlankToken = "_";
const char* kAmbToken = "AMB";

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "complementary_copy") return TaskKind::ComplementaryCopy;
    if (s == "feature_disambiguation") return TaskKind::FeatureDisambiguation;
    throw ConfigError("unknown task kind '" + s +
                      "' (expected complementary_copy|feature_disambiguation)");
}

std::string task_kind_to_string(TaskKind k) {
    return k == TaskKind::ComplementaryCopy ? "complementary_copy" : "feature_disambiguation";
}

void TaskSpec::validate() const {
    if (examples == 0) throw ConfigError("task: examples must be >= 1");
    if (min_len == 0 || max_len < min_len) throw ConfigError("task: bad length range");
    if (kind == TaskKind::ComplementaryCopy) {
        if (n_sources != 2) throw ConfigError("complementary_copy: n_sources must be 2");
        if (vocab < 8) throw ConfigError("complementary_copy: vocab must be >= 8");
        if (!source_noise.empty() && source_noise.size() != n_sources)
            throw ConfigError("complementary_copy: source_noise needs one entry per source");
        for (double p : source_noise)
            if (p < 0.0 || p >= 1.0) throw ConfigError("complementary_copy: noise must be in [0,1)");
    } else {
        if (n_sources != 2) throw ConfigError("feature_disambiguation: n_sources must be 2");
        if (classes < 2) throw ConfigError("feature_disambiguation: classes must be >= 2");
        if (feature_dim < classes)
            throw ConfigError("feature_disambiguation: feature_dim must be >= classes");
        if (vocab < 4 + 1 + classes + 1)
            throw ConfigError("feature_disambiguation: vocab too small for reserved + AMB + "
                              "class tokens + content");
        if (feature_noise < 0.0) throw ConfigError("feature_disambiguation: negative noise");
    }
}

Vocabulary task_vocabulary(const TaskSpec& spec) {
    std::vector<std::string> content;
    if (spec.kind == TaskKind::ComplementaryCopy) {
        content.push_back(kBlankToken); // id 4
        for (std::size_t i = 5; i < spec.vocab; ++i) content.push_back("t" + std::to_string(i));
    } else {
        content.push_back(kAmbToken); // id 4
        for (std::size_t c = 0; c < spec.classes; ++c) content.push_back("C" + std::to_string(c));
        for (std::size_t i = 5 + spec.classes; i < spec.vocab; ++i)
            content.push_back("t" + std::to_string(i));
    }
    return Vocabulary::with_reserved(std::move(content));
}

namespace {

// Content ids for complementary_copy: everything after the blank token.
constexpr int kCopyContentFirst = 5;

int random_content(Prng& rng, int first, int vocab) {
    return first + static_cast<int>(rng.below(static_cast<std::size_t>(vocab - first)));
}

} // namespace

Dataset gen_complementary_copy(const TaskSpec& spec) {
    if (spec.kind != TaskKind::ComplementaryCopy)
        throw ConfigError("gen_complementary_copy: wrong task kind");
    spec.validate();
    Dataset data{spec, task_vocabulary(spec), {}};
    Prng rng(spec.seed);
    const int vocab = static_cast<int>(spec.vocab);
    const int blank = 4;

    for (std::size_t e = 0; e < spec.examples; ++e) {
        const std::size_t len =
            spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
        ParallelExample ex;
        ex.target.reserve(len);
        for (std::size_t i = 0; i < len; ++i)
            ex.target.push_back(random_content(rng, kCopyContentFirst, vocab));

        std::vector<int> a = ex.target;
        std::vector<int> b = ex.target;
        if (spec.variant == CopyVariant::Complementary) {
            for (std::size_t i = 0; i < len; ++i)
                (i % 2 == 0 ? b : a)[i] = blank;
        }
        ex.sources = {std::move(a), std::move(b)};

        for (std::size_t s = 0; s < spec.source_noise.size(); ++s) {
            const double p = spec.source_noise[s];
            if (p <= 0.0) continue;
            for (int& tok : ex.sources[s])
                if (rng.next_double() < p) tok = random_content(rng, kCopyContentFirst, vocab);
        }
        data.examples.push_back(std::move(ex));
    }
    return data;
}

Dataset gen_feature_disambiguation(const TaskSpec& spec) {
    if (spec.kind != TaskKind::FeatureDisambiguation)
        throw ConfigError("gen_feature_disambiguation: wrong task kind");
    spec.validate();
    Dataset data{spec, task_vocabulary(spec), {}};
    Prng rng(spec.seed);
    const int vocab = static_cast<int>(spec.vocab);
    const int amb = 4;
    const int class_first = 5;
    const int content_first = 5 + static_cast<int>(spec.classes);

    for (std::size_t e = 0; e < spec.examples; ++e) {
        const std::size_t len =
            spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
        const std::size_t amb_pos = rng.below(len);
        const int cls = static_cast<int>(rng.below(spec.classes));

        ParallelExample ex;
        std::vector<int> text(len);
        for (std::size_t i = 0; i < len; ++i) text[i] = random_content(rng, content_first, vocab);
        ex.target = text;
        text[amb_pos] = amb;
        ex.target[amb_pos] = class_first + cls;
        ex.sources = {std::move(text)};

        Tensor f = Tensor::zeros(1, spec.feature_dim);
        f.at(0, static_cast<std::size_t>(cls)) = 1.0;
        if (spec.feature_noise > 0.0)
            for (std::size_t i = 0; i < spec.feature_dim; ++i)
                f.at(0, i) += rng.normal(0.0, spec.feature_noise);
        ex.features = std::move(f);
        data.examples.push_back(std::move(ex));
    }
    return data;
}

Dataset generate_dataset(const TaskSpec& spec) {
    return spec.kind == TaskKind::ComplementaryCopy ? gen_complementary_copy(spec)
                                                    : gen_feature_disambiguation(spec);
}

void write_dataset(const Dataset& data, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (const ParallelExample& ex : data.examples) {
        std::string line;
        for (const auto& src : ex.sources) {
            for (std::size_t i = 0; i < src.size(); ++i) {
                if (i) line += ' ';
                line += data.vocab.token(src[i]);
            }
            line += '\t';
        }
        for (std::size_t i = 0; i < ex.target.size(); ++i) {
            if (i) line += ' ';
            line += data.vocab.token(ex.target[i]);
        }
        f << line << '\n';
    }
    if (!f) throw std::runtime_error("write failed for '" + path + "'");

    if (data.has_features()) {
        std::ofstream sf(path + ".feat", std::ios::trunc);
        if (!sf) throw std::runtime_error("cannot open '" + path + ".feat' for writing");
        char buf[64];
        for (const ParallelExample& ex : data.examples) {
            const Tensor& t = *ex.features;
            std::string line;
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (i) line += ' ';
                std::snprintf(buf, sizeof buf, "%.17g", t.at(i));
                line += buf;
            }
            sf << line << '\n';
        }
        if (!sf) throw std::runtime_error("write failed for '" + path + ".feat'");
    }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t nxt = s.find(sep, pos);
        if (nxt == std::string::npos) {
            out.push_back(s.substr(pos));
            break;
        }
        out.push_back(s.substr(pos, nxt - pos));
        pos = nxt + 1;
    }
    return out;
}

std::vector<int> parse_tokens(const std::string& field, const Vocabulary& vocab) {
    std::vector<int> ids;
    for (const std::string& tok : split(field, ' '))
        if (!tok.empty()) ids.push_back(vocab.id(tok));
    return ids;
}

} // namespace

Dataset read_dataset(const std::string& path, const Vocabulary& vocab, const TaskSpec& spec) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open dataset '" + path + "'");
    Dataset data{spec, vocab, {}};
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields = split(line, '\t');
        if (fields.size() < 2)
            throw std::runtime_error("dataset line has no tab separator: " + line);
        ParallelExample ex;
        for (std::size_t i = 0; i + 1 < fields.size(); ++i)
            ex.sources.push_back(parse_tokens(fields[i], vocab));
        ex.target = parse_tokens(fields.back(), vocab);
        if (ex.target.empty()) throw std::runtime_error("dataset line with empty target");
        data.examples.push_back(std::move(ex));
    }

    if (data.has_features()) {
        std::ifstream sf(path + ".feat");
        if (!sf) throw std::runtime_error("cannot open feature sidecar '" + path + ".feat'");
        std::size_t row = 0;
        while (std::getline(sf, line)) {
            if (line.empty()) continue;
            if (row >= data.examples.size())
                throw std::runtime_error("feature sidecar has more rows than the dataset");
            std::istringstream in(line);
            std::vector<double> vals;
            double v;
            while (in >> v) vals.push_back(v);
            if (vals.size() % spec.feature_dim != 0)
                throw std::runtime_error("feature row size is not a multiple of feature_dim");
            Tensor t = Tensor::zeros(vals.size() / spec.feature_dim, spec.feature_dim);
            for (std::size_t i = 0; i < vals.size(); ++i) t.at(i) = vals[i];
            data.examples[row].features = std::move(t);
            ++row;
        }
        if (row != data.examples.size())
            throw std::runtime_error("feature sidecar row count does not match the dataset");
    }
    return data;
}

} // namespace mst

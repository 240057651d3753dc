#include "mst/viz.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mst {

namespace {

/// Per-head matrix for one encoder slot of one layer; hierarchical inner
/// weights get scaled by that head's attention-over-contexts column.
Tensor combined_head(const CrossAttentionRecord& rec, std::size_t enc, std::size_t head,
                     std::size_t rows) {
    const Tensor& w = rec.encoders[enc].heads[head];
    Tensor out = Tensor::zeros(rows, w.cols());
    const bool hier = !rec.context_weights.empty();
    for (std::size_t r = 0; r < rows; ++r) {
        const double scale = hier ? rec.context_weights[head].at(r, enc) : 1.0;
        for (std::size_t c = 0; c < w.cols(); ++c) out.at(r, c) = scale * w.at(r, c);
    }
    return out;
}

Tensor head_mean(const std::vector<Tensor>& mats) {
    Tensor out = mats[0];
    for (std::size_t h = 1; h < mats.size(); ++h)
        for (std::size_t i = 0; i < out.size(); ++i) out.at(i) += mats[h].at(i);
    const double inv = 1.0 / static_cast<double>(mats.size());
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= inv;
    return out;
}

} // namespace

HeatmapMatrix heatmap_matrix(const DecodeTrace& trace, const HeatmapSpec& spec) {
    if (spec.layer >= trace.layers.size())
        throw std::invalid_argument("viz: layer " + std::to_string(spec.layer) +
                                    " out of range (" + std::to_string(trace.layers.size()) +
                                    " layers)");
    const CrossAttentionRecord& rec = trace.layers[spec.layer];
    const std::size_t heads = rec.encoders.at(0).heads.size();
    if (spec.head >= static_cast<int>(heads))
        throw std::invalid_argument("viz: head index out of range");
    if (spec.encoder >= static_cast<int>(rec.encoders.size()))
        throw std::invalid_argument("viz: encoder index out of range");

    // The final query row predicts EOS; exports keep exactly one row per
    // decoded token.
    const std::size_t rows = trace.tokens.size();

    std::vector<std::size_t> enc_indices;
    if (spec.encoder < 0)
        for (std::size_t e = 0; e < rec.encoders.size(); ++e) enc_indices.push_back(e);
    else
        enc_indices.push_back(static_cast<std::size_t>(spec.encoder));

    HeatmapMatrix m;
    m.row_labels = trace.target_labels;
    std::size_t total_cols = 0;
    for (std::size_t e : enc_indices) total_cols += rec.encoders[e].heads[0].cols();
    m.values = Tensor::zeros(rows, total_cols);

    std::size_t base = 0;
    for (std::size_t e : enc_indices) {
        std::vector<Tensor> per_head;
        for (std::size_t h = 0; h < heads; ++h) per_head.push_back(combined_head(rec, e, h, rows));
        Tensor block = spec.head < 0 ? head_mean(per_head)
                                     : per_head[static_cast<std::size_t>(spec.head)];
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < block.cols(); ++c) m.values.at(r, base + c) = block.at(r, c);
        const auto& labels = trace.source_labels.at(e);
        if (labels.size() != block.cols())
            throw std::runtime_error("viz: source label count does not match weight columns");
        for (const std::string& l : labels) m.col_labels.push_back(l);
        base += block.cols();
    }
    return m;
}

HeatmapMatrix context_matrix(const DecodeTrace& trace, const HeatmapSpec& spec) {
    if (spec.layer >= trace.layers.size())
        throw std::invalid_argument("viz: layer out of range");
    const CrossAttentionRecord& rec = trace.layers[spec.layer];
    if (rec.context_weights.empty())
        throw std::invalid_argument("viz: attention-over-contexts exists only for the "
                                    "hierarchical strategy");
    const std::size_t heads = rec.context_weights.size();
    if (spec.head >= static_cast<int>(heads))
        throw std::invalid_argument("viz: head index out of range");
    const std::size_t rows = trace.tokens.size();

    HeatmapMatrix m;
    m.row_labels = trace.target_labels;
    for (const auto& enc : rec.encoders) m.col_labels.push_back(enc.name);
    std::vector<Tensor> per_head;
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor t = Tensor::zeros(rows, rec.encoders.size());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < rec.encoders.size(); ++c)
                t.at(r, c) = rec.context_weights[h].at(r, c);
        per_head.push_back(std::move(t));
    }
    m.values = spec.head < 0 ? head_mean(per_head) : per_head[static_cast<std::size_t>(spec.head)];
    return m;
}

void export_attention_csv(const HeatmapMatrix& m, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << "target";
    for (const std::string& c : m.col_labels) f << ',' << c;
    f << '\n';
    char buf[64];
    for (std::size_t r = 0; r < m.values.rows(); ++r) {
        f << m.row_labels.at(r);
        for (std::size_t c = 0; c < m.values.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", m.values.at(r, c));
            f << ',' << buf;
        }
        f << '\n';
    }
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

void export_heatmap_pgm(const HeatmapMatrix& m, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << "P2\n" << m.values.cols() << ' ' << m.values.rows() << "\n255\n";
    for (std::size_t r = 0; r < m.values.rows(); ++r) {
        for (std::size_t c = 0; c < m.values.cols(); ++c) {
            long pixel = std::lround(255.0 * m.values.at(r, c));
            if (pixel < 0) pixel = 0;
            if (pixel > 255) pixel = 255;
            f << pixel << (c + 1 == m.values.cols() ? '\n' : ' ');
        }
    }
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

HeatmapMatrix parse_attention_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty CSV '" + path + "'");

    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::size_t pos = 0;
        while (pos <= s.size()) {
            std::size_t nxt = s.find(',', pos);
            if (nxt == std::string::npos) {
                out.push_back(s.substr(pos));
                break;
            }
            out.push_back(s.substr(pos, nxt - pos));
            pos = nxt + 1;
        }
        return out;
    };

    HeatmapMatrix m;
    std::vector<std::string> header = split(line);
    m.col_labels.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields = split(line);
        if (fields.size() != header.size())
            throw std::runtime_error("CSV row width mismatch in '" + path + "'");
        m.row_labels.push_back(fields[0]);
        std::vector<double> vals;
        for (std::size_t i = 1; i < fields.size(); ++i) vals.push_back(std::stod(fields[i]));
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw std::runtime_error("CSV '" + path + "' has no data rows");
    m.values = Tensor::zeros(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m.values.at(r, c) = rows[r][c];
    return m;
}

} // namespace mst

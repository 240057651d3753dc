#include "mst/combination.hpp"

#include <cmath>
#include <stdexcept>

#include "mst/errors.hpp"

namespace mst {

Strategy strategy_from_string(const std::string& s) {
    if (s == "serial") return Strategy::Serial;
    if (s == "parallel") return Strategy::Parallel;
    if (s == "flat") return Strategy::Flat;
    if (s == "hierarchical") return Strategy::Hierarchical;
    throw ConfigError("unknown combination strategy '" + s +
                      "' (expected serial|parallel|flat|hierarchical)");
}

std::string strategy_to_string(Strategy s) {
    switch (s) {
    case Strategy::Serial: return "serial";
    case Strategy::Parallel: return "parallel";
    case Strategy::Flat: return "flat";
    case Strategy::Hierarchical: return "hierarchical";
    }
    return "?";
}

namespace {

NodeId maybe_dropout(Graph& g, NodeId x, const DropoutCtx& d) {
    if (d.rate > 0.0 && d.rng) return g.dropout(x, d.rate, *d.rng);
    return x;
}

NodeId sublayer(Graph& g, NodeId x, NodeId fx, const LnNodes& ln, double eps,
                const DropoutCtx& d) {
    return g.layer_norm(g.add(x, maybe_dropout(g, fx, d)), ln.gamma, ln.beta, eps);
}

void check_counts(const CrossBlockNodes& block, std::size_t n) {
    switch (block.strategy) {
    case Strategy::Serial:
        if (block.enc_attn.size() != n || block.ln.size() != n)
            throw ConfigError("serial cross-attention: expected " + std::to_string(n) +
                              " parameter sets, got " + std::to_string(block.enc_attn.size()));
        break;
    case Strategy::Parallel:
        if (block.enc_attn.size() != n || block.ln.size() != 1)
            throw ConfigError("parallel cross-attention: parameter count mismatch (" +
                              std::to_string(block.enc_attn.size()) + " sets for " +
                              std::to_string(n) + " encoders)");
        break;
    case Strategy::Flat:
        if (block.enc_attn.size() != 1 || block.ln.size() != 1)
            throw ConfigError("flat cross-attention: exactly one parameter set expected");
        break;
    case Strategy::Hierarchical:
        if (block.enc_attn.size() != n || block.ln.size() != 1)
            throw ConfigError("hierarchical cross-attention: expected " + std::to_string(n) +
                              " inner parameter sets, got " + std::to_string(block.enc_attn.size()));
        break;
    }
}

} // namespace

NodeId cross_combine_graph(Graph& g, NodeId x, std::span<const EncRef> encoders,
                           const CrossBlockNodes& block, double ln_eps,
                           CrossRecordNodes* record, const DropoutCtx& dropout) {
    const std::size_t n = encoders.size();
    if (n == 0) throw ConfigError("cross-attention: empty encoder bundle");
    check_counts(block, n);

    if (record) {
        record->strategy = block.strategy;
        record->enc_names.clear();
        record->enc_lengths.clear();
        record->per_encoder.clear();
        record->joint.clear();
        record->context.clear();
        for (const EncRef& e : encoders) {
            record->enc_names.push_back(e.name);
            record->enc_lengths.push_back(g.value(e.states).rows());
        }
    }

    switch (block.strategy) {
    case Strategy::Serial: {
        NodeId y = x;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<NodeId> w;
            NodeId f = multi_head_attention_graph(g, block.enc_attn[i], y, encoders[i].states,
                                                  encoders[i].states, encoders[i].mask, &w);
            y = sublayer(g, y, f, block.ln[i], ln_eps, dropout);
            if (record) record->per_encoder.push_back(std::move(w));
        }
        return y;
    }
    case Strategy::Parallel: {
        NodeId sum = -1;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<NodeId> w;
            NodeId f = multi_head_attention_graph(g, block.enc_attn[i], x, encoders[i].states,
                                                  encoders[i].states, encoders[i].mask, &w);
            sum = (sum < 0) ? f : g.add(sum, f);
            if (record) record->per_encoder.push_back(std::move(w));
        }
        return sublayer(g, x, sum, block.ln[0], ln_eps, dropout);
    }
    case Strategy::Flat: {
        std::vector<NodeId> parts;
        std::vector<const Mask*> masks;
        for (const EncRef& e : encoders) {
            parts.push_back(e.states);
            masks.push_back(e.mask);
        }
        NodeId flat = g.concat_rows(parts);
        Mask joint = Mask::concat_keys(masks);
        std::vector<NodeId> w;
        NodeId f = multi_head_attention_graph(g, block.enc_attn[0], x, flat, flat, &joint, &w);
        if (record) record->joint = std::move(w);
        return sublayer(g, x, f, block.ln[0], ln_eps, dropout);
    }
    case Strategy::Hierarchical: {
        // Inner attention per encoder (full multi-head, including the output
        // projection); the n context matrices then become per-position
        // key/value sets for the outer attention over contexts.
        std::vector<NodeId> contexts;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<NodeId> w;
            contexts.push_back(multi_head_attention_graph(g, block.enc_attn[i], x,
                                                          encoders[i].states, encoders[i].states,
                                                          encoders[i].mask, &w));
            if (record) record->per_encoder.push_back(std::move(w));
        }
        const MhaNodes& outer = block.outer;
        if (outer.heads() == 0)
            throw ConfigError("hierarchical cross-attention: missing outer parameter set");
        NodeId out = -1;
        for (std::size_t hidx = 0; hidx < outer.heads(); ++hidx) {
            NodeId qo = g.matmul(x, outer.wq[hidx]);
            const double dh = static_cast<double>(g.value(qo).cols());
            std::vector<NodeId> ks, vs;
            for (NodeId c : contexts) {
                ks.push_back(g.matmul(c, outer.wk[hidx]));
                vs.push_back(g.matmul(c, outer.wv[hidx]));
            }
            NodeId scores = g.scale(g.rowwise_dot_stack(qo, ks), 1.0 / std::sqrt(dh));
            NodeId cw = g.softmax_rows(scores);
            if (record) record->context.push_back(cw);
            NodeId mixed = g.rowwise_mix(cw, vs);
            NodeId proj = g.matmul(mixed, outer.wo[hidx]);
            out = (out < 0) ? proj : g.add(out, proj);
        }
        return sublayer(g, x, out, block.ln[0], ln_eps, dropout);
    }
    }
    throw ConfigError("cross-attention: unreachable strategy");
}

CrossAttentionRecord extract_record(const Graph& g, const CrossRecordNodes& rec) {
    CrossAttentionRecord out;
    out.strategy = rec.strategy;
    const std::size_t n = rec.enc_names.size();
    if (rec.strategy == Strategy::Flat) {
        // Split the joint [q x sum(len_i)] weights into per-encoder blocks.
        out.encoders.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.encoders[i].name = rec.enc_names[i];
        for (NodeId wid : rec.joint) {
            const Tensor& joint = g.value(wid);
            std::size_t base = 0;
            for (std::size_t i = 0; i < n; ++i) {
                Tensor slice = Tensor::zeros(joint.rows(), rec.enc_lengths[i]);
                for (std::size_t r = 0; r < joint.rows(); ++r)
                    for (std::size_t c = 0; c < rec.enc_lengths[i]; ++c)
                        slice.at(r, c) = joint.at(r, base + c);
                out.encoders[i].heads.push_back(std::move(slice));
                base += rec.enc_lengths[i];
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            CrossAttentionRecord::EncoderWeights ew;
            ew.name = rec.enc_names[i];
            for (NodeId wid : rec.per_encoder[i]) ew.heads.push_back(g.value(wid));
            out.encoders.push_back(std::move(ew));
        }
    }
    for (NodeId cid : rec.context) out.context_weights.push_back(g.value(cid));
    return out;
}

namespace {

struct BoundBundle {
    std::vector<EncRef> refs;
};

BoundBundle bind_bundle(Graph& g, const EncoderBundle& bundle) {
    if (bundle.count() == 0) throw ConfigError("cross-attention: empty encoder bundle");
    BoundBundle b;
    for (const auto& e : bundle.entries)
        b.refs.push_back(EncRef{e.name, g.input(e.states), &e.mask});
    return b;
}

LnNodes bind_ln(Graph& g, const LayerNormParams& p) {
    return LnNodes{g.input(p.gamma), g.input(p.beta)};
}

CombineResult run(Graph& g, NodeId x, std::span<const EncRef> refs, const CrossBlockNodes& block) {
    CrossRecordNodes rec;
    NodeId out = cross_combine_graph(g, x, refs, block, 1e-6, &rec);
    return CombineResult{g.value(out), extract_record(g, rec)};
}

} // namespace

CombineResult serial_combine(const Tensor& x, const EncoderBundle& encoders,
                             const SerialParams& params) {
    Graph g;
    NodeId xn = g.input(x);
    BoundBundle b = bind_bundle(g, encoders);
    CrossBlockNodes block;
    block.strategy = Strategy::Serial;
    for (const auto& a : params.attn) block.enc_attn.push_back(bind_params(g, a));
    for (const auto& l : params.ln) block.ln.push_back(bind_ln(g, l));
    return run(g, xn, b.refs, block);
}

CombineResult parallel_combine(const Tensor& x, const EncoderBundle& encoders,
                               const ParallelParams& params) {
    Graph g;
    NodeId xn = g.input(x);
    BoundBundle b = bind_bundle(g, encoders);
    CrossBlockNodes block;
    block.strategy = Strategy::Parallel;
    for (const auto& a : params.attn) block.enc_attn.push_back(bind_params(g, a));
    block.ln.push_back(bind_ln(g, params.ln));
    return run(g, xn, b.refs, block);
}

CombineResult flat_combine(const Tensor& x, const EncoderBundle& encoders,
                           const FlatParams& params) {
    Graph g;
    NodeId xn = g.input(x);
    BoundBundle b = bind_bundle(g, encoders);
    CrossBlockNodes block;
    block.strategy = Strategy::Flat;
    block.enc_attn.push_back(bind_params(g, params.attn));
    block.ln.push_back(bind_ln(g, params.ln));
    return run(g, xn, b.refs, block);
}

CombineResult hierarchical_combine(const Tensor& x, const EncoderBundle& encoders,
                                   const HierarchicalParams& params) {
    Graph g;
    NodeId xn = g.input(x);
    BoundBundle b = bind_bundle(g, encoders);
    CrossBlockNodes block;
    block.strategy = Strategy::Hierarchical;
    for (const auto& a : params.inner) block.enc_attn.push_back(bind_params(g, a));
    block.outer = bind_params(g, params.outer);
    block.ln.push_back(bind_ln(g, params.ln));
    return run(g, xn, b.refs, block);
}

} // namespace mst

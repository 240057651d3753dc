#include "mst/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace mst {

NodeId scaled_dot_attention_graph(Graph& g, NodeId q, NodeId k, NodeId v, const Mask* mask,
                                  NodeId* weights_out) {
    const std::size_t width = g.value(q).cols();
    NodeId scores = g.scale(g.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(width)));
    NodeId weights = g.softmax_rows(scores, mask);
    if (weights_out) *weights_out = weights;
    return g.matmul(weights, v);
}

NodeId multi_head_attention_graph(Graph& g, const MhaNodes& p, NodeId q, NodeId k, NodeId v,
                                  const Mask* mask, std::vector<NodeId>* weights_out) {
    if (p.heads() == 0) throw std::invalid_argument("multi_head_attention: no heads");
    NodeId out = -1;
    for (std::size_t i = 0; i < p.heads(); ++i) {
        NodeId qi = g.matmul(q, p.wq[i]);
        NodeId ki = g.matmul(k, p.wk[i]);
        NodeId vi = g.matmul(v, p.wv[i]);
        NodeId w = -1;
        NodeId ctx = scaled_dot_attention_graph(g, qi, ki, vi, mask, &w);
        if (weights_out) weights_out->push_back(w);
        NodeId proj = g.matmul(ctx, p.wo[i]);
        out = (out < 0) ? proj : g.add(out, proj);
    }
    return out;
}

MhaNodes bind_params(Graph& g, const MultiHeadParams& p) {
    if (p.wk.size() != p.heads() || p.wv.size() != p.heads() || p.wo.size() != p.heads())
        throw std::invalid_argument("multi_head_attention: per-head matrix counts disagree");
    MhaNodes n;
    for (std::size_t i = 0; i < p.heads(); ++i) {
        n.wq.push_back(g.input(p.wq[i]));
        n.wk.push_back(g.input(p.wk[i]));
        n.wv.push_back(g.input(p.wv[i]));
        n.wo.push_back(g.input(p.wo[i]));
    }
    return n;
}

AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const Mask* mask) {
    Graph g;
    NodeId qn = g.input(q);
    NodeId kn = g.input(k);
    NodeId vn = g.input(v);
    NodeId w = -1;
    NodeId ctx = scaled_dot_attention_graph(g, qn, kn, vn, mask, &w);
    return AttentionOutput{g.value(ctx), {g.value(w)}};
}

AttentionOutput multi_head_attention(const MultiHeadParams& p, const Tensor& q, const Tensor& k,
                                     const Tensor& v, const Mask* mask) {
    Graph g;
    MhaNodes nodes = bind_params(g, p);
    NodeId qn = g.input(q);
    NodeId kn = g.input(k);
    NodeId vn = g.input(v);
    std::vector<NodeId> w;
    NodeId ctx = multi_head_attention_graph(g, nodes, qn, kn, vn, mask, &w);
    AttentionOutput out;
    out.context = g.value(ctx);
    for (NodeId id : w) out.weights.push_back(g.value(id));
    return out;
}

} // namespace mst

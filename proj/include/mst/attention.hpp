#pragma once

#include <optional>
#include <vector>

#include "mst/graph.hpp"
#include "mst/mask.hpp"
#include "mst/tensor.hpp"

namespace mst {

/// Per-head projections. Head i maps inputs of width d through wq/wk/wv
/// [d x d_h] and projects its context back with wo [d_h x d]; the head
/// outputs are summed. h * d_h does not have to equal d.
struct MultiHeadParams {
    std::vector<Tensor> wq, wk, wv; // h entries, each [d x d_h]
    std::vector<Tensor> wo;         // h entries, each [d_h x d]

    std::size_t heads() const { return wq.size(); }
};

struct AttentionOutput {
    Tensor context;              // [queries x d]
    std::vector<Tensor> weights; // per head, [queries x keys]; rows sum to 1
};

/// Graph-level handles to one attention block's projections.
struct MhaNodes {
    std::vector<NodeId> wq, wk, wv, wo;
    std::size_t heads() const { return wq.size(); }
};

/// softmax(Q K^T / sqrt(d')) V with the mask applied before the softmax.
/// The divisor is sqrt of the width of the matrices actually multiplied
/// (Q.cols). Masked weights are exactly zero; a fully masked query row is an
/// error.
AttentionOutput scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const Mask* mask = nullptr);

/// Multi-head attention: sum over heads of attn(Q wq_i, K wk_i, V wv_i) wo_i.
/// Per-head weights are always retained.
AttentionOutput multi_head_attention(const MultiHeadParams& p, const Tensor& q, const Tensor& k,
                                     const Tensor& v, const Mask* mask = nullptr);

/// Tape builders used by the model; the functions above are thin wrappers
/// over these with a throwaway graph.
NodeId scaled_dot_attention_graph(Graph& g, NodeId q, NodeId k, NodeId v, const Mask* mask,
                                  NodeId* weights_out = nullptr);
NodeId multi_head_attention_graph(Graph& g, const MhaNodes& p, NodeId q, NodeId k, NodeId v,
                                  const Mask* mask, std::vector<NodeId>* weights_out = nullptr);

/// Binds Tensor-level params as constant graph leaves.
MhaNodes bind_params(Graph& g, const MultiHeadParams& p);

} // namespace mst

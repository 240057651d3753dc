#pragma once

#include <span>
#include <string>
#include <vector>

#include "mst/attention.hpp"
#include "mst/graph.hpp"
#include "mst/mask.hpp"

namespace mst {

/// How the decoder's cross-attention combines multiple encoders.
enum class Strategy { Serial, Parallel, Flat, Hierarchical };

Strategy strategy_from_string(const std::string& s);
std::string strategy_to_string(Strategy s);

/// Ordered per-encoder inputs to a cross-attention block. Order is
/// significant: serial attends in this order, flat concatenates in it.
struct EncoderBundle {
    struct Entry {
        std::string name;
        Tensor states; // [len_i x d]
        Mask mask;     // broadcast-row or [q x len_i]
    };
    std::vector<Entry> entries;

    std::size_t count() const { return entries.size(); }
};

/// Cross-attention weights kept for export. For serial/parallel/hierarchical
/// every per-encoder row sums to 1; for flat it is the concatenation across
/// encoders of a row that sums to 1. context_weights is hierarchical-only:
/// the attention-over-contexts distribution, [q x n] per head.
struct CrossAttentionRecord {
    struct EncoderWeights {
        std::string name;
        std::vector<Tensor> heads; // per head [q x len_i]
    };
    Strategy strategy = Strategy::Serial;
    std::vector<EncoderWeights> encoders;
    std::vector<Tensor> context_weights;
};

struct LayerNormParams {
    Tensor gamma, beta;
};

struct SerialParams {
    std::vector<MultiHeadParams> attn; // one per encoder
    std::vector<LayerNormParams> ln;   // one per encoder (each hop is a full sub-layer)
};
struct ParallelParams {
    std::vector<MultiHeadParams> attn; // one per encoder
    LayerNormParams ln;                // single normalization around the summed context
};
struct FlatParams {
    MultiHeadParams attn; // single set over the concatenated states
    LayerNormParams ln;
};
struct HierarchicalParams {
    std::vector<MultiHeadParams> inner; // one per encoder
    MultiHeadParams outer;              // attention over the n per-encoder contexts
    LayerNormParams ln;
};

struct CombineResult {
    Tensor output; // [q x d]
    CrossAttentionRecord record;
};

// Tensor-level entry points matching the four strategies. Each applies the
// post-norm sub-layer template out = LN(x + f(x)) with the residual wiring
// specific to the strategy.
CombineResult serial_combine(const Tensor& x, const EncoderBundle& encoders,
                             const SerialParams& params);
CombineResult parallel_combine(const Tensor& x, const EncoderBundle& encoders,
                               const ParallelParams& params);
CombineResult flat_combine(const Tensor& x, const EncoderBundle& encoders,
                           const FlatParams& params);
CombineResult hierarchical_combine(const Tensor& x, const EncoderBundle& encoders,
                                   const HierarchicalParams& params);

// ---- Graph-level machinery shared with the decoder stack ----

struct EncRef {
    std::string name;
    NodeId states;
    const Mask* mask; // owned by the caller, must outlive the forward pass
};

struct LnNodes {
    NodeId gamma, beta;
};

/// One decoder layer's cross-attention parameters, already bound to a graph.
/// enc_attn holds n sets for serial/parallel/hierarchical and exactly one for
/// flat; ln holds n pairs for serial and one otherwise; outer is
/// hierarchical-only.
struct CrossBlockNodes {
    Strategy strategy = Strategy::Serial;
    std::vector<MhaNodes> enc_attn;
    MhaNodes outer;
    std::vector<LnNodes> ln;
};

/// Weight node handles for record extraction after the forward pass.
struct CrossRecordNodes {
    Strategy strategy = Strategy::Serial;
    std::vector<std::string> enc_names;
    std::vector<std::size_t> enc_lengths;
    std::vector<std::vector<NodeId>> per_encoder; // [n][h] (empty for flat)
    std::vector<NodeId> joint;                    // [h], flat only
    std::vector<NodeId> context;                  // [h], hierarchical only
};

struct DropoutCtx {
    double rate = 0.0;
    Prng* rng = nullptr;
};

NodeId cross_combine_graph(Graph& g, NodeId x, std::span<const EncRef> encoders,
                           const CrossBlockNodes& block, double ln_eps,
                           CrossRecordNodes* record, const DropoutCtx& dropout = {});

CrossAttentionRecord extract_record(const Graph& g, const CrossRecordNodes& rec);

} // namespace mst

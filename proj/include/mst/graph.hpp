#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mst/mask.hpp"
#include "mst/prng.hpp"
#include "mst/tensor.hpp"

namespace mst {

/// A named trainable tensor. Gradients accumulate additively into `grad`
/// across backward passes and are zeroed explicitly between optimizer steps.
struct Parameter {
    std::string name;
    Tensor tensor;
    Tensor grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor t, bool train = true)
        : name(std::move(n)), tensor(std::move(t)), trainable(train) {
        grad = Tensor(tensor.shape());
    }
    void zero_grad() { grad.fill(0.0); }
};

using NodeId = int;

enum class Op : std::uint8_t {
    Input,          // constant leaf
    Param,          // leaf bound to a Parameter
    Add,            // elementwise, same shape
    AddBias,        // [m x n] + rank-1 [n], broadcast over rows
    Mul,            // elementwise (Hadamard)
    Scale,          // multiply by a compile-time constant
    Matmul,         // a [m x k] * b [k x n]
    MatmulNT,       // a [m x p] * b[n x p]^T
    Relu,
    SoftmaxRows,    // row softmax with optional mask; masked weights exactly 0
    LayerNorm,      // inputs: x [m x d], gamma [d], beta [d]
    Embed,          // inputs: table [V x d]; aux ids select rows
    ConcatRows,     // vertical stack of inputs with equal column counts
    RowwiseDotStack,// inputs: q [r x p], k_1..k_n [r x p] -> [r x n]
    RowwiseMix,     // inputs: w [r x n], v_1..v_n [r x p] -> [r x p]
    SumAll,         // -> scalar [1]
    CrossEntropy,   // inputs: logits [L x V]; aux labels + active flags -> [1]
    Dropout,        // inverted dropout with a frozen keep pattern
};

/// One tape entry. Input node ids are always smaller than the node's own id,
/// so the tape order is a topological order by construction.
struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad; // same shape as value; allocated lazily by backward()

    // Op-specific payload.
    double scalar = 0.0;               // Scale factor, LayerNorm eps, Dropout keep-scale
    std::vector<int> ids;              // Embed row ids, CrossEntropy labels
    std::vector<std::uint8_t> flags;   // CrossEntropy active rows, Dropout keep pattern
    std::shared_ptr<const Mask> mask;  // SoftmaxRows
    Tensor aux;                        // LayerNorm per-row (mean, inv_std); CrossEntropy probs
};

/// Reverse-mode tape. Build the forward computation through the factory
/// methods, then call backward() on a scalar node. Single-threaded per
/// instance; values are immutable once created.
class Graph {
public:
    NodeId input(Tensor v);
    /// Leaf bound to a Parameter; backward() adds the leaf gradient into
    /// p.grad when the parameter is trainable. Repeated calls for the same
    /// Parameter return the same node.
    NodeId param(Parameter& p);

    NodeId add(NodeId a, NodeId b);
    NodeId add_bias(NodeId a, NodeId bias);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId matmul(NodeId a, NodeId b);
    NodeId matmul_nt(NodeId a, NodeId b);
    NodeId relu(NodeId a);
    NodeId softmax_rows(NodeId a, const Mask* mask = nullptr);
    NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-6);
    NodeId embed(NodeId table, std::vector<int> ids);
    NodeId concat_rows(std::span<const NodeId> parts);
    NodeId rowwise_dot_stack(NodeId q, std::span<const NodeId> keys);
    NodeId rowwise_mix(NodeId w, std::span<const NodeId> values);
    NodeId sum_all(NodeId a);
    /// Mean of -log softmax(logits)[label] over rows with active[i] != 0.
    NodeId cross_entropy(NodeId logits, const std::vector<int>& labels,
                         const std::vector<std::uint8_t>& active);
    /// Inverted dropout. rate in [0, 1); rate == 0 returns `a` unchanged.
    NodeId dropout(NodeId a, double rate, Prng& rng);

    /// Reverse topological sweep from a scalar loss node. Gradients accumulate
    /// additively across fan-out; trainable Parameter leaves receive their
    /// gradient via +=. Throws if the loss is not a scalar.
    void backward(NodeId loss);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    const Node& node(NodeId id) const { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

private:
    NodeId push(Node n);
    void check(NodeId id) const;

    std::vector<Node> nodes_;
    std::vector<std::pair<NodeId, Parameter*>> bindings_;
};

} // namespace mst

#include "mst/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mst {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

void require_rank2(const Tensor& t, const char* who) {
    require(t.rank() == 2, std::string(who) + ": rank-2 tensor required, got " + t.shape_str());
}

} // namespace

NodeId Graph::push(Node n) {
    NodeId id = static_cast<NodeId>(nodes_.size());
    for (NodeId in : n.inputs)
        require(in >= 0 && in < id, "Graph: input node id out of order");
    nodes_.push_back(std::move(n));
    return id;
}

void Graph::check(NodeId id) const {
    require(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(), "Graph: bad node id");
}

NodeId Graph::input(Tensor v) {
    Node n;
    n.op = Op::Input;
    n.value = std::move(v);
    return push(std::move(n));
}

NodeId Graph::param(Parameter& p) {
    for (const auto& [id, bound] : bindings_)
        if (bound == &p) return id;
    Node n;
    n.op = Op::Param;
    n.value = p.tensor;
    NodeId id = push(std::move(n));
    bindings_.emplace_back(id, &p);
    return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
    check(a); check(b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    require(ta.same_shape(tb), "add: shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
    Node n;
    n.op = Op::Add;
    n.inputs = {a, b};
    n.value = ta;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.at(i) += tb.at(i);
    return push(std::move(n));
}

NodeId Graph::add_bias(NodeId a, NodeId bias) {
    check(a); check(bias);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[bias].value;
    require_rank2(ta, "add_bias");
    require(tb.rank() == 1 && tb.dim(0) == ta.cols(),
            "add_bias: bias shape " + tb.shape_str() + " does not match " + ta.shape_str());
    Node n;
    n.op = Op::AddBias;
    n.inputs = {a, bias};
    n.value = ta;
    for (std::size_t r = 0; r < ta.rows(); ++r)
        for (std::size_t c = 0; c < ta.cols(); ++c) n.value.at(r, c) += tb.at(c);
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    check(a); check(b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    require(ta.same_shape(tb), "mul: shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
    Node n;
    n.op = Op::Mul;
    n.inputs = {a, b};
    n.value = ta;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.at(i) *= tb.at(i);
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double c) {
    check(a);
    Node n;
    n.op = Op::Scale;
    n.inputs = {a};
    n.scalar = c;
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value.at(i) *= c;
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    check(a); check(b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    require_rank2(ta, "matmul");
    require_rank2(tb, "matmul");
    require(ta.cols() == tb.rows(),
            "matmul: inner dimensions disagree: " + ta.shape_str() + " vs " + tb.shape_str());
    Node n;
    n.op = Op::Matmul;
    n.inputs = {a, b};
    n.value = Tensor::zeros(ta.rows(), tb.cols());
    detail::matmul_nn_acc(ta.data(), tb.data(), n.value.data(), ta.rows(), ta.cols(), tb.cols());
    return push(std::move(n));
}

NodeId Graph::matmul_nt(NodeId a, NodeId b) {
    check(a); check(b);
    const Tensor& ta = nodes_[a].value;
    const Tensor& tb = nodes_[b].value;
    require_rank2(ta, "matmul_nt");
    require_rank2(tb, "matmul_nt");
    require(ta.cols() == tb.cols(),
            "matmul_nt: trailing dimensions disagree: " + ta.shape_str() + " vs " + tb.shape_str());
    Node n;
    n.op = Op::MatmulNT;
    n.inputs = {a, b};
    n.value = Tensor::zeros(ta.rows(), tb.rows());
    detail::matmul_nt_acc(ta.data(), tb.data(), n.value.data(), ta.rows(), ta.cols(), tb.rows());
    return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
    check(a);
    Node n;
    n.op = Op::Relu;
    n.inputs = {a};
    n.value = nodes_[a].value;
    for (std::size_t i = 0; i < n.value.size(); ++i)
        if (n.value.at(i) < 0.0) n.value.at(i) = 0.0;
    return push(std::move(n));
}

NodeId Graph::softmax_rows(NodeId a, const Mask* mask) {
    check(a);
    const Tensor& x = nodes_[a].value;
    require_rank2(x, "softmax_rows");
    if (mask) {
        require(mask->cols == x.cols() && (mask->rows == 1 || mask->rows == x.rows()),
                "softmax_rows: mask " + std::to_string(mask->rows) + "x" +
                    std::to_string(mask->cols) + " does not fit " + x.shape_str());
    }
    Node n;
    n.op = Op::SoftmaxRows;
    n.inputs = {a};
    if (mask) n.mask = std::make_shared<Mask>(*mask);
    n.value = Tensor::zeros(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < x.cols(); ++c)
            if (!mask || mask->at(r, c)) mx = std::max(mx, x.at(r, c));
        if (!std::isfinite(mx))
            throw std::invalid_argument("softmax_rows: fully masked row " + std::to_string(r));
        double sum = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            if (!mask || mask->at(r, c)) {
                double e = std::exp(x.at(r, c) - mx);
                n.value.at(r, c) = e;
                sum += e;
            }
        }
        for (std::size_t c = 0; c < x.cols(); ++c)
            if (!mask || mask->at(r, c)) n.value.at(r, c) /= sum;
    }
    return push(std::move(n));
}

NodeId Graph::layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps) {
    check(x); check(gamma); check(beta);
    const Tensor& tx = nodes_[x].value;
    const Tensor& tg = nodes_[gamma].value;
    const Tensor& tb = nodes_[beta].value;
    require_rank2(tx, "layer_norm");
    require(eps > 0.0, "layer_norm: eps must be positive");
    require(tg.rank() == 1 && tg.dim(0) == tx.cols(), "layer_norm: gamma shape " + tg.shape_str() +
                                                          " does not match " + tx.shape_str());
    require(tb.rank() == 1 && tb.dim(0) == tx.cols(), "layer_norm: beta shape " + tb.shape_str() +
                                                          " does not match " + tx.shape_str());
    Node n;
    n.op = Op::LayerNorm;
    n.inputs = {x, gamma, beta};
    n.scalar = eps;
    n.value = Tensor::zeros(tx.rows(), tx.cols());
    n.aux = Tensor::zeros(tx.rows(), 2); // per row: mean, 1/sqrt(var+eps)
    const std::size_t d = tx.cols();
    for (std::size_t r = 0; r < tx.rows(); ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < d; ++c) mean += tx.at(r, c);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            double dv = tx.at(r, c) - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(d);
        double inv = 1.0 / std::sqrt(var + eps);
        n.aux.at(r, 0) = mean;
        n.aux.at(r, 1) = inv;
        for (std::size_t c = 0; c < d; ++c)
            n.value.at(r, c) = tg.at(c) * (tx.at(r, c) - mean) * inv + tb.at(c);
    }
    return push(std::move(n));
}

NodeId Graph::embed(NodeId table, std::vector<int> ids) {
    check(table);
    const Tensor& t = nodes_[table].value;
    require_rank2(t, "embed");
    require(!ids.empty(), "embed: empty id list");
    for (int id : ids)
        require(id >= 0 && static_cast<std::size_t>(id) < t.rows(),
                "embed: id " + std::to_string(id) + " out of range for table " + t.shape_str());
    Node n;
    n.op = Op::Embed;
    n.inputs = {table};
    n.value = Tensor::zeros(ids.size(), t.cols());
    for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c)
            n.value.at(r, c) = t.at(static_cast<std::size_t>(ids[r]), c);
    n.ids = std::move(ids);
    return push(std::move(n));
}

NodeId Graph::concat_rows(std::span<const NodeId> parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    std::size_t rows = 0;
    std::size_t cols = 0;
    for (NodeId p : parts) {
        check(p);
        const Tensor& t = nodes_[p].value;
        require_rank2(t, "concat_rows");
        if (cols == 0) cols = t.cols();
        require(t.cols() == cols, "concat_rows: column counts disagree");
        rows += t.rows();
    }
    Node n;
    n.op = Op::ConcatRows;
    n.inputs.assign(parts.begin(), parts.end());
    n.value = Tensor::zeros(rows, cols);
    std::size_t r0 = 0;
    for (NodeId p : parts) {
        const Tensor& t = nodes_[p].value;
        for (std::size_t r = 0; r < t.rows(); ++r)
            for (std::size_t c = 0; c < cols; ++c) n.value.at(r0 + r, c) = t.at(r, c);
        r0 += t.rows();
    }
    return push(std::move(n));
}

NodeId Graph::rowwise_dot_stack(NodeId q, std::span<const NodeId> keys) {
    check(q);
    require(!keys.empty(), "rowwise_dot_stack: no key inputs");
    const Tensor& tq = nodes_[q].value;
    require_rank2(tq, "rowwise_dot_stack");
    Node n;
    n.op = Op::RowwiseDotStack;
    n.inputs.push_back(q);
    for (NodeId k : keys) {
        check(k);
        const Tensor& tk = nodes_[k].value;
        require(tk.same_shape(tq), "rowwise_dot_stack: key shape " + tk.shape_str() +
                                       " does not match query " + tq.shape_str());
        n.inputs.push_back(k);
    }
    n.value = Tensor::zeros(tq.rows(), keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const Tensor& tk = nodes_[keys[i]].value;
        for (std::size_t r = 0; r < tq.rows(); ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < tq.cols(); ++c) acc += tq.at(r, c) * tk.at(r, c);
            n.value.at(r, i) = acc;
        }
    }
    return push(std::move(n));
}

NodeId Graph::rowwise_mix(NodeId w, std::span<const NodeId> values) {
    check(w);
    require(!values.empty(), "rowwise_mix: no value inputs");
    const Tensor& tw = nodes_[w].value;
    require_rank2(tw, "rowwise_mix");
    require(tw.cols() == values.size(), "rowwise_mix: weight columns " + tw.shape_str() +
                                            " do not match value count " +
                                            std::to_string(values.size()));
    const Tensor& t0 = nodes_[values[0]].value;
    Node n;
    n.op = Op::RowwiseMix;
    n.inputs.push_back(w);
    for (NodeId v : values) {
        check(v);
        const Tensor& tv = nodes_[v].value;
        require(tv.same_shape(t0), "rowwise_mix: value shapes disagree");
        require(tv.rows() == tw.rows(), "rowwise_mix: row counts disagree");
        n.inputs.push_back(v);
    }
    n.value = Tensor::zeros(t0.rows(), t0.cols());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const Tensor& tv = nodes_[values[i]].value;
        for (std::size_t r = 0; r < t0.rows(); ++r) {
            const double wv = tw.at(r, i);
            for (std::size_t c = 0; c < t0.cols(); ++c) n.value.at(r, c) += wv * tv.at(r, c);
        }
    }
    return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
    check(a);
    Node n;
    n.op = Op::SumAll;
    n.inputs = {a};
    n.value = Tensor::zeros(std::size_t{1});
    double acc = 0.0;
    for (double v : nodes_[a].value.values()) acc += v;
    n.value.at(0) = acc;
    return push(std::move(n));
}

NodeId Graph::cross_entropy(NodeId logits, const std::vector<int>& labels,
                            const std::vector<std::uint8_t>& active) {
    check(logits);
    const Tensor& t = nodes_[logits].value;
    require_rank2(t, "cross_entropy");
    require(labels.size() == t.rows(), "cross_entropy: label count does not match logit rows");
    require(active.size() == t.rows(), "cross_entropy: mask size does not match logit rows");
    std::size_t count = 0;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        if (!active[r]) continue;
        ++count;
        require(labels[r] >= 0 && static_cast<std::size_t>(labels[r]) < t.cols(),
                "cross_entropy: label " + std::to_string(labels[r]) + " out of range");
    }
    require(count > 0, "cross_entropy: every position is padding");

    Node n;
    n.op = Op::CrossEntropy;
    n.inputs = {logits};
    n.ids = labels;
    n.flags = active;
    n.aux = Tensor::zeros(t.rows(), t.cols()); // softmax probabilities of active rows
    n.value = Tensor::zeros(std::size_t{1});
    double loss = 0.0;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        if (!active[r]) continue;
        double mx = t.at(r, 0);
        for (std::size_t c = 1; c < t.cols(); ++c) mx = std::max(mx, t.at(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < t.cols(); ++c) {
            double e = std::exp(t.at(r, c) - mx);
            n.aux.at(r, c) = e;
            sum += e;
        }
        for (std::size_t c = 0; c < t.cols(); ++c) n.aux.at(r, c) /= sum;
        loss += std::log(sum) + mx - t.at(r, static_cast<std::size_t>(labels[r]));
    }
    n.value.at(0) = loss / static_cast<double>(count);
    n.scalar = static_cast<double>(count);
    return push(std::move(n));
}

NodeId Graph::dropout(NodeId a, double rate, Prng& rng) {
    check(a);
    require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1)");
    if (rate == 0.0) return a;
    Node n;
    n.op = Op::Dropout;
    n.inputs = {a};
    n.scalar = 1.0 / (1.0 - rate);
    const Tensor& t = nodes_[a].value;
    n.value = t;
    n.flags.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        bool keep = rng.next_double() >= rate;
        n.flags[i] = keep ? 1 : 0;
        n.value.at(i) = keep ? t.at(i) * n.scalar : 0.0;
    }
    return push(std::move(n));
}

void Graph::backward(NodeId loss) {
    check(loss);
    if (nodes_[loss].value.size() != 1)
        throw std::invalid_argument("backward: loss node must be scalar, got shape " +
                                    nodes_[loss].value.shape_str());

    // Mark nodes the loss depends on.
    std::vector<std::uint8_t> needed(nodes_.size(), 0);
    needed[loss] = 1;
    for (NodeId id = loss; id >= 0; --id) {
        if (!needed[id]) continue;
        for (NodeId in : nodes_[id].inputs) needed[in] = 1;
    }
    for (std::size_t id = 0; id < nodes_.size(); ++id)
        if (needed[id]) nodes_[id].grad = Tensor(nodes_[id].value.shape());

    nodes_[loss].grad.at(0) = 1.0;

    for (NodeId id = loss; id >= 0; --id) {
        if (!needed[id]) continue;
        Node& n = nodes_[id];
        const Tensor& g = n.grad;
        switch (n.op) {
        case Op::Input:
        case Op::Param:
            break;
        case Op::Add: {
            Tensor& da = nodes_[n.inputs[0]].grad;
            Tensor& db = nodes_[n.inputs[1]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                da.at(i) += g.at(i);
                db.at(i) += g.at(i);
            }
            break;
        }
        case Op::AddBias: {
            Tensor& da = nodes_[n.inputs[0]].grad;
            Tensor& db = nodes_[n.inputs[1]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) da.at(i) += g.at(i);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) db.at(c) += g.at(r, c);
            break;
        }
        case Op::Mul: {
            const Tensor& a = nodes_[n.inputs[0]].value;
            const Tensor& b = nodes_[n.inputs[1]].value;
            Tensor& da = nodes_[n.inputs[0]].grad;
            Tensor& db = nodes_[n.inputs[1]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                da.at(i) += g.at(i) * b.at(i);
                db.at(i) += g.at(i) * a.at(i);
            }
            break;
        }
        case Op::Scale: {
            Tensor& da = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 0; i < g.size(); ++i) da.at(i) += n.scalar * g.at(i);
            break;
        }
        case Op::Matmul: {
            const Tensor& a = nodes_[n.inputs[0]].value;
            const Tensor& b = nodes_[n.inputs[1]].value;
            Tensor& da = nodes_[n.inputs[0]].grad;
            Tensor& db = nodes_[n.inputs[1]].grad;
            // dA += G * B^T ; dB += A^T * G
            detail::matmul_nt_acc(g.data(), b.data(), da.data(), g.rows(), g.cols(), b.rows());
            detail::matmul_tn_acc(a.data(), g.data(), db.data(), a.rows(), a.cols(), g.cols());
            break;
        }
        case Op::MatmulNT: {
            const Tensor& a = nodes_[n.inputs[0]].value;
            const Tensor& b = nodes_[n.inputs[1]].value;
            Tensor& da = nodes_[n.inputs[0]].grad;
            Tensor& db = nodes_[n.inputs[1]].grad;
            // C = A * B^T: dA += G * B ; dB += G^T * A
            detail::matmul_nn_acc(g.data(), b.data(), da.data(), g.rows(), g.cols(), b.cols());
            detail::matmul_tn_acc(g.data(), a.data(), db.data(), g.rows(), g.cols(), a.cols());
            break;
        }
        case Op::Relu: {
            const Tensor& a = nodes_[n.inputs[0]].value;
            Tensor& da = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (a.at(i) > 0.0) da.at(i) += g.at(i);
            break;
        }
        case Op::SoftmaxRows: {
            const Tensor& y = n.value;
            Tensor& da = nodes_[n.inputs[0]].grad;
            const Mask* m = n.mask.get();
            for (std::size_t r = 0; r < y.rows(); ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < y.cols(); ++c)
                    if (!m || m->at(r, c)) dot += g.at(r, c) * y.at(r, c);
                for (std::size_t c = 0; c < y.cols(); ++c)
                    if (!m || m->at(r, c)) da.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
            }
            break;
        }
        case Op::LayerNorm: {
            const Tensor& x = nodes_[n.inputs[0]].value;
            const Tensor& gamma = nodes_[n.inputs[1]].value;
            Tensor& dx = nodes_[n.inputs[0]].grad;
            Tensor& dgamma = nodes_[n.inputs[1]].grad;
            Tensor& dbeta = nodes_[n.inputs[2]].grad;
            const std::size_t d = x.cols();
            for (std::size_t r = 0; r < x.rows(); ++r) {
                const double mean = n.aux.at(r, 0);
                const double inv = n.aux.at(r, 1);
                double mean_u = 0.0;
                double mean_ux = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double xh = (x.at(r, c) - mean) * inv;
                    const double u = gamma.at(c) * g.at(r, c);
                    mean_u += u;
                    mean_ux += u * xh;
                    dgamma.at(c) += g.at(r, c) * xh;
                    dbeta.at(c) += g.at(r, c);
                }
                mean_u /= static_cast<double>(d);
                mean_ux /= static_cast<double>(d);
                for (std::size_t c = 0; c < d; ++c) {
                    const double xh = (x.at(r, c) - mean) * inv;
                    dx.at(r, c) += inv * (gamma.at(c) * g.at(r, c) - mean_u - xh * mean_ux);
                }
            }
            break;
        }
        case Op::Embed: {
            Tensor& dt = nodes_[n.inputs[0]].grad;
            for (std::size_t r = 0; r < n.ids.size(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c)
                    dt.at(static_cast<std::size_t>(n.ids[r]), c) += g.at(r, c);
            break;
        }
        case Op::ConcatRows: {
            std::size_t r0 = 0;
            for (NodeId in : n.inputs) {
                Tensor& di = nodes_[in].grad;
                for (std::size_t r = 0; r < di.rows(); ++r)
                    for (std::size_t c = 0; c < di.cols(); ++c) di.at(r, c) += g.at(r0 + r, c);
                r0 += di.rows();
            }
            break;
        }
        case Op::RowwiseDotStack: {
            const Tensor& q = nodes_[n.inputs[0]].value;
            Tensor& dq = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 1; i < n.inputs.size(); ++i) {
                const Tensor& k = nodes_[n.inputs[i]].value;
                Tensor& dk = nodes_[n.inputs[i]].grad;
                for (std::size_t r = 0; r < q.rows(); ++r) {
                    const double gv = g.at(r, i - 1);
                    for (std::size_t c = 0; c < q.cols(); ++c) {
                        dq.at(r, c) += gv * k.at(r, c);
                        dk.at(r, c) += gv * q.at(r, c);
                    }
                }
            }
            break;
        }
        case Op::RowwiseMix: {
            const Tensor& w = nodes_[n.inputs[0]].value;
            Tensor& dw = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 1; i < n.inputs.size(); ++i) {
                const Tensor& v = nodes_[n.inputs[i]].value;
                Tensor& dv = nodes_[n.inputs[i]].grad;
                for (std::size_t r = 0; r < v.rows(); ++r) {
                    double dot = 0.0;
                    const double wv = w.at(r, i - 1);
                    for (std::size_t c = 0; c < v.cols(); ++c) {
                        dot += g.at(r, c) * v.at(r, c);
                        dv.at(r, c) += wv * g.at(r, c);
                    }
                    dw.at(r, i - 1) += dot;
                }
            }
            break;
        }
        case Op::SumAll: {
            Tensor& da = nodes_[n.inputs[0]].grad;
            const double gv = g.at(0);
            for (std::size_t i = 0; i < da.size(); ++i) da.at(i) += gv;
            break;
        }
        case Op::CrossEntropy: {
            Tensor& dl = nodes_[n.inputs[0]].grad;
            const double gv = g.at(0) / n.scalar;
            for (std::size_t r = 0; r < dl.rows(); ++r) {
                if (!n.flags[r]) continue;
                for (std::size_t c = 0; c < dl.cols(); ++c) dl.at(r, c) += gv * n.aux.at(r, c);
                dl.at(r, static_cast<std::size_t>(n.ids[r])) -= gv;
            }
            break;
        }
        case Op::Dropout: {
            Tensor& da = nodes_[n.inputs[0]].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (n.flags[i]) da.at(i) += g.at(i) * n.scalar;
            break;
        }
        }
    }

    for (auto& [id, p] : bindings_) {
        if (!p->trainable || !needed[id]) continue;
        const Tensor& g = nodes_[id].grad;
        if (p->grad.size() != p->tensor.size()) p->grad = Tensor(p->tensor.shape());
        for (std::size_t i = 0; i < g.size(); ++i) p->grad.at(i) += g.at(i);
    }
}

} // namespace mst

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mst/model.hpp"
#include "mst/tasks.hpp"

namespace mst {

/// factor * d^(-0.5) * min(step^(-0.5), step * warmup^(-1.5)); peaks exactly
/// at step == warmup. step must be >= 1.
double noam_lr(std::size_t step, std::size_t d, std::size_t warmup, double factor);

/// Adam moments, one slot per parameter in registration order.
struct OptimizerState {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-9;
    std::size_t t = 0;
    std::vector<Tensor> m, v;
};

/// One bias-corrected Adam update from the gradients currently stored in the
/// parameters. Throws on a non-finite gradient, naming the parameter. Does
/// not zero gradients.
void adam_step(std::vector<Parameter*>& params, OptimizerState& state, double lr);

/// Mean over active positions of -log softmax(logits)[label].
double cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     const std::vector<std::uint8_t>& active);

struct TrainConfig {
    double factor = 0.2;
    std::size_t warmup = 4000;
    std::size_t batch = 32;
    std::size_t max_steps = 1000;
    std::size_t eval_interval = 100;
    std::uint64_t seed = 1;
    double dropout = 0.0;

    void validate() const;
};

/// Token-id rows padded to the batch max with PAD; lengths hold the true
/// sizes. Feature sources ride along unpadded.
struct Batch {
    std::vector<std::vector<std::vector<int>>> sources; // [token_source][example][pos]
    std::vector<std::vector<std::size_t>> source_lengths;
    std::vector<std::vector<int>> targets; // padded, no BOS/EOS
    std::vector<std::size_t> target_lengths;
    std::vector<Tensor> features; // empty unless the task has a feature source

    std::size_t size() const { return targets.size(); }
};

/// Length-bucketed, seeded batching: a shuffled epoch order is stably sorted
/// by total source length, cut into batches, and the batch order reshuffled.
std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size, Prng& rng);

struct StepStats {
    double loss = 0.0;
    double lr = 0.0;
    double token_accuracy = 0.0; // teacher-forced, this batch
};

/// Forward + cross-entropy + backward over the batch, one Noam/Adam update,
/// gradients zeroed afterwards. The loss is the token-weighted mean over the
/// batch.
StepStats train_step(Model& model, const Batch& batch, OptimizerState& opt,
                     const TrainConfig& cfg, std::size_t step);

/// One "step<TAB>loss<TAB>lr<TAB>token_accuracy<TAB>seconds" line per eval
/// interval.
using LogSink = std::function<void(const std::string& line)>;

class Trainer {
public:
    Trainer(Model& model, const Dataset& data, TrainConfig cfg);

    /// Runs up to `steps` more optimizer steps; returns stats of the last one.
    StepStats run(std::size_t steps, const LogSink& log = nullptr);
    std::size_t step() const { return step_; }

private:
    void refill();

    Model& model_;
    const Dataset& data_;
    TrainConfig cfg_;
    OptimizerState opt_;
    Prng shuffle_rng_;
    std::vector<Batch> queue_;
    std::size_t queue_pos_ = 0;
    std::size_t step_ = 0;
    double start_time_ = 0.0;
};

} // namespace mst

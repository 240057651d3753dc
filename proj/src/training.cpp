#include "mst/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "mst/errors.hpp"

namespace mst {

double noam_lr(std::size_t step, std::size_t d, std::size_t warmup, double factor) {
    if (step == 0) throw std::invalid_argument("noam_lr: step must be >= 1");
    if (warmup == 0) throw std::invalid_argument("noam_lr: warmup must be >= 1");
    if (factor <= 0.0) throw std::invalid_argument("noam_lr: factor must be positive");
    const double s = static_cast<double>(step);
    const double w = static_cast<double>(warmup);
    return factor / std::sqrt(static_cast<double>(d)) *
           std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

void adam_step(std::vector<Parameter*>& params, OptimizerState& state, double lr) {
    if (state.m.empty()) {
        for (const Parameter* p : params) {
            state.m.emplace_back(p->tensor.shape());
            state.v.emplace_back(p->tensor.shape());
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: optimizer state does not match parameter list");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (!p.trainable) continue;
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < p.tensor.size(); ++j) {
            const double g = p.grad.at(j);
            if (!std::isfinite(g))
                throw std::runtime_error("adam_step: non-finite gradient in parameter '" +
                                         p.name + "'");
            m.at(j) = state.beta1 * m.at(j) + (1.0 - state.beta1) * g;
            v.at(j) = state.beta2 * v.at(j) + (1.0 - state.beta2) * g * g;
            const double m_hat = m.at(j) / bc1;
            const double v_hat = v.at(j) / bc2;
            p.tensor.at(j) -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

double cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     const std::vector<std::uint8_t>& active) {
    Graph g;
    NodeId loss = g.cross_entropy(g.input(logits), labels, active);
    return g.value(loss).at(0);
}

void TrainConfig::validate() const {
    if (warmup == 0) throw ConfigError("train: warmup must be >= 1");
    if (factor <= 0.0) throw ConfigError("train: factor must be positive");
    if (batch == 0) throw ConfigError("train: batch must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("train: dropout must be in [0, 1)");
}

std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size, Prng& rng) {
    const std::size_t n = data.examples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        std::size_t la = 0, lb = 0;
        for (const auto& s : data.examples[a].sources) la += s.size();
        for (const auto& s : data.examples[b].sources) lb += s.size();
        return la < lb;
    });

    const std::size_t n_token_sources = data.examples.front().sources.size();
    std::vector<Batch> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        Batch b;
        b.sources.resize(n_token_sources);
        b.source_lengths.resize(n_token_sources);
        std::size_t tgt_max = 0;
        std::vector<std::size_t> src_max(n_token_sources, 0);
        for (std::size_t i = start; i < end; ++i) {
            const ParallelExample& ex = data.examples[order[i]];
            tgt_max = std::max(tgt_max, ex.target.size());
            for (std::size_t s = 0; s < n_token_sources; ++s)
                src_max[s] = std::max(src_max[s], ex.sources[s].size());
        }
        for (std::size_t i = start; i < end; ++i) {
            const ParallelExample& ex = data.examples[order[i]];
            for (std::size_t s = 0; s < n_token_sources; ++s) {
                std::vector<int> row = ex.sources[s];
                b.source_lengths[s].push_back(row.size());
                row.resize(src_max[s], Vocabulary::PAD);
                b.sources[s].push_back(std::move(row));
            }
            std::vector<int> tgt = ex.target;
            b.target_lengths.push_back(tgt.size());
            tgt.resize(tgt_max, Vocabulary::PAD);
            b.targets.push_back(std::move(tgt));
            if (ex.features) b.features.push_back(*ex.features);
        }
        batches.push_back(std::move(b));
    }
    rng.shuffle(batches);
    return batches;
}

StepStats train_step(Model& model, const Batch& batch, OptimizerState& opt,
                     const TrainConfig& cfg, std::size_t step) {
    if (batch.size() == 0) throw std::invalid_argument("train_step: empty batch");

    std::size_t total_tokens = 0;
    for (std::size_t i = 0; i < batch.size(); ++i)
        total_tokens += batch.target_lengths[i] + 1; // + EOS
    model.zero_grads();

    StepStats stats;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::size_t tlen = batch.target_lengths[i];
        std::vector<int> dec_input;
        dec_input.reserve(tlen + 1);
        dec_input.push_back(Vocabulary::BOS);
        for (std::size_t j = 0; j < tlen; ++j) dec_input.push_back(batch.targets[i][j]);
        std::vector<int> labels(dec_input.begin() + 1, dec_input.end());
        labels.push_back(Vocabulary::EOS);
        std::vector<std::uint8_t> active(labels.size(), 1);

        ExampleSources src;
        for (std::size_t s = 0; s < batch.sources.size(); ++s) {
            const std::size_t slen = batch.source_lengths[s][i];
            src.tokens.emplace_back(batch.sources[s][i].begin(),
                                    batch.sources[s][i].begin() + static_cast<std::ptrdiff_t>(slen));
        }
        if (!batch.features.empty()) src.features = batch.features[i];

        ModelForward fwd = model.forward(src, dec_input, /*training=*/cfg.dropout > 0.0);
        Graph& g = fwd.graph;
        NodeId ce = g.cross_entropy(fwd.logits, labels, active);
        const double example_loss = g.value(ce).at(0);
        // Token-weighted contribution so the batch loss is the per-token mean.
        const double w = static_cast<double>(labels.size()) / static_cast<double>(total_tokens);
        NodeId scaled = g.scale(ce, w);
        g.backward(scaled);
        stats.loss += example_loss * w;

        const Tensor& logits = g.value(fwd.logits);
        for (std::size_t r = 0; r < labels.size(); ++r) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < logits.cols(); ++c)
                if (logits.at(r, c) > logits.at(r, best)) best = c;
            if (static_cast<int>(best) == labels[r]) ++correct;
        }
    }

    stats.lr = noam_lr(step, model.config().d, cfg.warmup, cfg.factor);
    std::vector<Parameter*> params = model.parameters();
    adam_step(params, opt, stats.lr);
    model.zero_grads();
    stats.token_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(total_tokens);
    return stats;
}

Trainer::Trainer(Model& model, const Dataset& data, TrainConfig cfg)
    : model_(model), data_(data), cfg_(cfg), shuffle_rng_(cfg.seed) {
    cfg_.validate();
    if (data_.examples.empty()) throw ConfigError("trainer: empty dataset");
    model_.set_dropout(cfg_.dropout);
    start_time_ = static_cast<double>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::steady_clock::now().time_since_epoch())
                                          .count()) /
                  1000.0;
}

void Trainer::refill() {
    queue_ = make_batches(data_, cfg_.batch, shuffle_rng_);
    queue_pos_ = 0;
}

StepStats Trainer::run(std::size_t steps, const LogSink& log) {
    StepStats last;
    for (std::size_t i = 0; i < steps; ++i) {
        if (queue_pos_ >= queue_.size()) refill();
        ++step_;
        last = train_step(model_, queue_[queue_pos_++], opt_, cfg_, step_);
        if (log && (step_ % cfg_.eval_interval == 0 || i + 1 == steps)) {
            const double now =
                static_cast<double>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                        std::chrono::steady_clock::now().time_since_epoch())
                                        .count()) /
                1000.0;
            char buf[160];
            std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.8g\t%.2f\t%.3f", step_, last.loss,
                          last.lr, last.token_accuracy, now - start_time_);
            log(buf);
        }
    }
    return last;
}

} // namespace mst

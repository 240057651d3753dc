#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mst/model.hpp"

namespace mst {

/// Next-token log-probabilities given the tokens generated so far (BOS is
/// implicit). Lets the search run over a real model or a hand-built toy
/// distribution alike.
using StepScorer = std::function<std::vector<double>(std::span<const int> prefix)>;

/// Length penalty ((5 + L) / 6)^alpha. L counts generated steps including the
/// terminating EOS.
double length_penalty(std::size_t length, double alpha);

struct Hypothesis {
    std::vector<int> tokens; // EOS not included
    double score = 0.0;      // raw log-probability, EOS step included
    bool finished = false;

    std::size_t steps() const { return tokens.size() + (finished ? 1 : 0); }
};

/// score / lp(steps); ranking is by this value, ties broken by lexicographic
/// token-id order.
double normalized_score(const Hypothesis& h, double alpha);
bool rank_before(const Hypothesis& a, const Hypothesis& b, double alpha);

struct DecodeResult {
    std::vector<int> tokens;
    double score = 0.0; // normalized
};

/// Argmax per step (lowest id wins ties) until EOS or max_len.
DecodeResult greedy_core(const StepScorer& scorer, int eos_id, std::size_t max_len);

/// Standard beam expansion on raw log-probs; final ranking normalized by the
/// length penalty. The beam stops once `width` finished hypotheses beat the
/// best normalized score any live hypothesis could still reach, or at
/// max_len. Returns the best finished hypothesis, falling back to the best
/// live one when nothing finished.
DecodeResult beam_core(const StepScorer& scorer, std::size_t vocab_size, int eos_id,
                       std::size_t width, double alpha, std::size_t max_len);

/// Model-backed scorer: full re-forward per step, log-softmax of the last row.
StepScorer model_scorer(const Model& model, const ExampleSources& sources);

DecodeResult greedy_decode(const Model& model, const ExampleSources& sources,
                           std::size_t max_len);
DecodeResult beam_search(const Model& model, const ExampleSources& sources, std::size_t width,
                         double alpha, std::size_t max_len);

/// Attention records plus display labels for a decoded sequence; runs one
/// forward over the final tokens.
struct DecodeTrace {
    std::vector<int> tokens;
    std::vector<std::string> target_labels;               // one per decoded token
    std::vector<std::vector<std::string>> source_labels;  // per source
    std::vector<CrossAttentionRecord> layers;
};
DecodeTrace trace_decode(const Model& model, const ExampleSources& sources,
                         const std::vector<int>& tokens);

} // namespace mst

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "mst/decode.hpp"
#include "mst/tasks.hpp"

namespace mst {

struct DecodeOptions {
    std::size_t width = 1; // 1 selects the greedy path
    double alpha = 1.0;
    std::size_t max_len = 0; // 0: model max_len - 1
    std::size_t threads = 1; // decoding is per-example pure, safe to parallelize
};

struct EvalMetrics {
    double bleu = 0.0;
    double token_accuracy = 0.0;
    double sequence_accuracy = 0.0;
    /// feature_disambiguation only: accuracy at the ambiguous position.
    std::optional<double> amb_accuracy;
};

/// Clean metrics plus, per corrupted source index, the adversarial metrics
/// and the clean-minus-adversarial deltas.
struct EvalReport {
    EvalMetrics clean;
    std::map<std::size_t, EvalMetrics> adversarial;
    std::map<std::size_t, double> token_accuracy_delta;
};

std::vector<std::vector<int>> decode_all(const Model& model,
                                         const std::vector<ParallelExample>& examples,
                                         const DecodeOptions& opt);

EvalMetrics evaluate(const Model& model, const Dataset& data, const DecodeOptions& opt);

/// Replaces the designated source of every example with that of another
/// example, following the given permutation (the dataset itself is untouched).
Dataset corrupt_source(const Dataset& data, std::size_t source_index,
                       const std::vector<std::size_t>& permutation);

/// Evaluates clean and corrupted runs for one source index. The permutation
/// is a seeded derangement over the evaluation set, so every example really
/// receives a different example's source; a dataset of size 1 is an error.
EvalReport adversarial_eval(const Model& model, const Dataset& data, std::size_t corrupt_index,
                            std::uint64_t seed, const DecodeOptions& opt);

/// Same with an explicit permutation (tests use the identity to show the
/// corruption machinery itself is a no-op).
EvalReport adversarial_eval_with_permutation(const Model& model, const Dataset& data,
                                             std::size_t corrupt_index,
                                             const std::vector<std::size_t>& permutation,
                                             const DecodeOptions& opt);

/// Clean metrics plus adversarial metrics for every source index.
EvalReport adversarial_report(const Model& model, const Dataset& data, std::uint64_t seed,
                              const DecodeOptions& opt);

} // namespace mst

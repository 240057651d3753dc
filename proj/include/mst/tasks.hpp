#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mst/model.hpp"
#include "mst/tensor.hpp"

namespace mst {

enum class TaskKind { ComplementaryCopy, FeatureDisambiguation };

TaskKind task_kind_from_string(const std::string& s);
std::string task_kind_to_string(TaskKind k);

/// complementary: source A reveals even-index target tokens, source B the odd
/// ones (hidden positions show the blank token), so reconstruction needs both.
/// redundant: every source is a full copy of the target; combined with
/// per-source noise this builds sources the model can learn to distrust.
enum class CopyVariant { Complementary, Redundant };

struct TaskSpec {
    TaskKind kind = TaskKind::ComplementaryCopy;
    std::size_t vocab = 32;
    std::size_t min_len = 8;
    std::size_t max_len = 12;
    std::size_t n_sources = 2;
    std::size_t examples = 2000;
    std::uint64_t seed = 1;

    // complementary_copy only
    CopyVariant variant = CopyVariant::Complementary;
    std::vector<double> source_noise; // per-source token corruption probability

    // feature_disambiguation only
    std::size_t classes = 4;
    std::size_t feature_dim = 8;
    double feature_noise = 0.0;

    void validate() const;
};

struct ParallelExample {
    std::vector<std::vector<int>> sources; // token-id sequences
    std::optional<Tensor> features;        // [1 x feature_dim]
    std::vector<int> target;
};

struct Dataset {
    TaskSpec spec;
    Vocabulary vocab;
    std::vector<ParallelExample> examples;

    bool has_features() const { return spec.kind == TaskKind::FeatureDisambiguation; }
    /// Token sources plus the feature source when present.
    std::size_t n_sources() const { return spec.n_sources; }
};

/// Deterministic vocabulary for a task spec (reserved ids first).
Vocabulary task_vocabulary(const TaskSpec& spec);

Dataset gen_complementary_copy(const TaskSpec& spec);
Dataset gen_feature_disambiguation(const TaskSpec& spec);
Dataset generate_dataset(const TaskSpec& spec);

/// One example per line: token sources and target tab-separated, tokens
/// space-separated. Feature rows go to a "<path>.feat" sidecar, one row of
/// space-separated decimals per example.
void write_dataset(const Dataset& data, const std::string& path);
Dataset read_dataset(const std::string& path, const Vocabulary& vocab, const TaskSpec& spec);

/// Blank token used by complementary_copy ("_"), id 4.
extern const char* kBlankToken;
/// Ambiguous token used by feature_disambiguation ("AMB"), id 4.
extern const char* kAmbToken;

} // namespace mst

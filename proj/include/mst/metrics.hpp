#pragma once

#include <cstddef>
#include <vector>

namespace mst {

using TokenSeq = std::vector<int>;

/// Corpus BLEU-4, uniform weights, brevity penalty exp(1 - r/c) for c <= r,
/// add-one smoothing on n-gram precisions for n >= 2 when the clipped match
/// count is zero. Returns a percentage.
double corpus_bleu(const std::vector<TokenSeq>& hypotheses,
                   const std::vector<TokenSeq>& references);

/// Exact-match rate over aligned positions up to the shorter length, with
/// length mismatch counted as errors against the longer one. Percentage.
double token_accuracy(const std::vector<TokenSeq>& hypotheses,
                      const std::vector<TokenSeq>& references);

/// Share of examples whose hypothesis equals the reference exactly. Percentage.
double sequence_accuracy(const std::vector<TokenSeq>& hypotheses,
                         const std::vector<TokenSeq>& references);

/// Match rate at one designated position per example (positions[i] indexes
/// into reference i); a too-short hypothesis counts as a miss. Percentage.
double position_accuracy(const std::vector<TokenSeq>& hypotheses,
                         const std::vector<TokenSeq>& references,
                         const std::vector<std::size_t>& positions);

} // namespace mst

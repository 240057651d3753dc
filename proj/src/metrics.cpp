#include "mst/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace mst {

namespace {

void check_pairing(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs) {
    if (hyps.empty()) throw std::invalid_argument("metrics: empty hypothesis set");
    if (hyps.size() != refs.size())
        throw std::invalid_argument("metrics: hypothesis/reference counts differ");
}

std::map<TokenSeq, std::size_t> ngram_counts(const TokenSeq& seq, std::size_t n) {
    std::map<TokenSeq, std::size_t> counts;
    if (seq.size() >= n)
        for (std::size_t i = 0; i + n <= seq.size(); ++i)
            ++counts[TokenSeq(seq.begin() + static_cast<std::ptrdiff_t>(i),
                              seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return counts;
}

} // namespace

double corpus_bleu(const std::vector<TokenSeq>& hypotheses,
                   const std::vector<TokenSeq>& references) {
    check_pairing(hypotheses, references);
    for (const TokenSeq& r : references)
        if (r.empty()) throw std::invalid_argument("corpus_bleu: empty reference");

    std::size_t hyp_len = 0, ref_len = 0;
    std::size_t matched[4] = {0, 0, 0, 0};
    std::size_t total[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const TokenSeq& hyp = hypotheses[i];
        const TokenSeq& ref = references[i];
        hyp_len += hyp.size();
        ref_len += ref.size();
        for (std::size_t n = 1; n <= 4; ++n) {
            auto hc = ngram_counts(hyp, n);
            auto rc = ngram_counts(ref, n);
            for (const auto& [gram, count] : hc) {
                total[n - 1] += count;
                auto it = rc.find(gram);
                if (it != rc.end()) matched[n - 1] += std::min(count, it->second);
            }
        }
    }

    double log_sum = 0.0;
    for (std::size_t n = 0; n < 4; ++n) {
        double p;
        if (matched[n] == 0 && n >= 1) {
            p = 1.0 / static_cast<double>(total[n] + 1); // add-one smoothing
        } else if (total[n] == 0 || matched[n] == 0) {
            return 0.0; // unsmoothed unigram precision of zero
        } else {
            p = static_cast<double>(matched[n]) / static_cast<double>(total[n]);
        }
        log_sum += std::log(p);
    }
    double bleu = std::exp(log_sum / 4.0);
    if (hyp_len <= ref_len && hyp_len > 0)
        bleu *= std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    else if (hyp_len == 0)
        return 0.0;
    return 100.0 * bleu;
}

double token_accuracy(const std::vector<TokenSeq>& hypotheses,
                      const std::vector<TokenSeq>& references) {
    check_pairing(hypotheses, references);
    std::size_t correct = 0, weight = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const TokenSeq& h = hypotheses[i];
        const TokenSeq& r = references[i];
        const std::size_t lo = std::min(h.size(), r.size());
        for (std::size_t j = 0; j < lo; ++j)
            if (h[j] == r[j]) ++correct;
        weight += std::max(h.size(), r.size());
    }
    return weight == 0 ? 100.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(weight);
}

double sequence_accuracy(const std::vector<TokenSeq>& hypotheses,
                         const std::vector<TokenSeq>& references) {
    check_pairing(hypotheses, references);
    std::size_t exact = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i)
        if (hypotheses[i] == references[i]) ++exact;
    return 100.0 * static_cast<double>(exact) / static_cast<double>(hypotheses.size());
}

double position_accuracy(const std::vector<TokenSeq>& hypotheses,
                         const std::vector<TokenSeq>& references,
                         const std::vector<std::size_t>& positions) {
    check_pairing(hypotheses, references);
    if (positions.size() != hypotheses.size())
        throw std::invalid_argument("position_accuracy: position count mismatch");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const std::size_t p = positions[i];
        if (p >= references[i].size())
            throw std::invalid_argument("position_accuracy: position beyond reference");
        if (p < hypotheses[i].size() && hypotheses[i][p] == references[i][p]) ++hit;
    }
    return 100.0 * static_cast<double>(hit) / static_cast<double>(hypotheses.size());
}

} // namespace mst

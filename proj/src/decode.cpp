#include "mst/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mst {

double length_penalty(std::size_t length, double alpha) {
    return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

double normalized_score(const Hypothesis& h, double alpha) {
    return h.score / length_penalty(std::max<std::size_t>(h.steps(), 1), alpha);
}

bool rank_before(const Hypothesis& a, const Hypothesis& b, double alpha) {
    const double na = normalized_score(a, alpha);
    const double nb = normalized_score(b, alpha);
    if (na != nb) return na > nb;
    return a.tokens < b.tokens;
}

DecodeResult greedy_core(const StepScorer& scorer, int eos_id, std::size_t max_len) {
    if (max_len == 0) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
    Hypothesis h;
    for (std::size_t step = 0; step < max_len; ++step) {
        const std::vector<double> logp = scorer(h.tokens);
        std::size_t best = 0;
        for (std::size_t i = 1; i < logp.size(); ++i)
            if (logp[i] > logp[best]) best = i;
        h.score += logp[best];
        if (static_cast<int>(best) == eos_id) {
            h.finished = true;
            break;
        }
        h.tokens.push_back(static_cast<int>(best));
    }
    return DecodeResult{h.tokens, normalized_score(h, 0.0)};
}

DecodeResult beam_core(const StepScorer& scorer, std::size_t vocab_size, int eos_id,
                       std::size_t width, double alpha, std::size_t max_len) {
    if (width == 0) throw std::invalid_argument("beam_search: width must be >= 1");
    if (alpha < 0.0) throw std::invalid_argument("beam_search: alpha must be >= 0");
    if (max_len == 0) throw std::invalid_argument("beam_search: max_len must be >= 1");

    std::vector<Hypothesis> live{Hypothesis{}};
    std::vector<Hypothesis> finished;

    for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
        std::vector<Hypothesis> candidates;
        candidates.reserve(live.size() * vocab_size);
        for (const Hypothesis& h : live) {
            const std::vector<double> logp = scorer(h.tokens);
            if (logp.size() != vocab_size)
                throw std::invalid_argument("beam_search: scorer vocab size mismatch");
            for (std::size_t v = 0; v < vocab_size; ++v) {
                Hypothesis next = h;
                next.score += logp[v];
                if (static_cast<int>(v) == eos_id)
                    next.finished = true;
                else
                    next.tokens.push_back(static_cast<int>(v));
                candidates.push_back(std::move(next));
            }
        }
        // Expansion keeps the top `width` by raw score; the length penalty
        // only enters the final ranking.
        std::sort(candidates.begin(), candidates.end(),
                  [](const Hypothesis& a, const Hypothesis& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.tokens < b.tokens;
                  });
        if (candidates.size() > width) candidates.resize(width);

        live.clear();
        for (Hypothesis& h : candidates) {
            if (h.finished)
                finished.push_back(std::move(h));
            else
                live.push_back(std::move(h));
        }

        if (finished.size() >= width) {
            // Raw scores only decrease with extension, so a live hypothesis
            // can never beat s / lp(max_len).
            double best_live_bound = -std::numeric_limits<double>::infinity();
            for (const Hypothesis& h : live)
                best_live_bound =
                    std::max(best_live_bound, h.score / length_penalty(max_len, alpha));
            std::size_t better = 0;
            for (const Hypothesis& h : finished)
                if (normalized_score(h, alpha) > best_live_bound) ++better;
            if (live.empty() || better >= width) break;
        }
    }

    const std::vector<Hypothesis>& pool = finished.empty() ? live : finished;
    if (pool.empty()) throw std::runtime_error("beam_search: no hypotheses");
    const Hypothesis* best = &pool[0];
    for (const Hypothesis& h : pool)
        if (rank_before(h, *best, alpha) && &h != best) best = &h;
    return DecodeResult{best->tokens, normalized_score(*best, alpha)};
}

StepScorer model_scorer(const Model& model, const ExampleSources& sources) {
    return [&model, sources](std::span<const int> prefix) {
        std::vector<int> input;
        input.reserve(prefix.size() + 1);
        input.push_back(Vocabulary::BOS);
        input.insert(input.end(), prefix.begin(), prefix.end());
        ModelForward fwd = model.forward(sources, input);
        const Tensor& logits = fwd.graph.value(fwd.logits);
        const std::size_t last = logits.rows() - 1;
        double mx = logits.at(last, 0);
        for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits.at(last, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols(); ++c) sum += std::exp(logits.at(last, c) - mx);
        const double lse = mx + std::log(sum);
        std::vector<double> logp(logits.cols());
        for (std::size_t c = 0; c < logits.cols(); ++c) logp[c] = logits.at(last, c) - lse;
        return logp;
    };
}

DecodeResult greedy_decode(const Model& model, const ExampleSources& sources,
                           std::size_t max_len) {
    return greedy_core(model_scorer(model, sources), Vocabulary::EOS, max_len);
}

DecodeResult beam_search(const Model& model, const ExampleSources& sources, std::size_t width,
                         double alpha, std::size_t max_len) {
    return beam_core(model_scorer(model, sources), model.vocabulary().size(), Vocabulary::EOS,
                     width, alpha, max_len);
}

DecodeTrace trace_decode(const Model& model, const ExampleSources& sources,
                         const std::vector<int>& tokens) {
    if (tokens.empty()) throw std::invalid_argument("trace_decode: empty decoded sequence");
    std::vector<int> input;
    input.push_back(Vocabulary::BOS);
    input.insert(input.end(), tokens.begin(), tokens.end());
    ModelForward fwd = model.forward(sources, input);

    DecodeTrace trace;
    trace.tokens = tokens;
    trace.target_labels = model.vocabulary().decode(tokens);
    for (std::size_t s = 0; s < model.config().n_sources; ++s)
        trace.source_labels.push_back(model.source_labels(sources, s));
    trace.layers = fwd.records();
    return trace;
}

} // namespace mst

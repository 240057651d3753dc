#include "mst/evaluate.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

#include "mst/metrics.hpp"

namespace mst {

namespace {

ExampleSources to_sources(const ParallelExample& ex) {
    ExampleSources src;
    src.tokens = ex.sources;
    if (ex.features) src.features = *ex.features;
    return src;
}

std::size_t resolve_max_len(const Model& model, const DecodeOptions& opt) {
    if (opt.max_len > 0) return opt.max_len;
    return model.config().max_len - 1; // BOS occupies one decoder position
}

} // namespace

std::vector<std::vector<int>> decode_all(const Model& model,
                                         const std::vector<ParallelExample>& examples,
                                         const DecodeOptions& opt) {
    const std::size_t max_len = resolve_max_len(model, opt);
    std::vector<std::vector<int>> hyps(examples.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const ExampleSources src = to_sources(examples[i]);
            hyps[i] = opt.width <= 1
                          ? greedy_decode(model, src, max_len).tokens
                          : beam_search(model, src, opt.width, opt.alpha, max_len).tokens;
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(opt.threads, examples.size()));
    if (threads == 1) {
        work(0, examples.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (examples.size() + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t b = t * chunk;
            const std::size_t e = std::min(examples.size(), b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }
    return hyps;
}

namespace {

EvalMetrics metrics_for(const Dataset& data, const std::vector<std::vector<int>>& hyps) {
    EvalMetrics m;
    std::vector<std::vector<int>> refs;
    refs.reserve(data.examples.size());
    for (const auto& ex : data.examples) refs.push_back(ex.target);
    m.bleu = corpus_bleu(hyps, refs);
    m.token_accuracy = token_accuracy(hyps, refs);
    m.sequence_accuracy = sequence_accuracy(hyps, refs);
    if (data.spec.kind == TaskKind::FeatureDisambiguation) {
        // The ambiguous position is where the reference carries its class
        // token (ids 5 .. 5+classes-1); reading it from the reference keeps
        // the metric well-defined under source corruption.
        const int class_first = 5;
        const int class_last = 5 + static_cast<int>(data.spec.classes);
        std::vector<std::size_t> amb_pos;
        amb_pos.reserve(data.examples.size());
        for (const auto& ex : data.examples) {
            auto it = std::find_if(ex.target.begin(), ex.target.end(), [&](int t) {
                return t >= class_first && t < class_last;
            });
            if (it == ex.target.end())
                throw std::runtime_error("feature_disambiguation example without a class token");
            amb_pos.push_back(static_cast<std::size_t>(it - ex.target.begin()));
        }
        m.amb_accuracy = position_accuracy(hyps, refs, amb_pos);
    }
    return m;
}

} // namespace

EvalMetrics evaluate(const Model& model, const Dataset& data, const DecodeOptions& opt) {
    return metrics_for(data, decode_all(model, data.examples, opt));
}

Dataset corrupt_source(const Dataset& data, std::size_t source_index,
                       const std::vector<std::size_t>& permutation) {
    if (source_index >= data.n_sources())
        throw std::invalid_argument("corrupt_source: source index out of range");
    if (permutation.size() != data.examples.size())
        throw std::invalid_argument("corrupt_source: permutation size mismatch");
    Dataset out = data;
    const bool feature_source =
        data.has_features() && source_index + 1 == data.n_sources();
    for (std::size_t i = 0; i < out.examples.size(); ++i) {
        const ParallelExample& donor = data.examples[permutation[i]];
        if (feature_source)
            out.examples[i].features = donor.features;
        else
            out.examples[i].sources[source_index] = donor.sources[source_index];
    }
    return out;
}

EvalReport adversarial_eval_with_permutation(const Model& model, const Dataset& data,
                                             std::size_t corrupt_index,
                                             const std::vector<std::size_t>& permutation,
                                             const DecodeOptions& opt) {
    EvalReport report;
    report.clean = evaluate(model, data, opt);
    const Dataset corrupted = corrupt_source(data, corrupt_index, permutation);
    EvalMetrics adv = metrics_for(corrupted, decode_all(model, corrupted.examples, opt));
    report.token_accuracy_delta[corrupt_index] = report.clean.token_accuracy - adv.token_accuracy;
    report.adversarial[corrupt_index] = std::move(adv);
    return report;
}

EvalReport adversarial_eval(const Model& model, const Dataset& data, std::size_t corrupt_index,
                            std::uint64_t seed, const DecodeOptions& opt) {
    if (data.examples.size() < 2)
        throw std::invalid_argument(
            "adversarial_eval: need at least 2 examples (no derangement exists)");
    Prng rng(seed);
    return adversarial_eval_with_permutation(model, data, corrupt_index,
                                             rng.derangement(data.examples.size()), opt);
}

EvalReport adversarial_report(const Model& model, const Dataset& data, std::uint64_t seed,
                              const DecodeOptions& opt) {
    if (data.examples.size() < 2)
        throw std::invalid_argument(
            "adversarial_eval: need at least 2 examples (no derangement exists)");
    EvalReport report;
    report.clean = evaluate(model, data, opt);
    for (std::size_t s = 0; s < data.n_sources(); ++s) {
        Prng rng(seed + s);
        const Dataset corrupted =
            corrupt_source(data, s, rng.derangement(data.examples.size()));
        EvalMetrics adv = metrics_for(corrupted, decode_all(model, corrupted.examples, opt));
        report.token_accuracy_delta[s] = report.clean.token_accuracy - adv.token_accuracy;
        report.adversarial[s] = std::move(adv);
    }
    return report;
}

} // namespace mst

#include "mst/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "mst/config.hpp"
#include "mst/errors.hpp"
#include "mst/evaluate.hpp"
#include "mst/tasks.hpp"
#include "mst/training.hpp"
#include "mst/viz.hpp"

namespace mst {

namespace {

const char* kUsage =
    "usage: mst <subcommand> [--config FILE] [--set key=value ...]\n"
    "subcommands:\n"
    "  gen-data          generate a synthetic dataset (task.*, data.out)\n"
    "  train             train a model (task.*/data.file, model.*, train.*, io.out)\n"
    "  translate         decode a dataset (io.model, data.file, decode.*, io.out)\n"
    "  eval              decode and score a dataset (io.model, data.file, decode.*)\n"
    "  eval-adversarial  adversarial source-corruption report (eval.*)\n"
    "  viz               export attention heatmaps (viz.*, io.out)\n";

TaskSpec task_spec_from(const AppConfig& cfg) {
    TaskSpec spec;
    spec.kind = task_kind_from_string(cfg.get("task.kind", "complementary_copy"));
    spec.vocab = cfg.get_size("task.vocab", 32);
    spec.min_len = cfg.get_size("task.min_len", 8);
    spec.max_len = cfg.get_size("task.max_len", 12);
    spec.n_sources = cfg.get_size("task.sources", 2);
    spec.examples = cfg.get_size("task.examples", 2000);
    spec.seed = cfg.get_u64("task.seed", 1);
    const std::string variant = cfg.get("task.variant", "complementary");
    if (variant == "complementary")
        spec.variant = CopyVariant::Complementary;
    else if (variant == "redundant")
        spec.variant = CopyVariant::Redundant;
    else
        throw UsageError("task.variant must be complementary|redundant");
    spec.source_noise = cfg.get_doubles("task.source_noise");
    spec.classes = cfg.get_size("task.classes", 4);
    spec.feature_dim = cfg.get_size("task.feature_dim", 8);
    spec.feature_noise = cfg.get_double("task.feature_noise", 0.0);
    return spec;
}

ModelConfig model_config_from(const AppConfig& cfg, const TaskSpec& spec, std::size_t vocab) {
    ModelConfig mc;
    mc.d = cfg.get_size("model.dim", 64);
    mc.heads = cfg.get_size("model.heads", 4);
    mc.ff = cfg.get_size("model.ff", 128);
    mc.enc_layers = cfg.get_size("model.enc_layers", 2);
    mc.dec_layers = cfg.get_size("model.dec_layers", 2);
    mc.n_sources = cfg.get_size("model.sources", spec.n_sources);
    mc.strategy = strategy_from_string(cfg.get("model.strategy", "serial"));
    mc.max_len = cfg.get_size("model.max_len", spec.max_len + 4);
    mc.dropout = cfg.get_double("model.dropout", 0.1);
    mc.seed = cfg.get_u64("model.seed", 1);
    const bool feature_task = spec.kind == TaskKind::FeatureDisambiguation;
    // The feature pseudo-encoder is always the last source; a single-source
    // ablation of a feature task keeps only the text.
    mc.feature_dim = (feature_task && mc.n_sources >= 2)
                         ? cfg.get_size("model.feature_dim", spec.feature_dim)
                         : cfg.get_size("model.feature_dim", 0);
    mc.shared_embeddings = cfg.get_bool("model.shared_embeddings", false);
    mc.vocab_size = vocab;
    return mc;
}

TrainConfig train_config_from(const AppConfig& cfg) {
    TrainConfig tc;
    tc.factor = cfg.get_double("train.factor", 0.2);
    tc.warmup = cfg.get_size("train.warmup", 4000);
    tc.batch = cfg.get_size("train.batch", 32);
    tc.max_steps = cfg.get_size("train.steps", 1000);
    tc.eval_interval = cfg.get_size("train.eval_interval", 100);
    tc.seed = cfg.get_u64("train.seed", 1);
    tc.dropout = cfg.get_double("train.dropout", cfg.get_double("model.dropout", 0.1));
    return tc;
}

DecodeOptions decode_opts_from(const AppConfig& cfg) {
    DecodeOptions d;
    d.width = cfg.get_size("decode.width", 10);
    d.alpha = cfg.get_double("decode.alpha", 1.0);
    d.max_len = cfg.get_size("decode.max_len", 0);
    d.threads = cfg.get_size("decode.threads", 1);
    return d;
}

/// First model.n_sources token/feature sources of every example.
Dataset take_sources(const Dataset& data, const Model& model) {
    const std::size_t want = model.config().n_sources;
    if (want > data.n_sources())
        throw ConfigError("model expects " + std::to_string(want) + " sources but the dataset has " +
                          std::to_string(data.n_sources()));
    Dataset out = data;
    const std::size_t token_keep = model.config().token_sources();
    for (ParallelExample& ex : out.examples) {
        if (ex.sources.size() > token_keep) ex.sources.resize(token_keep);
        if (model.config().feature_dim == 0) ex.features.reset();
    }
    out.spec.n_sources = want;
    return out;
}

std::string require(const AppConfig& cfg, const std::string& key) {
    if (!cfg.has(key)) throw UsageError("missing required config key '" + key + "'");
    return cfg.get(key, "");
}

void print_resolved(std::ostream& out, const AppConfig& cfg, std::uint64_t seed) {
    for (const std::string& line : cfg.resolved_lines()) out << line << '\n';
    out << "seed=" << seed << '\n';
}

TaskSpec spec_for_model(const AppConfig& cfg, const Model& model) {
    TaskSpec spec = task_spec_from(cfg);
    if (!cfg.has("task.kind"))
        spec.kind = model.config().feature_dim > 0 ? TaskKind::FeatureDisambiguation
                                                   : TaskKind::ComplementaryCopy;
    if (model.config().feature_dim > 0) spec.feature_dim = model.config().feature_dim;
    return spec;
}

int cmd_gen_data(const AppConfig& cfg, std::ostream& out) {
    const TaskSpec spec = task_spec_from(cfg);
    print_resolved(out, cfg, spec.seed);
    const std::string path = require(cfg, "data.out");
    Dataset data = generate_dataset(spec);
    write_dataset(data, path);
    out << "wrote " << data.examples.size() << " examples to " << path << '\n';
    return 0;
}

int cmd_train(const AppConfig& cfg, std::ostream& out) {
    const TaskSpec spec = task_spec_from(cfg);
    const TrainConfig tc = train_config_from(cfg);
    print_resolved(out, cfg, tc.seed);

    Dataset data = cfg.has("data.file")
                       ? read_dataset(cfg.get("data.file", ""), task_vocabulary(spec), spec)
                       : generate_dataset(spec);
    ModelConfig mc = model_config_from(cfg, spec, data.vocab.size());
    Model model(mc, data.vocab);
    Dataset train_data = take_sources(data, model);

    const std::string out_prefix = require(cfg, "io.out");
    std::ofstream log_file(out_prefix + ".log", std::ios::trunc);
    if (!log_file) throw std::runtime_error("cannot open '" + out_prefix + ".log'");
    Trainer trainer(model, train_data, tc);
    trainer.run(tc.max_steps, [&](const std::string& line) {
        out << line << '\n';
        log_file << line << '\n';
    });
    model.save(out_prefix + ".ckpt");
    out << "saved checkpoint to " << out_prefix << ".ckpt" << '\n';
    return 0;
}

int cmd_translate(const AppConfig& cfg, std::ostream& out) {
    Model model = Model::load(require(cfg, "io.model"));
    print_resolved(out, cfg, model.config().seed);
    const TaskSpec spec = spec_for_model(cfg, model);
    Dataset data = take_sources(
        read_dataset(require(cfg, "data.file"), model.vocabulary(), spec), model);
    const DecodeOptions opt = decode_opts_from(cfg);
    const auto hyps = decode_all(model, data.examples, opt);

    const std::string path = require(cfg, "io.out");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (const auto& hyp : hyps) {
        const auto tokens = model.vocabulary().decode(hyp);
        for (std::size_t i = 0; i < tokens.size(); ++i) f << (i ? " " : "") << tokens[i];
        f << '\n';
    }
    out << "wrote " << hyps.size() << " hypotheses to " << path << '\n';
    return 0;
}

void print_metrics(std::ostream& out, const std::string& prefix, const EvalMetrics& m) {
    out << prefix << "bleu=" << m.bleu << " token_accuracy=" << m.token_accuracy
        << " sequence_accuracy=" << m.sequence_accuracy;
    if (m.amb_accuracy) out << " amb_accuracy=" << *m.amb_accuracy;
    out << '\n';
}

int cmd_eval(const AppConfig& cfg, std::ostream& out) {
    Model model = Model::load(require(cfg, "io.model"));
    print_resolved(out, cfg, model.config().seed);
    const TaskSpec spec = spec_for_model(cfg, model);
    Dataset data = take_sources(
        read_dataset(require(cfg, "data.file"), model.vocabulary(), spec), model);
    print_metrics(out, "", evaluate(model, data, decode_opts_from(cfg)));
    return 0;
}

int cmd_eval_adversarial(const AppConfig& cfg, std::ostream& out) {
    Model model = Model::load(require(cfg, "io.model"));
    const std::uint64_t seed = cfg.get_u64("eval.seed", 1);
    print_resolved(out, cfg, seed);
    const TaskSpec spec = spec_for_model(cfg, model);
    Dataset data = take_sources(
        read_dataset(require(cfg, "data.file"), model.vocabulary(), spec), model);
    const DecodeOptions opt = decode_opts_from(cfg);

    EvalReport report;
    const std::string which = cfg.get("eval.corrupt_source", "all");
    if (which == "all") {
        report = adversarial_report(model, data, seed, opt);
    } else {
        report = adversarial_eval(model, data, std::stoul(which), seed, opt);
    }
    print_metrics(out, "clean: ", report.clean);
    for (const auto& [idx, m] : report.adversarial) {
        print_metrics(out, "corrupt src" + std::to_string(idx) + ": ", m);
        out << "delta src" << idx << ": token_accuracy " << report.token_accuracy_delta.at(idx)
            << '\n';
    }
    return 0;
}

int cmd_viz(const AppConfig& cfg, std::ostream& out) {
    Model model = Model::load(require(cfg, "io.model"));
    print_resolved(out, cfg, model.config().seed);
    const TaskSpec spec = spec_for_model(cfg, model);
    Dataset data = take_sources(
        read_dataset(require(cfg, "data.file"), model.vocabulary(), spec), model);
    const std::size_t index = cfg.get_size("viz.example", 0);
    if (index >= data.examples.size())
        throw std::runtime_error("viz.example " + std::to_string(index) +
                                 " out of range (dataset has " +
                                 std::to_string(data.examples.size()) + " examples)");

    const DecodeOptions opt = decode_opts_from(cfg);
    ExampleSources src;
    src.tokens = data.examples[index].sources;
    if (data.examples[index].features) src.features = *data.examples[index].features;
    const std::size_t max_len = opt.max_len > 0 ? opt.max_len : model.config().max_len - 1;
    DecodeResult dec = opt.width <= 1 ? greedy_decode(model, src, max_len)
                                      : beam_search(model, src, opt.width, opt.alpha, max_len);
    if (dec.tokens.empty()) throw std::runtime_error("viz: decoded an empty sequence");
    DecodeTrace trace = trace_decode(model, src, dec.tokens);

    HeatmapSpec spec_hm;
    spec_hm.layer = cfg.get_size("viz.layer", model.config().dec_layers - 1);
    const std::string head = cfg.get("viz.head", "mean");
    spec_hm.head = head == "mean" ? -1 : std::stoi(head);
    const std::string encoder = cfg.get("viz.encoder", "all");
    spec_hm.encoder = encoder == "all" ? -1 : std::stoi(encoder);
    const std::string format = cfg.get("viz.format", "both");

    const std::string prefix = require(cfg, "io.out");
    const HeatmapMatrix m = heatmap_matrix(trace, spec_hm);
    if (format == "csv" || format == "both") {
        export_attention_csv(m, prefix + ".csv");
        out << "wrote " << prefix << ".csv" << '\n';
    }
    if (format == "pgm" || format == "both") {
        export_heatmap_pgm(m, prefix + ".pgm");
        out << "wrote " << prefix << ".pgm" << '\n';
    }
    if (format != "csv" && format != "pgm" && format != "both")
        throw UsageError("viz.format must be csv|pgm|both");

    if (model.config().strategy == Strategy::Hierarchical) {
        const HeatmapMatrix ctx = context_matrix(trace, spec_hm);
        if (format == "csv" || format == "both") {
            export_attention_csv(ctx, prefix + ".ctx.csv");
            out << "wrote " << prefix << ".ctx.csv" << '\n';
        }
        if (format == "pgm" || format == "both") {
            export_heatmap_pgm(ctx, prefix + ".ctx.pgm");
            out << "wrote " << prefix << ".ctx.pgm" << '\n';
        }
    }
    return 0;
}

} // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        if (args.empty() || args[0] == "--help" || args[0] == "-h") {
            out << kUsage;
            return args.empty() ? 1 : 0;
        }
        const std::string sub = args[0];
        AppConfig cfg;
        for (std::size_t i = 1; i < args.size(); ++i) {
            if (args[i] == "--config") {
                if (i + 1 >= args.size()) throw UsageError("--config expects a file path");
                cfg.load_file(args[++i]);
            } else if (args[i] == "--set") {
                if (i + 1 >= args.size()) throw UsageError("--set expects key=value");
                cfg.set(args[++i]);
            } else if (args[i] == "--help" || args[i] == "-h") {
                out << kUsage;
                return 0;
            } else {
                throw UsageError("unknown argument '" + args[i] + "'");
            }
        }

        if (sub == "gen-data") return cmd_gen_data(cfg, out);
        if (sub == "train") return cmd_train(cfg, out);
        if (sub == "translate") return cmd_translate(cfg, out);
        if (sub == "eval") return cmd_eval(cfg, out);
        if (sub == "eval-adversarial") return cmd_eval_adversarial(cfg, out);
        if (sub == "viz") return cmd_viz(cfg, out);
        throw UsageError("unknown subcommand '" + sub + "'\n" + kUsage);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace mst

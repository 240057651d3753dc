#include "mst/model.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mst/checkpoint.hpp"
#include "mst/errors.hpp"

namespace mst {

// ---- Vocabulary ----

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    static const char* reserved[4] = {"<pad>", "<bos>", "<eos>", "<unk>"};
    if (tokens_.size() < 4) throw ConfigError("vocabulary needs at least the 4 reserved tokens");
    for (int i = 0; i < 4; ++i)
        if (tokens_[static_cast<std::size_t>(i)] != reserved[i])
            throw ConfigError("vocabulary slot " + std::to_string(i) + " must be " +
                              reserved[i]);
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        const std::string& t = tokens_[i];
        if (t.empty() || t.find(' ') != std::string::npos || t.find('\n') != std::string::npos ||
            t.find('\t') != std::string::npos)
            throw ConfigError("vocabulary token '" + t + "' contains whitespace");
        if (!index_.emplace(t, static_cast<int>(i)).second)
            throw ConfigError("duplicate vocabulary token '" + t + "'");
    }
}

Vocabulary Vocabulary::with_reserved(std::vector<std::string> content) {
    std::vector<std::string> all = {"<pad>", "<bos>", "<eos>", "<unk>"};
    for (auto& t : content) all.push_back(std::move(t));
    return Vocabulary(std::move(all));
}

int Vocabulary::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? UNK : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
        throw std::invalid_argument("vocabulary id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int i : ids) out.push_back(token(i));
    return out;
}

// ---- Config ----

void ModelConfig::validate() const {
    if (d == 0 || heads == 0 || d % heads != 0)
        throw ConfigError("model dim " + std::to_string(d) + " must be a positive multiple of " +
                          std::to_string(heads) + " heads");
    if (d % 2 != 0) throw ConfigError("model dim must be even for sinusoidal positions");
    if (ff == 0 || enc_layers == 0 || dec_layers == 0 || n_sources == 0 || max_len == 0)
        throw ConfigError("model counts must all be >= 1");
    if (vocab_size < 5) throw ConfigError("vocabulary too small (needs reserved ids + content)");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    if (feature_dim > 0 && n_sources < 1)
        throw ConfigError("feature source configured but n_sources is zero");
}

Tensor sinusoidal_positions(std::size_t max_len, std::size_t d) {
    if (d % 2 != 0) throw ConfigError("sinusoidal positions require an even dimension");
    Tensor pe = Tensor::zeros(max_len, d);
    for (std::size_t pos = 0; pos < max_len; ++pos) {
        for (std::size_t i = 0; i < d / 2; ++i) {
            const double rate =
                std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
            const double angle = static_cast<double>(pos) / rate;
            pe.at(pos, 2 * i) = std::sin(angle);
            pe.at(pos, 2 * i + 1) = std::cos(angle);
        }
    }
    return pe;
}

// ---- Parameter construction ----

Parameter* Model::add_param(const std::string& name, Tensor t) {
    params_.emplace_back(name, std::move(t));
    Parameter* p = &params_.back();
    if (!by_name_.emplace(name, p).second)
        throw ConfigError("duplicate parameter name '" + name + "'");
    return p;
}

Tensor Model::init_matrix(std::size_t rows, std::size_t cols) {
    Tensor t = Tensor::zeros(rows, cols);
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = dropout_rng_.uniform(-bound, bound);
    return t;
}

Model::MhaHandles Model::make_mha(const std::string& prefix) {
    MhaHandles h;
    const std::size_t dh = cfg_.head_dim();
    for (std::size_t i = 0; i < cfg_.heads; ++i) {
        const std::string head = ".head" + std::to_string(i);
        h.wq.push_back(add_param(prefix + ".wq" + head, init_matrix(cfg_.d, dh)));
        h.wk.push_back(add_param(prefix + ".wk" + head, init_matrix(cfg_.d, dh)));
        h.wv.push_back(add_param(prefix + ".wv" + head, init_matrix(cfg_.d, dh)));
        h.wo.push_back(add_param(prefix + ".wo" + head, init_matrix(dh, cfg_.d)));
    }
    return h;
}

Model::LnHandles Model::make_ln(const std::string& prefix) {
    LnHandles h;
    h.gamma = add_param(prefix + ".gamma", Tensor::full({cfg_.d}, 1.0));
    h.beta = add_param(prefix + ".beta", Tensor::zeros(cfg_.d));
    return h;
}

Model::FfnHandles Model::make_ffn(const std::string& prefix) {
    FfnHandles h;
    h.w1 = add_param(prefix + ".w1", init_matrix(cfg_.d, cfg_.ff));
    h.b1 = add_param(prefix + ".b1", Tensor::zeros(cfg_.ff));
    h.w2 = add_param(prefix + ".w2", init_matrix(cfg_.ff, cfg_.d));
    h.b2 = add_param(prefix + ".b2", Tensor::zeros(cfg_.d));
    return h;
}

void Model::build_parameters() {
    // Decoder embedding first: it is the tied output projection.
    {
        Tensor e = Tensor::zeros(cfg_.vocab_size, cfg_.d);
        const double std = 1.0 / std::sqrt(static_cast<double>(cfg_.d));
        for (std::size_t i = 0; i < e.size(); ++i) e.at(i) = dropout_rng_.normal(0.0, std);
        dec_embed_ = add_param("dec.embed", std::move(e));
    }

    const bool has_feature = cfg_.feature_dim > 0;
    for (std::size_t s = 0; s < cfg_.n_sources; ++s) {
        EncoderHandles enc;
        const std::string prefix = "enc" + std::to_string(s);
        const bool is_feature = has_feature && s + 1 == cfg_.n_sources;
        if (is_feature) {
            enc.feature_w = add_param(prefix + ".feat.w", init_matrix(cfg_.feature_dim, cfg_.d));
        } else {
            if (cfg_.shared_embeddings) {
                enc.embed = dec_embed_;
            } else {
                Tensor e = Tensor::zeros(cfg_.vocab_size, cfg_.d);
                const double std = 1.0 / std::sqrt(static_cast<double>(cfg_.d));
                for (std::size_t i = 0; i < e.size(); ++i)
                    e.at(i) = dropout_rng_.normal(0.0, std);
                enc.embed = add_param(prefix + ".embed", std::move(e));
            }
            for (std::size_t l = 0; l < cfg_.enc_layers; ++l) {
                const std::string lp = prefix + ".layer" + std::to_string(l);
                EncLayer layer;
                layer.self = make_mha(lp + ".self");
                layer.ln_self = make_ln(lp + ".ln_self");
                layer.ffn = make_ffn(lp + ".ffn");
                layer.ln_ffn = make_ln(lp + ".ln_ffn");
                enc.layers.push_back(std::move(layer));
            }
        }
        encoders_.push_back(std::move(enc));
    }

    for (std::size_t l = 0; l < cfg_.dec_layers; ++l) {
        const std::string lp = "dec.layer" + std::to_string(l);
        DecLayer layer;
        layer.self = make_mha(lp + ".self");
        layer.ln_self = make_ln(lp + ".ln_self");
        switch (cfg_.strategy) {
        case Strategy::Serial:
            for (std::size_t e = 0; e < cfg_.n_sources; ++e) {
                layer.cross.enc_attn.push_back(make_mha(lp + ".cross" + std::to_string(e)));
                layer.cross.ln.push_back(make_ln(lp + ".cross" + std::to_string(e) + ".ln"));
            }
            break;
        case Strategy::Parallel:
            for (std::size_t e = 0; e < cfg_.n_sources; ++e)
                layer.cross.enc_attn.push_back(make_mha(lp + ".cross" + std::to_string(e)));
            layer.cross.ln.push_back(make_ln(lp + ".cross.ln"));
            break;
        case Strategy::Flat:
            layer.cross.enc_attn.push_back(make_mha(lp + ".cross"));
            layer.cross.ln.push_back(make_ln(lp + ".cross.ln"));
            break;
        case Strategy::Hierarchical:
            for (std::size_t e = 0; e < cfg_.n_sources; ++e)
                layer.cross.enc_attn.push_back(make_mha(lp + ".cross" + std::to_string(e)));
            layer.cross.outer = make_mha(lp + ".ctx");
            layer.cross.ln.push_back(make_ln(lp + ".cross.ln"));
            break;
        }
        layer.ffn = make_ffn(lp + ".ffn");
        layer.ln_ffn = make_ln(lp + ".ln_ffn");
        dec_layers_.push_back(std::move(layer));
    }
}

Model::Model(ModelConfig cfg, Vocabulary vocab)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)), dropout_rng_(cfg_.seed) {
    if (cfg_.vocab_size == 0) cfg_.vocab_size = vocab_.size();
    if (cfg_.vocab_size != vocab_.size())
        throw ConfigError("config vocab_size " + std::to_string(cfg_.vocab_size) +
                          " does not match vocabulary of " + std::to_string(vocab_.size()));
    cfg_.validate();
    build_parameters();
    positions_ = sinusoidal_positions(cfg_.max_len, cfg_.d);
}

void Model::set_dropout(double rate) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    cfg_.dropout = rate;
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (Parameter& p : params_) out.push_back(&p);
    return out;
}

std::vector<const Parameter*> Model::parameters() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const Parameter& p : params_) out.push_back(&p);
    return out;
}

Parameter* Model::find_parameter(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

void Model::zero_grads() {
    for (Parameter& p : params_) p.zero_grad();
}

// ---- Forward passes ----

MhaNodes Model::bind(Graph& g, const MhaHandles& h) const {
    MhaNodes n;
    for (std::size_t i = 0; i < h.wq.size(); ++i) {
        n.wq.push_back(g.param(*h.wq[i]));
        n.wk.push_back(g.param(*h.wk[i]));
        n.wv.push_back(g.param(*h.wv[i]));
        n.wo.push_back(g.param(*h.wo[i]));
    }
    return n;
}

LnNodes Model::bind(Graph& g, const LnHandles& h) const {
    return LnNodes{g.param(*h.gamma), g.param(*h.beta)};
}

namespace {

NodeId ffn_graph(Graph& g, NodeId x, NodeId w1, NodeId b1, NodeId w2, NodeId b2) {
    return g.add_bias(g.matmul(g.relu(g.add_bias(g.matmul(x, w1), b1)), w2), b2);
}

NodeId maybe_dropout(Graph& g, NodeId x, const DropoutCtx& d) {
    if (d.rate > 0.0 && d.rng) return g.dropout(x, d.rate, *d.rng);
    return x;
}

} // namespace

NodeId Model::encode_graph(Graph& g, const std::vector<int>& tokens, std::size_t source_index,
                           const DropoutCtx& drop) const {
    if (tokens.empty()) throw std::invalid_argument("encode_sequence: empty input");
    if (tokens.size() > cfg_.max_len)
        throw std::invalid_argument("encode_sequence: input length " +
                                    std::to_string(tokens.size()) + " exceeds max_len " +
                                    std::to_string(cfg_.max_len));
    for (int id : tokens)
        if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size)
            throw std::invalid_argument("encode_sequence: unknown token id " + std::to_string(id));
    const EncoderHandles& enc = encoders_.at(source_index);
    if (!enc.embed) throw ConfigError("source " + std::to_string(source_index) +
                                      " is not a token encoder");

    NodeId table = g.param(*enc.embed);
    NodeId x = g.scale(g.embed(table, tokens), std::sqrt(static_cast<double>(cfg_.d)));
    Tensor pos = Tensor::zeros(tokens.size(), cfg_.d);
    for (std::size_t r = 0; r < tokens.size(); ++r)
        for (std::size_t c = 0; c < cfg_.d; ++c) pos.at(r, c) = positions_.at(r, c);
    x = g.add(x, g.input(std::move(pos)));
    x = maybe_dropout(g, x, drop);

    for (const EncLayer& layer : enc.layers) {
        MhaNodes self = bind(g, layer.self);
        NodeId f = multi_head_attention_graph(g, self, x, x, x, nullptr);
        LnNodes ln1 = bind(g, layer.ln_self);
        x = g.layer_norm(g.add(x, maybe_dropout(g, f, drop)), ln1.gamma, ln1.beta, kLnEps);
        NodeId ff = ffn_graph(g, x, g.param(*layer.ffn.w1), g.param(*layer.ffn.b1),
                              g.param(*layer.ffn.w2), g.param(*layer.ffn.b2));
        LnNodes ln2 = bind(g, layer.ln_ffn);
        x = g.layer_norm(g.add(x, maybe_dropout(g, ff, drop)), ln2.gamma, ln2.beta, kLnEps);
    }
    return x;
}

NodeId Model::encode_features_graph(Graph& g, const Tensor& features) const {
    const EncoderHandles& enc = encoders_.back();
    if (!enc.feature_w) throw ConfigError("model has no feature source");
    if (features.rank() != 2 || features.cols() != cfg_.feature_dim)
        throw std::invalid_argument("encode_features: expected [k x " +
                                    std::to_string(cfg_.feature_dim) + "], got " +
                                    features.shape_str());
    return g.matmul(g.input(features), g.param(*enc.feature_w));
}

Tensor Model::encode_sequence(const std::vector<int>& tokens, std::size_t source_index) const {
    Graph g;
    NodeId out = encode_graph(g, tokens, source_index, {});
    return g.value(out);
}

Tensor Model::encode_features(const Tensor& features) const {
    Graph g;
    NodeId out = encode_features_graph(g, features);
    return g.value(out);
}

ModelForward Model::forward_impl(const ExampleSources& sources,
                                 const std::vector<int>& decoder_input, bool training) const {
    if (decoder_input.empty())
        throw std::invalid_argument("decoder_forward: empty target");
    if (decoder_input[0] != Vocabulary::BOS)
        throw std::invalid_argument("decoder_forward: target must be BOS-prefixed");
    if (decoder_input.size() > cfg_.max_len)
        throw std::invalid_argument("decoder_forward: target length exceeds max_len");
    const bool has_feature = cfg_.feature_dim > 0;
    if (sources.tokens.size() != cfg_.token_sources())
        throw std::invalid_argument("decoder_forward: expected " +
                                    std::to_string(cfg_.token_sources()) +
                                    " token sources, got " + std::to_string(sources.tokens.size()));
    if (has_feature && !sources.features)
        throw std::invalid_argument("decoder_forward: feature source missing");

    ModelForward fwd;
    Graph& g = fwd.graph;
    DropoutCtx drop;
    if (training && cfg_.dropout > 0.0) {
        drop.rate = cfg_.dropout;
        drop.rng = &dropout_rng_;
    }

    std::vector<EncRef> bundle;
    for (std::size_t s = 0; s < cfg_.token_sources(); ++s) {
        NodeId states = encode_graph(g, sources.tokens[s], s, drop);
        fwd.encoder_states.push_back(states);
        fwd.masks.emplace_back(1, g.value(states).rows(), true);
        bundle.push_back(EncRef{"src" + std::to_string(s), states, &fwd.masks.back()});
    }
    if (has_feature) {
        NodeId states = encode_features_graph(g, *sources.features);
        fwd.encoder_states.push_back(states);
        fwd.masks.emplace_back(1, g.value(states).rows(), true);
        bundle.push_back(
            EncRef{"src" + std::to_string(cfg_.n_sources - 1), states, &fwd.masks.back()});
    }

    const std::size_t len = decoder_input.size();
    NodeId table = g.param(*dec_embed_);
    NodeId x = g.scale(g.embed(table, decoder_input), std::sqrt(static_cast<double>(cfg_.d)));
    Tensor pos = Tensor::zeros(len, cfg_.d);
    for (std::size_t r = 0; r < len; ++r)
        for (std::size_t c = 0; c < cfg_.d; ++c) pos.at(r, c) = positions_.at(r, c);
    x = g.add(x, g.input(std::move(pos)));
    x = maybe_dropout(g, x, drop);

    fwd.masks.emplace_back(causal_mask(len));
    const Mask* causal = &fwd.masks.back();

    for (const DecLayer& layer : dec_layers_) {
        MhaNodes self = bind(g, layer.self);
        NodeId f = multi_head_attention_graph(g, self, x, x, x, causal);
        LnNodes ln1 = bind(g, layer.ln_self);
        x = g.layer_norm(g.add(x, maybe_dropout(g, f, drop)), ln1.gamma, ln1.beta, kLnEps);

        CrossBlockNodes block;
        block.strategy = cfg_.strategy;
        for (const MhaHandles& h : layer.cross.enc_attn) block.enc_attn.push_back(bind(g, h));
        if (cfg_.strategy == Strategy::Hierarchical) block.outer = bind(g, layer.cross.outer);
        for (const LnHandles& h : layer.cross.ln) block.ln.push_back(bind(g, h));
        CrossRecordNodes rec;
        x = cross_combine_graph(g, x, bundle, block, kLnEps, &rec, drop);
        fwd.layer_records.push_back(std::move(rec));

        NodeId ff = ffn_graph(g, x, g.param(*layer.ffn.w1), g.param(*layer.ffn.b1),
                              g.param(*layer.ffn.w2), g.param(*layer.ffn.b2));
        LnNodes ln2 = bind(g, layer.ln_ffn);
        x = g.layer_norm(g.add(x, maybe_dropout(g, ff, drop)), ln2.gamma, ln2.beta, kLnEps);
    }

    // Tied output projection: logits = y * E^T.
    fwd.logits = g.matmul_nt(x, table);
    return fwd;
}

ModelForward Model::forward(const ExampleSources& sources, const std::vector<int>& decoder_input,
                            bool training) {
    return forward_impl(sources, decoder_input, training);
}

ModelForward Model::forward(const ExampleSources& sources,
                            const std::vector<int>& decoder_input) const {
    return forward_impl(sources, decoder_input, false);
}

std::vector<CrossAttentionRecord> ModelForward::records() const {
    std::vector<CrossAttentionRecord> out;
    out.reserve(layer_records.size());
    for (const auto& rec : layer_records) out.push_back(extract_record(graph, rec));
    return out;
}

// ---- Persistence ----

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void Model::save(const std::string& path) const {
    CheckpointData data;
    for (const Parameter& p : params_)
        data.tensors.emplace_back(p.name, p.tensor);
    data.config["format"] = "1";
    data.config["d"] = std::to_string(cfg_.d);
    data.config["heads"] = std::to_string(cfg_.heads);
    data.config["ff"] = std::to_string(cfg_.ff);
    data.config["enc_layers"] = std::to_string(cfg_.enc_layers);
    data.config["dec_layers"] = std::to_string(cfg_.dec_layers);
    data.config["sources"] = std::to_string(cfg_.n_sources);
    data.config["strategy"] = strategy_to_string(cfg_.strategy);
    data.config["max_len"] = std::to_string(cfg_.max_len);
    data.config["dropout"] = fmt_double(cfg_.dropout);
    data.config["seed"] = std::to_string(cfg_.seed);
    data.config["feature_dim"] = std::to_string(cfg_.feature_dim);
    data.config["shared_embeddings"] = cfg_.shared_embeddings ? "1" : "0";
    std::string vocab_str;
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        if (i) vocab_str += ' ';
        vocab_str += vocab_.tokens()[i];
    }
    data.config["vocab"] = vocab_str;
    write_checkpoint(data, path);
}

Model Model::load(const std::string& path) {
    CheckpointData data = read_checkpoint(path);
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = data.config.find(key);
        if (it == data.config.end())
            throw SchemaError("checkpoint config is missing key '" + key + "'");
        return it->second;
    };

    ModelConfig cfg;
    cfg.d = std::stoul(need("d"));
    cfg.heads = std::stoul(need("heads"));
    cfg.ff = std::stoul(need("ff"));
    cfg.enc_layers = std::stoul(need("enc_layers"));
    cfg.dec_layers = std::stoul(need("dec_layers"));
    cfg.n_sources = std::stoul(need("sources"));
    cfg.strategy = strategy_from_string(need("strategy"));
    cfg.max_len = std::stoul(need("max_len"));
    cfg.dropout = std::stod(need("dropout"));
    cfg.seed = std::stoull(need("seed"));
    cfg.feature_dim = std::stoul(need("feature_dim"));
    cfg.shared_embeddings = need("shared_embeddings") == "1";

    std::vector<std::string> tokens;
    const std::string& vs = need("vocab");
    std::size_t pos = 0;
    while (pos < vs.size()) {
        std::size_t sp = vs.find(' ', pos);
        if (sp == std::string::npos) sp = vs.size();
        tokens.push_back(vs.substr(pos, sp - pos));
        pos = sp + 1;
    }
    cfg.vocab_size = tokens.size();

    Model model(cfg, Vocabulary(std::move(tokens)));

    std::map<std::string, const Tensor*> stored;
    for (const auto& [name, t] : data.tensors) stored[name] = &t;
    for (Parameter& p : model.params_) {
        auto it = stored.find(p.name);
        if (it == stored.end())
            throw SchemaError("checkpoint is missing parameter '" + p.name + "'");
        if (!(it->second->shape() == p.tensor.shape()))
            throw SchemaError("checkpoint parameter '" + p.name + "' has shape " +
                              it->second->shape_str() + ", expected " + p.tensor.shape_str());
        p.tensor = *it->second;
        stored.erase(it);
    }
    if (!stored.empty())
        throw SchemaError("checkpoint contains unknown parameter '" + stored.begin()->first + "'");
    return model;
}

std::vector<std::string> Model::source_labels(const ExampleSources& src, std::size_t index) const {
    if (cfg_.feature_dim > 0 && index + 1 == cfg_.n_sources) {
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < src.features->rows(); ++i)
            labels.push_back("f" + std::to_string(i));
        return labels;
    }
    return vocab_.decode(src.tokens.at(index));
}

} // namespace mst

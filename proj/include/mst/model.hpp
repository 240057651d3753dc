#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mst/combination.hpp"
#include "mst/graph.hpp"
#include "mst/prng.hpp"

namespace mst {

/// Token <-> id mapping with fixed reserved ids.
class Vocabulary {
public:
    static constexpr int PAD = 0;
    static constexpr int BOS = 1;
    static constexpr int EOS = 2;
    static constexpr int UNK = 3;

    Vocabulary() = default;
    /// tokens[0..3] must be the reserved symbols <pad> <bos> <eos> <unk>.
    explicit Vocabulary(std::vector<std::string> tokens);
    /// Prepends the reserved symbols to the given content tokens.
    static Vocabulary with_reserved(std::vector<std::string> content);

    int id(const std::string& token) const; // UNK for unknown tokens
    const std::string& token(int id) const;
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
};

struct ModelConfig {
    std::size_t d = 64;
    std::size_t heads = 4;
    std::size_t ff = 128;
    std::size_t enc_layers = 2;
    std::size_t dec_layers = 2;
    std::size_t n_sources = 1;
    Strategy strategy = Strategy::Serial;
    std::size_t vocab_size = 0; // filled from the vocabulary
    std::size_t max_len = 32;
    double dropout = 0.1;
    std::uint64_t seed = 1;
    /// When > 0, the last source is a feature pseudo-encoder of this input
    /// width (a linear projection, no positions, no layers).
    std::size_t feature_dim = 0;
    /// When true, token encoders read the decoder's embedding matrix instead
    /// of owning their own.
    bool shared_embeddings = false;

    void validate() const;
    std::size_t head_dim() const { return d / heads; }
    std::size_t token_sources() const { return n_sources - (feature_dim > 0 ? 1 : 0); }
};

/// PE(pos, 2i) = sin(pos / 10000^(2i/d)); PE(pos, 2i+1) = cos(same). d even.
Tensor sinusoidal_positions(std::size_t max_len, std::size_t d);

/// Inputs for one example: token_sources.size() must equal
/// config.token_sources(); features is required iff feature_dim > 0.
struct ExampleSources {
    std::vector<std::vector<int>> tokens;
    std::optional<Tensor> features; // [k x feature_dim]
};

/// One full forward pass. Owns the tape; records hold one entry per decoder
/// layer. Attention weights are read through extract_record once values exist.
struct ModelForward {
    Graph graph;
    std::deque<Mask> masks; // stable storage for masks referenced during build
    NodeId logits = -1;
    std::vector<NodeId> encoder_states;        // final states per source
    std::vector<CrossRecordNodes> layer_records;

    std::vector<CrossAttentionRecord> records() const;
};

class Model {
public:
    Model(ModelConfig cfg, Vocabulary vocab);

    const ModelConfig& config() const { return cfg_; }
    const Vocabulary& vocabulary() const { return vocab_; }

    /// Dropout is a runtime knob: the trainer sets it from its own config;
    /// correctness tests force 0.
    void set_dropout(double rate);

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    Parameter* find_parameter(const std::string& name);
    void zero_grads();

    /// Embeddings scaled by sqrt(d), plus positions, through the encoder
    /// stack. Errors on over-length input or an id outside the vocabulary.
    Tensor encode_sequence(const std::vector<int>& tokens, std::size_t source_index = 0) const;

    /// Linear projection of feature rows into the model dimension.
    Tensor encode_features(const Tensor& features) const;

    /// Full multi-source forward. decoder_input must be BOS-prefixed.
    /// training enables dropout draws from the model's own generator.
    ModelForward forward(const ExampleSources& sources, const std::vector<int>& decoder_input,
                         bool training = false);
    /// Const forward for inference paths (no dropout, shared model is safe).
    ModelForward forward(const ExampleSources& sources,
                         const std::vector<int>& decoder_input) const;

    void save(const std::string& path) const;
    static Model load(const std::string& path);

    /// Source display labels for exports: token strings, or f0..f{k-1} for the
    /// feature source.
    std::vector<std::string> source_labels(const ExampleSources& src, std::size_t index) const;

private:
    struct MhaHandles {
        std::vector<Parameter*> wq, wk, wv, wo;
    };
    struct LnHandles {
        Parameter* gamma = nullptr;
        Parameter* beta = nullptr;
    };
    struct FfnHandles {
        Parameter *w1 = nullptr, *b1 = nullptr, *w2 = nullptr, *b2 = nullptr;
    };
    struct EncLayer {
        MhaHandles self;
        LnHandles ln_self;
        FfnHandles ffn;
        LnHandles ln_ffn;
    };
    struct EncoderHandles {
        Parameter* embed = nullptr; // null for the feature source or shared embeddings
        Parameter* feature_w = nullptr;
        std::vector<EncLayer> layers;
    };
    struct CrossHandles {
        std::vector<MhaHandles> enc_attn;
        MhaHandles outer;
        std::vector<LnHandles> ln;
    };
    struct DecLayer {
        MhaHandles self;
        LnHandles ln_self;
        CrossHandles cross;
        FfnHandles ffn;
        LnHandles ln_ffn;
    };

    Parameter* add_param(const std::string& name, Tensor t);
    Tensor init_matrix(std::size_t rows, std::size_t cols);
    MhaHandles make_mha(const std::string& prefix);
    LnHandles make_ln(const std::string& prefix);
    FfnHandles make_ffn(const std::string& prefix);
    void build_parameters();

    MhaNodes bind(Graph& g, const MhaHandles& h) const;
    LnNodes bind(Graph& g, const LnHandles& h) const;
    NodeId encode_graph(Graph& g, const std::vector<int>& tokens, std::size_t source_index,
                        const DropoutCtx& drop) const;
    NodeId encode_features_graph(Graph& g, const Tensor& features) const;
    ModelForward forward_impl(const ExampleSources& sources,
                              const std::vector<int>& decoder_input, bool training) const;

    ModelConfig cfg_;
    Vocabulary vocab_;
    std::deque<Parameter> params_;
    std::map<std::string, Parameter*> by_name_;

    Parameter* dec_embed_ = nullptr;
    std::vector<EncoderHandles> encoders_;
    std::vector<DecLayer> dec_layers_;
    Tensor positions_;
    mutable Prng dropout_rng_;

    static constexpr double kLnEps = 1e-6;
};

} // namespace mst

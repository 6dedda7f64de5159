#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "codegaze/gaze.hpp"
#include "codegaze/tensor.hpp"
#include "codegaze/vocab.hpp"

namespace codegaze::eye {

struct EyeModelConfig {
    enum class Arch { Gnn, Rnn };

    Arch arch = Arch::Gnn;
    std::string pretrain_embedding_path;  // empty = random start
    int m_cap = 400;
    int embed_dim = 100;  // n
    int gnn_hops = 2;
    int rnn_hidden = 100;
    int hidden_width = 0;  // 0 = single affine map to the scalar output
    int epochs = 100;
    std::uint64_t seed = 1;
    std::string optimizer = "adam";
    double learning_rate = 1e-3;
    int batch_size = 32;
    bool self_loops = true;
    int eval_epoch = 70;  // checkpoint pick when no validation split exists

    void validate() const;
    nlohmann::json to_json() const;
    static EyeModelConfig from_json(const nlohmann::json& j);
    static Arch arch_from_string(const std::string& s);
    std::string arch_string() const;
};

// One method encoded for the model: padded id sequence plus the adjacency
// over linearized positions, kept as a constant tensor.
struct EncodedMethod {
    std::string method_id;
    ast::NodeSequence seq;
    nd::Tensor adj;                    // [m_cap, m_cap]
    std::vector<std::string> labels;   // preorder labels, true length
};

EncodedMethod encode_method(const ast::AstGraph& g, const ast::Vocabulary& vocab,
                            const EyeModelConfig& cfg);

struct EyeModel {
    EyeModelConfig config;
    ast::Vocabulary vocab;
    nd::Tensor embedding;                 // [V, n]
    std::vector<nd::Tensor> gnn_W;        // per hop [n, n]
    std::vector<nd::Tensor> gnn_b;        // per hop [n]
    nd::GruParams rnn;                    // rnn arch only
    nd::Tensor hid_W, hid_b;              // optional hidden layer
    nd::Tensor out_W, out_b;
    double pretrain_coverage = -1.0;      // -1 when no pretrained table was loaded

    static EyeModel init(const EyeModelConfig& cfg, const ast::Vocabulary& vocab);

    std::vector<std::pair<std::string, nd::Tensor>> named_params() const;
    std::vector<nd::Tensor> params() const;
    long dense_input_width() const;

    // Per-position representations: two GNN hops over the adjacency, or a GRU
    // sweep over the sequence. [m_cap, n]
    nd::Tensor node_states(const EncodedMethod& m) const;

    // Tape-recording forward pass for one focal point.
    nd::Tensor forward(const EncodedMethod& m, int focal_index) const;
    // Inference-only scalar in (0,1).
    double forward_ptgt(const EncodedMethod& m, int focal_index) const;

    // ptgt-hat for every non-padding position; the node-state pass runs once
    // and is reused, matching per-focal forward_ptgt exactly.
    std::vector<double> predict_attention_vector(const EncodedMethod& m) const;
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
};

using EpochCallback = std::function<void(int epoch, double loss, const EyeModel& model)>;

std::vector<EpochStats> train_eye(EyeModel& model, const std::vector<gaze::PtgtSample>& samples,
                                  const std::map<std::string, EncodedMethod>& methods,
                                  const EpochCallback& on_epoch = {});

struct Fold {
    std::string held_programmer;
    std::string held_method;
    std::vector<gaze::PtgtSample> train;
    std::vector<gaze::PtgtSample> test;
};

// |programmers| x |common_methods| folds; training never sees the held
// programmer or the held method.
std::vector<Fold> make_folds(const std::set<std::string>& programmers,
                             const std::set<std::string>& common_methods,
                             const std::vector<gaze::PtgtSample>& all_samples);

struct CorrelationResult {
    std::optional<double> r;  // empty when the correlation is degenerate
};

CorrelationResult evaluate_correlation(const EyeModel& model, const Fold& fold,
                                       const std::map<std::string, EncodedMethod>& methods);

// Overlays rows from a `token v1 .. vn` text file onto `table` for in-vocab
// tokens; returns the fraction of vocabulary rows covered.
double overlay_pretrained_embeddings(const std::string& path, const ast::Vocabulary& vocab,
                                     nd::Tensor& table);

}  // namespace codegaze::eye

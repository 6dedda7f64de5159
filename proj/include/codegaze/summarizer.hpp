#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "codegaze/tensor.hpp"
#include "codegaze/vocab.hpp"

namespace codegaze::summ {

struct SummaryModelConfig {
    enum class Variant { Baseline, Augmented };

    Variant variant = Variant::Baseline;
    int ast_vocab_size = 10000;
    int summary_vocab_size = 10000;
    int embed_dim = 100;
    int enc_hidden = 256;
    int dec_hidden = 256;
    int human_rnn_hidden = 256;
    int max_ast_len = 400;
    int max_summary_len = 13;
    int epochs = 10;
    std::uint64_t seed = 1;
    std::string optimizer = "adam";
    double learning_rate = 1e-3;
    int batch_size = 32;

    void validate() const;
    nlohmann::json to_json() const;
    static SummaryModelConfig from_json(const nlohmann::json& j);
    static Variant variant_from_string(const std::string& s);
    std::string variant_string() const;
};

// Predicted ptgt over the AST positions of one method, normalized so the
// mean is exactly 1.0: values above 1 mark above-average attention.
struct HumanAttentionVector {
    std::string method_id;
    std::vector<double> values;
};

HumanAttentionVector normalize_attention(const std::vector<double>& raw,
                                         const std::string& method_id = "");

// Uniform draws in [lo, hi]; the control pipeline feeds these through the
// same normalization as model-predicted attention.
std::vector<double> random_attention_raw(double lo, double hi, int length, std::mt19937_64& rng);
HumanAttentionVector random_attention_vector(double lo, double hi, int length,
                                             std::uint64_t seed);

struct SummaryModel {
    SummaryModelConfig config;
    ast::Vocabulary ast_vocab;
    ast::Vocabulary sum_vocab;
    nd::Tensor ast_embedding;  // [V_ast, e]
    nd::GruParams encoder;     // e -> H
    nd::GruParams human_gru;   // e -> H, augmented variant only
    nd::Tensor dec_embedding;  // [V_sum, e]
    nd::GruParams decoder;     // e -> H
    nd::Tensor out_W, out_b;   // [3H, V_sum]

    static SummaryModel init(const SummaryModelConfig& cfg, const ast::Vocabulary& ast_vocab,
                             const ast::Vocabulary& sum_vocab);

    std::vector<std::pair<std::string, nd::Tensor>> named_params() const;
    std::vector<nd::Tensor> params() const;
    long output_input_width() const { return 3L * config.enc_hidden; }

    struct Encoded {
        nd::Tensor enc_states;   // [L, H]
        nd::Tensor extra_state;  // [H]: encoder final (baseline) or human-GRU final
    };

    // The main encoder always sees unscaled embeddings; the augmented variant
    // additionally runs a second GRU over attention-scaled embeddings.
    Encoded encode(const std::vector<int>& ast_ids,
                   const std::optional<HumanAttentionVector>& attention) const;

    // Teacher forcing: each step consumes the gold previous word; returns the
    // mean cross-entropy over the predicted steps.
    nd::Tensor decode_train_step(const Encoded& enc, const std::vector<int>& summary_ids) const;

    // Greedy argmax decoding from <s> until </s> or max_summary_len words.
    std::vector<std::string> generate(const std::vector<int>& ast_ids,
                                      const std::optional<HumanAttentionVector>& attention) const;
};

struct SummarySample {
    std::string method_id;
    std::vector<int> ast_ids;                        // truncated to max_ast_len
    std::vector<int> summary_ids;                    // <s> w.. </s>
    std::optional<HumanAttentionVector> attention;   // augmented variant only
};

struct SummaryEpochStats {
    int epoch = 0;
    double loss = 0.0;
};

struct SummaryTrainResult {
    std::vector<SummaryEpochStats> epochs;
    long skipped_empty = 0;
};

using SummaryEpochCallback = std::function<void(int epoch, double loss)>;

SummaryTrainResult train_summarizer(SummaryModel& model, const std::vector<SummarySample>& samples,
                                    const SummaryEpochCallback& on_epoch = {});

// Lowercased first sentence, punctuation stripped, capped word count.
std::vector<std::string> tokenize_summary(const std::string& text, int max_words);
std::vector<int> summary_to_ids(const std::vector<std::string>& words,
                                const ast::Vocabulary& sum_vocab);

}  // namespace codegaze::summ

#include "codegaze/summarizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace codegaze::summ {

void SummaryModelConfig::validate() const {
    if (embed_dim < 1 || enc_hidden < 1 || max_ast_len < 1 || max_summary_len < 1 || epochs < 1 ||
        batch_size < 1)
        throw ConfigError("summary model config: dimensions and epochs must be positive");
    if (dec_hidden != enc_hidden)
        throw ConfigError("summary model config: dot-product attention requires dec_hidden == enc_hidden");
    if (human_rnn_hidden != enc_hidden)
        throw ConfigError("summary model config: output-layer parity requires human_rnn_hidden == enc_hidden");
    if (optimizer != "adam" && optimizer != "sgd")
        throw ConfigError("summary model config: optimizer must be adam or sgd");
}

SummaryModelConfig::Variant SummaryModelConfig::variant_from_string(const std::string& s) {
    if (s == "baseline") return Variant::Baseline;
    if (s == "augmented") return Variant::Augmented;
    throw ConfigError("unknown variant '" + s + "' (expected baseline or augmented)");
}

std::string SummaryModelConfig::variant_string() const {
    return variant == Variant::Baseline ? "baseline" : "augmented";
}

nlohmann::json SummaryModelConfig::to_json() const {
    return nlohmann::json{{"variant", variant_string()},
                          {"ast_vocab_size", ast_vocab_size},
                          {"summary_vocab_size", summary_vocab_size},
                          {"embed_dim", embed_dim},
                          {"enc_hidden", enc_hidden},
                          {"dec_hidden", dec_hidden},
                          {"human_rnn_hidden", human_rnn_hidden},
                          {"max_ast_len", max_ast_len},
                          {"max_summary_len", max_summary_len},
                          {"epochs", epochs},
                          {"seed", seed},
                          {"optimizer", optimizer},
                          {"learning_rate", learning_rate},
                          {"batch_size", batch_size}};
}

SummaryModelConfig SummaryModelConfig::from_json(const nlohmann::json& j) {
    SummaryModelConfig cfg;
    cfg.variant = variant_from_string(j.at("variant").get<std::string>());
    cfg.ast_vocab_size = j.at("ast_vocab_size").get<int>();
    cfg.summary_vocab_size = j.at("summary_vocab_size").get<int>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.enc_hidden = j.at("enc_hidden").get<int>();
    cfg.dec_hidden = j.at("dec_hidden").get<int>();
    cfg.human_rnn_hidden = j.at("human_rnn_hidden").get<int>();
    cfg.max_ast_len = j.at("max_ast_len").get<int>();
    cfg.max_summary_len = j.at("max_summary_len").get<int>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.optimizer = j.value("optimizer", std::string("adam"));
    cfg.learning_rate = j.value("learning_rate", 1e-3);
    cfg.batch_size = j.value("batch_size", 32);
    cfg.validate();
    return cfg;
}

HumanAttentionVector normalize_attention(const std::vector<double>& raw,
                                         const std::string& method_id) {
    if (raw.empty()) throw NormalizationError("attention vector is empty");
    double sum = 0.0;
    for (double v : raw) {
        if (v < 0.0) throw UsageError("attention values must be non-negative");
        sum += v;
    }
    if (sum == 0.0) throw NormalizationError("attention vector is all zero");
    double mean = sum / static_cast<double>(raw.size());
    HumanAttentionVector out;
    out.method_id = method_id;
    out.values.reserve(raw.size());
    for (double v : raw) out.values.push_back(v / mean);
    return out;
}

std::vector<double> random_attention_raw(double lo, double hi, int length, std::mt19937_64& rng) {
    if (!(lo >= 0.0) || !(lo < hi))
        throw ConfigError("random attention bounds must satisfy 0 <= lo < hi");
    if (length < 1) throw ConfigError("random attention length must be positive");
    std::vector<double> out(static_cast<size_t>(length));
    for (auto& v : out) v = nd::uniform_in(rng, lo, hi);
    return out;
}

HumanAttentionVector random_attention_vector(double lo, double hi, int length,
                                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return normalize_attention(random_attention_raw(lo, hi, length, rng));
}

SummaryModel SummaryModel::init(const SummaryModelConfig& cfg, const ast::Vocabulary& ast_vocab,
                                const ast::Vocabulary& sum_vocab) {
    cfg.validate();
    if (sum_vocab.reserved_count() < 4)
        throw ConfigError("summary vocabulary needs sentence markers");
    SummaryModel model;
    model.config = cfg;
    model.ast_vocab = ast_vocab;
    model.sum_vocab = sum_vocab;
    std::mt19937_64 rng(cfg.seed);
    int e = cfg.embed_dim, H = cfg.enc_hidden;
    model.ast_embedding = nd::uniform_param({ast_vocab.size(), e}, -0.1, 0.1, rng);
    model.encoder = nd::GruParams::init(e, H, rng);
    if (cfg.variant == SummaryModelConfig::Variant::Augmented)
        model.human_gru = nd::GruParams::init(e, cfg.human_rnn_hidden, rng);
    model.dec_embedding = nd::uniform_param({sum_vocab.size(), e}, -0.1, 0.1, rng);
    model.decoder = nd::GruParams::init(e, cfg.dec_hidden, rng);
    model.out_W = nd::xavier_param(static_cast<int>(model.output_input_width()), sum_vocab.size(), rng);
    model.out_b = nd::zeros_param({sum_vocab.size()});
    return model;
}

std::vector<std::pair<std::string, nd::Tensor>> SummaryModel::named_params() const {
    std::vector<std::pair<std::string, nd::Tensor>> out;
    out.emplace_back("ast_embedding", ast_embedding);
    for (auto& p : encoder.named("encoder")) out.push_back(p);
    if (config.variant == SummaryModelConfig::Variant::Augmented)
        for (auto& p : human_gru.named("human_gru")) out.push_back(p);
    out.emplace_back("dec_embedding", dec_embedding);
    for (auto& p : decoder.named("decoder")) out.push_back(p);
    out.emplace_back("out.W", out_W);
    out.emplace_back("out.b", out_b);
    return out;
}

std::vector<nd::Tensor> SummaryModel::params() const {
    std::vector<nd::Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

SummaryModel::Encoded SummaryModel::encode(
    const std::vector<int>& ast_ids, const std::optional<HumanAttentionVector>& attention) const {
    bool augmented = config.variant == SummaryModelConfig::Variant::Augmented;
    if (augmented != attention.has_value())
        throw UsageError(augmented ? "augmented encoder needs a human attention vector"
                                   : "baseline encoder takes no attention vector");
    if (ast_ids.empty()) throw UsageError("encode: empty AST sequence");
    if (static_cast<int>(ast_ids.size()) > config.max_ast_len)
        throw UsageError("encode: sequence longer than max_ast_len");

    nd::Tensor emb = nd::embed_lookup(ast_embedding, ast_ids);  // [L, e]
    int L = static_cast<int>(ast_ids.size());

    std::vector<nd::Tensor> rows;
    rows.reserve(static_cast<size_t>(L));
    nd::Tensor h = nd::Tensor::zeros({config.enc_hidden});
    for (int t = 0; t < L; ++t) {
        h = nd::gru_cell(nd::row(emb, t), h, encoder);
        rows.push_back(h);
    }
    Encoded enc;
    enc.enc_states = nd::stack_rows(rows);

    if (!augmented) {
        enc.extra_state = rows.back();  // fairness concat: encoder final state
        return enc;
    }
    if (attention->values.size() != ast_ids.size())
        throw AlignError("attention length " + std::to_string(attention->values.size()) +
                         " does not match sequence length " + std::to_string(ast_ids.size()) +
                         " for " + attention->method_id);
    nd::Tensor scale = nd::Tensor::from({L}, attention->values);
    nd::Tensor scaled = nd::scale_rows(emb, scale);
    nd::Tensor hh = nd::Tensor::zeros({config.human_rnn_hidden});
    for (int t = 0; t < L; ++t) hh = nd::gru_cell(nd::row(scaled, t), hh, human_gru);
    enc.extra_state = hh;
    return enc;
}

nd::Tensor SummaryModel::decode_train_step(const Encoded& enc,
                                           const std::vector<int>& summary_ids) const {
    if (summary_ids.size() < 2 || summary_ids.front() != sum_vocab.bos_id() ||
        summary_ids.back() != sum_vocab.eos_id())
        throw UsageError("summary ids must be <s> .. </s>");
    if (static_cast<int>(summary_ids.size()) > config.max_summary_len + 2)
        throw UsageError("summary longer than max_summary_len");
    int L = enc.enc_states.shape()[0];
    nd::Tensor dec_h = nd::row(enc.enc_states, L - 1);
    std::vector<nd::Tensor> losses;
    for (size_t t = 1; t < summary_ids.size(); ++t) {
        nd::Tensor x = nd::flatten(nd::embed_lookup(dec_embedding, {summary_ids[t - 1]}));
        dec_h = nd::gru_cell(x, dec_h, decoder);
        nd::Tensor scores = nd::matmul(enc.enc_states, dec_h);  // [L]
        nd::Tensor alpha = nd::softmax(scores);
        nd::Tensor context = nd::matmul(alpha, enc.enc_states);  // [H]
        nd::Tensor oin = nd::concat({context, dec_h, enc.extra_state});
        nd::Tensor logits = nd::add(nd::matmul(oin, out_W), out_b);
        losses.push_back(nd::cross_entropy(logits, summary_ids[t]));
    }
    return nd::mean_of(losses);
}

std::vector<std::string> SummaryModel::generate(
    const std::vector<int>& ast_ids, const std::optional<HumanAttentionVector>& attention) const {
    Encoded enc = encode(ast_ids, attention);
    int L = enc.enc_states.shape()[0];
    nd::Tensor dec_h = nd::row(enc.enc_states, L - 1);
    std::vector<std::string> words;
    int prev = sum_vocab.bos_id();
    for (int step = 0; step < config.max_summary_len; ++step) {
        nd::Tensor x = nd::flatten(nd::embed_lookup(dec_embedding, {prev}));
        dec_h = nd::gru_cell(x, dec_h, decoder);
        nd::Tensor scores = nd::matmul(enc.enc_states, dec_h);
        nd::Tensor alpha = nd::softmax(scores);
        nd::Tensor context = nd::matmul(alpha, enc.enc_states);
        nd::Tensor oin = nd::concat({context, dec_h, enc.extra_state});
        nd::Tensor logits = nd::add(nd::matmul(oin, out_W), out_b);
        int best = 0;
        for (int k = 1; k < sum_vocab.size(); ++k)
            if (logits.value()[k] > logits.value()[best]) best = k;
        if (best == sum_vocab.eos_id()) break;
        words.push_back(sum_vocab.token_of(best));
        prev = best;
    }
    return words;
}

SummaryTrainResult train_summarizer(SummaryModel& model, const std::vector<SummarySample>& samples,
                                    const SummaryEpochCallback& on_epoch) {
    if (samples.empty()) throw ConfigError("train_summarizer: no samples");
    SummaryTrainResult result;
    std::vector<size_t> usable;
    for (size_t k = 0; k < samples.size(); ++k) {
        if (samples[k].summary_ids.size() < 3) {
            ++result.skipped_empty;
            continue;
        }
        usable.push_back(k);
    }
    if (usable.empty()) throw ConfigError("train_summarizer: every summary is empty");

    const SummaryModelConfig& cfg = model.config;
    nd::Optimizer opt = cfg.optimizer == "sgd" ? nd::Optimizer::sgd(cfg.learning_rate)
                                               : nd::Optimizer::adam(cfg.learning_rate);
    std::mt19937_64 shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
    std::vector<nd::Tensor> params = model.params();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        nd::fisher_yates(usable, shuffle_rng);
        double loss_acc = 0.0;
        for (size_t start = 0; start < usable.size(); start += static_cast<size_t>(cfg.batch_size)) {
            size_t end = std::min(usable.size(), start + static_cast<size_t>(cfg.batch_size));
            nd::Tape tape;
            std::vector<nd::Tensor> losses;
            for (size_t k = start; k < end; ++k) {
                const SummarySample& s = samples[usable[k]];
                auto enc = model.encode(s.ast_ids, s.attention);
                losses.push_back(model.decode_train_step(enc, s.summary_ids));
            }
            nd::Tensor batch_loss = nd::mean_of(losses);
            loss_acc += batch_loss.item() * static_cast<double>(losses.size());
            tape.backward(batch_loss);
            opt.step(params);
        }
        SummaryEpochStats es{epoch, loss_acc / static_cast<double>(usable.size())};
        result.epochs.push_back(es);
        if (on_epoch) on_epoch(epoch, es.loss);
    }
    return result;
}

std::vector<std::string> tokenize_summary(const std::string& text, int max_words) {
    // first sentence only
    size_t cut = text.size();
    for (size_t i = 0; i < text.size(); ++i)
        if (text[i] == '.' || text[i] == '!' || text[i] == '?') {
            cut = i;
            break;
        }
    std::vector<std::string> words;
    std::string cur;
    for (size_t i = 0; i < cut && static_cast<int>(words.size()) < max_words; ++i) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur += c;
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty() && static_cast<int>(words.size()) < max_words) words.push_back(cur);
    return words;
}

std::vector<int> summary_to_ids(const std::vector<std::string>& words,
                                const ast::Vocabulary& sum_vocab) {
    std::vector<int> ids;
    ids.push_back(sum_vocab.bos_id());
    for (const auto& w : words) ids.push_back(sum_vocab.id_of(w));
    ids.push_back(sum_vocab.eos_id());
    return ids;
}

}  // namespace codegaze::summ

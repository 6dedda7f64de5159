// codegaze: gaze-informed code summarization toolkit.
//
// Pipeline: corpus-prepare -> gaze-ingest -> train-eye / eval-eye ->
// predict-attn -> train-sum -> eval-sum, with control-random for the
// random-attention baselines and heatmap/report for inspection.

#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "codegaze/pipeline.hpp"

using namespace codegaze;

namespace {

// distinct exit-code base per subcommand
const std::map<std::string, int> kExitBase = {
    {"corpus-prepare", 10}, {"gaze-ingest", 20}, {"train-eye", 30},  {"eval-eye", 40},
    {"predict-attn", 50},   {"train-sum", 60},   {"eval-sum", 70},   {"control-random", 80},
    {"heatmap", 90},        {"report", 100}};

std::map<std::string, std::string> maybe_kv(const std::string& path) {
    if (path.empty()) return {};
    return pipeline::load_kv_config(path);
}

// kv settings apply first; explicitly passed flags win
template <typename T>
void kv_apply(const std::map<std::string, std::string>& kv, const std::string& key, CLI::App* cmd,
              const std::string& flag, T& target) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    if (cmd->count(flag) > 0) return;
    std::istringstream in(it->second);
    if constexpr (std::is_same_v<T, std::string>) {
        target = it->second;
    } else if constexpr (std::is_same_v<T, bool>) {
        target = it->second == "true" || it->second == "1";
    } else {
        in >> target;
        if (in.fail()) throw ConfigError("config key '" + key + "' has a malformed value");
    }
}

struct EyeFlags {
    std::string arch = "gnn";
    std::string pretrain;
    int m_cap = 400;
    int embed_dim = 100;
    int gnn_hops = 2;
    int rnn_hidden = 100;
    int hidden_width = 0;
    int epochs = 100;
    std::uint64_t seed = 1;
    std::string optimizer = "adam";
    double lr = 1e-3;
    int batch_size = 32;
    bool self_loops = true;
    int eval_epoch = 70;
    int vocab_size = 10000;

    void attach(CLI::App* cmd) {
        cmd->add_option("--arch", arch, "gnn or rnn");
        cmd->add_option("--pretrain", pretrain, "pretrained embedding file");
        cmd->add_option("--m-cap", m_cap, "node cap per method");
        cmd->add_option("--embed-dim", embed_dim, "embedding width");
        cmd->add_option("--gnn-hops", gnn_hops, "message passing rounds");
        cmd->add_option("--rnn-hidden", rnn_hidden, "rnn hidden width");
        cmd->add_option("--hidden-width", hidden_width, "output hidden layer width");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--seed", seed, "rng seed");
        cmd->add_option("--optimizer", optimizer, "adam or sgd");
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_option("--batch-size", batch_size, "batch size");
        cmd->add_option("--eval-epoch", eval_epoch, "epoch reported by eval-eye");
        cmd->add_option("--vocab-size", vocab_size, "label vocabulary cap");
    }

    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> keys = {
            "arch",       "pretrain",  "m_cap",        "embed_dim",  "gnn_hops",
            "rnn_hidden", "hidden_width", "epochs",    "seed",       "optimizer",
            "lr",         "batch_size", "self_loops",  "eval_epoch", "vocab_size"};
        return keys;
    }

    eye::EyeModelConfig resolve(CLI::App* cmd, const std::map<std::string, std::string>& kv) {
        kv_apply(kv, "arch", cmd, "--arch", arch);
        kv_apply(kv, "pretrain", cmd, "--pretrain", pretrain);
        kv_apply(kv, "m_cap", cmd, "--m-cap", m_cap);
        kv_apply(kv, "embed_dim", cmd, "--embed-dim", embed_dim);
        kv_apply(kv, "gnn_hops", cmd, "--gnn-hops", gnn_hops);
        kv_apply(kv, "rnn_hidden", cmd, "--rnn-hidden", rnn_hidden);
        kv_apply(kv, "hidden_width", cmd, "--hidden-width", hidden_width);
        kv_apply(kv, "epochs", cmd, "--epochs", epochs);
        kv_apply(kv, "seed", cmd, "--seed", seed);
        kv_apply(kv, "optimizer", cmd, "--optimizer", optimizer);
        kv_apply(kv, "lr", cmd, "--lr", lr);
        kv_apply(kv, "batch_size", cmd, "--batch-size", batch_size);
        kv_apply(kv, "eval_epoch", cmd, "--eval-epoch", eval_epoch);
        kv_apply(kv, "vocab_size", cmd, "--vocab-size", vocab_size);
        if (kv.count("self_loops"))  // config-file only; no matching flag
            self_loops = kv.at("self_loops") == "true" || kv.at("self_loops") == "1";

        eye::EyeModelConfig cfg;
        cfg.arch = eye::EyeModelConfig::arch_from_string(arch);
        cfg.pretrain_embedding_path = pretrain;
        cfg.m_cap = m_cap;
        cfg.embed_dim = embed_dim;
        cfg.gnn_hops = gnn_hops;
        cfg.rnn_hidden = rnn_hidden;
        cfg.hidden_width = hidden_width;
        cfg.epochs = epochs;
        cfg.seed = seed;
        cfg.optimizer = optimizer;
        cfg.learning_rate = lr;
        cfg.batch_size = batch_size;
        cfg.self_loops = self_loops;
        cfg.eval_epoch = eval_epoch;
        cfg.validate();
        return cfg;
    }
};

struct SumFlags {
    std::string variant = "baseline";
    int ast_vocab_size = 10000;
    int summary_vocab_size = 10000;
    int embed_dim = 100;
    int enc_hidden = 256;
    int max_ast_len = 400;
    int max_summary_len = 13;
    int epochs = 10;
    std::uint64_t seed = 1;
    std::string optimizer = "adam";
    double lr = 1e-3;
    int batch_size = 32;

    void attach(CLI::App* cmd, bool with_variant = true) {
        if (with_variant) cmd->add_option("--variant", variant, "baseline or augmented");
        cmd->add_option("--ast-vocab-size", ast_vocab_size, "AST label vocabulary cap");
        cmd->add_option("--summary-vocab-size", summary_vocab_size, "summary vocabulary cap");
        cmd->add_option("--embed-dim", embed_dim, "embedding width");
        cmd->add_option("--enc-hidden", enc_hidden, "GRU hidden width (all three GRUs)");
        cmd->add_option("--max-ast-len", max_ast_len, "AST sequence cap");
        cmd->add_option("--max-summary-len", max_summary_len, "summary word cap");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--seed", seed, "rng seed");
        cmd->add_option("--optimizer", optimizer, "adam or sgd");
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_option("--batch-size", batch_size, "batch size");
    }

    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> keys = {
            "variant",    "ast_vocab_size", "summary_vocab_size", "embed_dim",
            "enc_hidden", "max_ast_len",    "max_summary_len",    "epochs",
            "seed",       "optimizer",      "lr",                 "batch_size"};
        return keys;
    }

    summ::SummaryModelConfig resolve(CLI::App* cmd, const std::map<std::string, std::string>& kv) {
        kv_apply(kv, "variant", cmd, "--variant", variant);
        kv_apply(kv, "ast_vocab_size", cmd, "--ast-vocab-size", ast_vocab_size);
        kv_apply(kv, "summary_vocab_size", cmd, "--summary-vocab-size", summary_vocab_size);
        kv_apply(kv, "embed_dim", cmd, "--embed-dim", embed_dim);
        kv_apply(kv, "enc_hidden", cmd, "--enc-hidden", enc_hidden);
        kv_apply(kv, "max_ast_len", cmd, "--max-ast-len", max_ast_len);
        kv_apply(kv, "max_summary_len", cmd, "--max-summary-len", max_summary_len);
        kv_apply(kv, "epochs", cmd, "--epochs", epochs);
        kv_apply(kv, "seed", cmd, "--seed", seed);
        kv_apply(kv, "optimizer", cmd, "--optimizer", optimizer);
        kv_apply(kv, "lr", cmd, "--lr", lr);
        kv_apply(kv, "batch_size", cmd, "--batch-size", batch_size);

        summ::SummaryModelConfig cfg;
        cfg.variant = summ::SummaryModelConfig::variant_from_string(variant);
        cfg.ast_vocab_size = ast_vocab_size;
        cfg.summary_vocab_size = summary_vocab_size;
        cfg.embed_dim = embed_dim;
        cfg.enc_hidden = enc_hidden;
        cfg.dec_hidden = enc_hidden;
        cfg.human_rnn_hidden = enc_hidden;
        cfg.max_ast_len = max_ast_len;
        cfg.max_summary_len = max_summary_len;
        cfg.epochs = epochs;
        cfg.seed = seed;
        cfg.optimizer = optimizer;
        cfg.learning_rate = lr;
        cfg.batch_size = batch_size;
        cfg.validate();
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"codegaze: human-attention modeling for code summarization"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";

    // corpus-prepare
    auto* prep = app.add_subcommand("corpus-prepare", "dedup, length-filter, split by project");
    pipeline::CorpusPrepareOptions prep_opt;
    std::vector<std::string> prep_exclude;
    prep->add_option("--in", prep_opt.in_path, "method corpus jsonl")->required();
    prep->add_option("--out", prep_opt.out_dir, "output directory");
    prep->add_option("--top-fraction", prep_opt.top_fraction, "fraction kept by token count");
    prep->add_flag("--no-dedup", "keep duplicate sources");
    prep->add_option("--exclude", prep_exclude, "projects to drop entirely");
    prep->add_option("--config", config_path, "key=value config file");

    // gaze-ingest
    auto* ingest = app.add_subcommand("gaze-ingest", "fixations csv to ptgt vectors");
    pipeline::GazeIngestOptions ingest_opt;
    ingest->add_option("--corpus", ingest_opt.corpus_path, "method corpus jsonl")->required();
    ingest->add_option("--fixations", ingest_opt.fixations_path, "fixations csv")->required();
    ingest->add_option("--out", ingest_opt.out_dir, "output directory");
    ingest->add_option("--m-cap", ingest_opt.m_cap, "node cap");

    // train-eye
    auto* teye = app.add_subcommand("train-eye", "train a gaze prediction model");
    pipeline::TrainEyeOptions teye_opt;
    EyeFlags teye_flags;
    teye->add_option("--corpus", teye_opt.corpus_path, "method corpus jsonl")->required();
    teye->add_option("--ptgt", teye_opt.ptgt_path, "gaze-ingest output")->required();
    teye->add_option("--out", teye_opt.out_dir, "output directory");
    teye->add_option("--checkpoint-every", teye_opt.checkpoint_every, "epoch interval, 0=final");
    teye->add_option("--config", config_path, "key=value config file");
    teye_flags.attach(teye);

    // eval-eye
    auto* eeye = app.add_subcommand("eval-eye", "hold-out fold evaluation with the correlation table");
    pipeline::EvalEyeOptions eeye_opt;
    EyeFlags eeye_flags;
    eeye->add_option("--corpus", eeye_opt.corpus_path, "method corpus jsonl")->required();
    eeye->add_option("--ptgt", eeye_opt.ptgt_path, "gaze-ingest output")->required();
    eeye->add_option("--out", eeye_opt.out_dir, "output directory");
    eeye->add_option("--config", config_path, "key=value config file");
    eeye_flags.attach(eeye);

    // predict-attn
    auto* pattn = app.add_subcommand("predict-attn", "all-node attention for a corpus");
    pipeline::PredictAttnOptions pattn_opt;
    pattn->add_option("--corpus", pattn_opt.corpus_path, "method corpus jsonl")->required();
    pattn->add_option("--checkpoint", pattn_opt.checkpoint_path, "eye model checkpoint")->required();
    pattn->add_option("--out", pattn_opt.out_dir, "output directory");

    // train-sum
    auto* tsum = app.add_subcommand("train-sum", "train the summarizer");
    pipeline::TrainSumOptions tsum_opt;
    SumFlags tsum_flags;
    tsum->add_option("--train", tsum_opt.train_corpus_path, "training corpus jsonl")->required();
    tsum->add_option("--attention", tsum_opt.attention_path, "attention jsonl (augmented)");
    tsum->add_option("--out", tsum_opt.out_dir, "output directory");
    tsum->add_option("--config", config_path, "key=value config file");
    tsum_flags.attach(tsum);

    // eval-sum
    auto* esum = app.add_subcommand("eval-sum", "generate and score summaries");
    pipeline::EvalSumOptions esum_opt;
    esum->add_option("--checkpoint", esum_opt.checkpoint_path, "summarizer checkpoint")->required();
    esum->add_option("--test", esum_opt.test_corpus_path, "test corpus jsonl")->required();
    esum->add_option("--attention", esum_opt.attention_path, "attention jsonl (augmented)");
    esum->add_option("--out", esum_opt.out_dir, "output directory");
    esum->add_option("--report-name", esum_opt.report_name, "basename for the score report");

    // control-random
    auto* ctrl = app.add_subcommand("control-random", "five random-attention control runs");
    pipeline::ControlRandomOptions ctrl_opt;
    SumFlags ctrl_flags;
    ctrl->add_option("--attention", ctrl_opt.attention_path, "model attention jsonl")->required();
    ctrl->add_option("--train", ctrl_opt.train_corpus_path, "training corpus jsonl")->required();
    ctrl->add_option("--test", ctrl_opt.test_corpus_path, "test corpus jsonl")->required();
    ctrl->add_option("--out", ctrl_opt.out_dir, "output directory");
    ctrl->add_option("--seeds", ctrl_opt.seeds, "control seeds");
    ctrl->add_option("--config", config_path, "key=value config file");
    ctrl_flags.attach(ctrl, false);

    // heatmap
    auto* hmap = app.add_subcommand("heatmap", "render per-token attention as html");
    pipeline::HeatmapOptions hmap_opt;
    hmap->add_option("--corpus", hmap_opt.corpus_path, "method corpus jsonl")->required();
    hmap->add_option("--attention", hmap_opt.attention_path, "ptgt or attention jsonl")->required();
    hmap->add_option("--method", hmap_opt.method_id, "method id")->required();
    hmap->add_option("--source", hmap_opt.source_kind, "human or predicted");
    hmap->add_option("--out", hmap_opt.out_path, "output html path")->required();

    // report
    auto* rep = app.add_subcommand("report", "paired significance test between two score files");
    pipeline::ReportOptions rep_opt;
    rep->add_option("--a", rep_opt.scores_a_path, "score report A")->required();
    rep->add_option("--b", rep_opt.scores_b_path, "score report B")->required();
    rep->add_option("--out", rep_opt.out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    CLI::App* active = app.get_subcommands().front();
    const std::string name = active->get_name();
    try {
        if (active == prep) {
            auto kv = maybe_kv(config_path);
            pipeline::reject_unknown_keys(kv, {"top_fraction", "dedup"}, name);
            kv_apply(kv, "top_fraction", prep, "--top-fraction", prep_opt.top_fraction);
            if (kv.count("dedup") && prep->count("--no-dedup") == 0)
                prep_opt.dedup = kv.at("dedup") == "true" || kv.at("dedup") == "1";
            if (prep->count("--no-dedup")) prep_opt.dedup = false;
            prep_opt.exclude_projects.insert(prep_exclude.begin(), prep_exclude.end());
            pipeline::cmd_corpus_prepare(prep_opt);
        } else if (active == ingest) {
            pipeline::cmd_gaze_ingest(ingest_opt);
        } else if (active == teye) {
            auto kv = maybe_kv(config_path);
            pipeline::reject_unknown_keys(kv, EyeFlags::known_keys(), name);
            teye_opt.config = teye_flags.resolve(teye, kv);
            teye_opt.vocab_size = teye_flags.vocab_size;
            pipeline::cmd_train_eye(teye_opt);
        } else if (active == eeye) {
            auto kv = maybe_kv(config_path);
            pipeline::reject_unknown_keys(kv, EyeFlags::known_keys(), name);
            eeye_opt.config = eeye_flags.resolve(eeye, kv);
            eeye_opt.vocab_size = eeye_flags.vocab_size;
            pipeline::cmd_eval_eye(eeye_opt);
        } else if (active == pattn) {
            pipeline::cmd_predict_attn(pattn_opt);
        } else if (active == tsum) {
            auto kv = maybe_kv(config_path);
            pipeline::reject_unknown_keys(kv, SumFlags::known_keys(), name);
            tsum_opt.config = tsum_flags.resolve(tsum, kv);
            pipeline::cmd_train_sum(tsum_opt);
        } else if (active == esum) {
            pipeline::cmd_eval_sum(esum_opt);
        } else if (active == ctrl) {
            auto kv = maybe_kv(config_path);
            pipeline::reject_unknown_keys(kv, SumFlags::known_keys(), name);
            ctrl_opt.config = ctrl_flags.resolve(ctrl, kv);
            pipeline::cmd_control_random(ctrl_opt);
        } else if (active == hmap) {
            pipeline::cmd_heatmap(hmap_opt);
        } else if (active == rep) {
            pipeline::cmd_report(rep_opt);
        }
    } catch (const std::exception& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return kExitBase.at(name);
    }
    return 0;
}

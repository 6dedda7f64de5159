#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "codegaze/corpus.hpp"
#include "codegaze/eyemodel.hpp"
#include "codegaze/summarizer.hpp"

namespace codegaze::pipeline {

// Flat key=value config text; '#' starts a comment line. Unknown keys are
// rejected by the consuming command.
std::map<std::string, std::string> load_kv_config(const std::string& path);
void reject_unknown_keys(const std::map<std::string, std::string>& kv,
                         const std::set<std::string>& known, const std::string& context);

// Every command writes <out_dir>/<command>.manifest.json with its resolved
// options, inputs, outputs, and warnings; no timestamps, so reruns with the
// same options are byte-identical.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const nlohmann::json& body);

struct CorpusPrepareOptions {
    std::string in_path;
    std::string out_dir = ".";
    double top_fraction = 0.10;
    bool dedup = true;
    std::set<std::string> exclude_projects;
    corpus::SplitRatios ratios;
};
void cmd_corpus_prepare(const CorpusPrepareOptions& opt);

struct GazeIngestOptions {
    std::string corpus_path;
    std::string fixations_path;
    std::string out_dir = ".";
    int m_cap = ast::kDefaultNodeCap;
};
void cmd_gaze_ingest(const GazeIngestOptions& opt);

struct TrainEyeOptions {
    std::string corpus_path;       // methods the gaze data refers to
    std::string ptgt_path;         // gaze-ingest output
    std::string out_dir = ".";
    eye::EyeModelConfig config;
    int vocab_size = 10000;
    int checkpoint_every = 0;      // 0 = final only
};
void cmd_train_eye(const TrainEyeOptions& opt);

struct EvalEyeOptions {
    std::string corpus_path;
    std::string ptgt_path;
    std::string out_dir = ".";
    eye::EyeModelConfig config;
    int vocab_size = 10000;
};
void cmd_eval_eye(const EvalEyeOptions& opt);

struct PredictAttnOptions {
    std::string corpus_path;
    std::string checkpoint_path;
    std::string out_dir = ".";
};
void cmd_predict_attn(const PredictAttnOptions& opt);

struct TrainSumOptions {
    std::string train_corpus_path;
    std::string attention_path;  // augmented variant only
    std::string out_dir = ".";
    summ::SummaryModelConfig config;
};
void cmd_train_sum(const TrainSumOptions& opt);

struct EvalSumOptions {
    std::string checkpoint_path;
    std::string test_corpus_path;
    std::string attention_path;  // augmented checkpoints only
    std::string out_dir = ".";
    std::string report_name = "eval_sum";
};
void cmd_eval_sum(const EvalSumOptions& opt);

struct ControlRandomOptions {
    std::string attention_path;  // model-predicted attention, source of lo/hi
    std::string train_corpus_path;
    std::string test_corpus_path;
    std::string out_dir = ".";
    summ::SummaryModelConfig config;  // forced to augmented
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
};
void cmd_control_random(const ControlRandomOptions& opt);

struct HeatmapOptions {
    std::string corpus_path;
    std::string attention_path;
    std::string method_id;
    std::string source_kind = "predicted";  // human | predicted
    std::string out_path;
};
void cmd_heatmap(const HeatmapOptions& opt);

struct ReportOptions {
    std::string scores_a_path;  // MetricReport json of system A
    std::string scores_b_path;  // MetricReport json of system B
    std::string out_dir = ".";
};
void cmd_report(const ReportOptions& opt);

// ---- shared building blocks (exposed for tests and the acceptance suite) ----

struct EyeDataset {
    ast::Vocabulary vocab;
    std::map<std::string, eye::EncodedMethod> methods;
    std::vector<gaze::PtgtSample> samples;
    std::map<std::string, std::map<std::string, gaze::PtgtVector>> ptgt;  // method -> programmer
    std::vector<std::string> alignment_failures;
};

EyeDataset build_eye_dataset(const std::string& corpus_path, const std::string& ptgt_path,
                             const eye::EyeModelConfig& config, int vocab_size);

// Attention export rows {method_id, node_labels, ptgt_hat}.
struct AttentionRow {
    std::string method_id;
    std::vector<std::string> node_labels;
    std::vector<double> ptgt_hat;
};
std::vector<AttentionRow> read_attention_jsonl(const std::string& path);
void write_attention_jsonl(const std::string& path, const std::vector<AttentionRow>& rows);

eye::EyeModel load_eye_checkpoint(const std::string& path);
summ::SummaryModel load_sum_checkpoint(const std::string& path);

// Inter-programmer agreement over methods every programmer saw: pearson of
// each programmer's concatenated ptgt against the programmer average.
std::map<std::string, double> programmer_agreement(
    const std::map<std::string, std::map<std::string, gaze::PtgtVector>>& ptgt);

// Hold-out-one-programmer-and-method protocol over the methods every
// programmer saw: trains one model per fold and tracks the mean test
// correlation by epoch.
struct FoldProtocolResult {
    long fold_count = 0;
    int best_epoch = 0;
    double best_mean_correlation = -1.0;
    std::vector<double> mean_correlation_by_epoch;  // NaN when all folds degenerate
    long degenerate_evaluations = 0;
};

FoldProtocolResult run_fold_protocol(const EyeDataset& ds, const eye::EyeModelConfig& cfg);

}  // namespace codegaze::pipeline

#include "codegaze/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "codegaze/checkpoint_io.hpp"
#include "codegaze/heatmap.hpp"
#include "codegaze/metrics.hpp"

namespace fs = std::filesystem;

namespace codegaze::pipeline {

namespace {

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << content;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

nlohmann::json read_json_file(const std::string& path) {
    return nlohmann::json::parse(read_text(path));
}

}  // namespace

std::map<std::string, std::string> load_kv_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string trimmed;
        for (char c : line)
            if (c != '\r') trimmed += c;
        size_t first = trimmed.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (trimmed[first] == '#') continue;
        size_t eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + " is not key=value");
        auto strip = [](std::string s) {
            size_t a = s.find_first_not_of(" \t");
            size_t b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = strip(trimmed.substr(0, eq));
        std::string value = strip(trimmed.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + " has empty key");
        if (kv.count(key)) throw ConfigError("duplicate config key '" + key + "'");
        kv[key] = value;
    }
    return kv;
}

void reject_unknown_keys(const std::map<std::string, std::string>& kv,
                         const std::set<std::string>& known, const std::string& context) {
    for (const auto& [key, value] : kv)
        if (!known.count(key))
            throw ConfigError("unknown config key '" + key + "' for " + context);
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const nlohmann::json& body) {
    ensure_dir(out_dir);
    nlohmann::json manifest = body;
    manifest["command"] = command;
    write_text(join_path(out_dir, command + ".manifest.json"), manifest.dump(2) + "\n");
}

// ---- corpus-prepare -----------------------------------------------------------

void cmd_corpus_prepare(const CorpusPrepareOptions& opt) {
    auto records = corpus::read_corpus_jsonl(opt.in_path);
    auto prepared =
        corpus::prepare_corpus(records, opt.top_fraction, opt.dedup, opt.exclude_projects, opt.ratios);
    ensure_dir(opt.out_dir);
    corpus::write_corpus_jsonl(join_path(opt.out_dir, "train.jsonl"), prepared.train);
    corpus::write_corpus_jsonl(join_path(opt.out_dir, "val.jsonl"), prepared.val);
    corpus::write_corpus_jsonl(join_path(opt.out_dir, "test.jsonl"), prepared.test);

    nlohmann::json manifest{
        {"in_path", opt.in_path},
        {"top_fraction", opt.top_fraction},
        {"dedup", opt.dedup},
        {"exclude_projects", std::vector<std::string>(opt.exclude_projects.begin(),
                                                      opt.exclude_projects.end())},
        {"ratios", {{"train", opt.ratios.train}, {"val", opt.ratios.val}, {"test", opt.ratios.test}}},
        {"input_methods", records.size()},
        {"kept_methods", prepared.kept_methods},
        {"duplicates_removed", prepared.duplicates_removed},
        {"parse_failures", prepared.parse_failures},
        {"excluded_methods", prepared.excluded_methods},
        {"split_sizes",
         {{"train", prepared.train.size()}, {"val", prepared.val.size()}, {"test", prepared.test.size()}}},
        {"project_split", prepared.project_split},
        {"outputs", {"train.jsonl", "val.jsonl", "test.jsonl"}}};
    write_manifest(opt.out_dir, "corpus_prepare", manifest);
    std::cout << "corpus-prepare: kept " << prepared.kept_methods << " methods ("
              << prepared.train.size() << "/" << prepared.val.size() << "/"
              << prepared.test.size() << " train/val/test)\n";
}

// ---- gaze-ingest ----------------------------------------------------------------

void cmd_gaze_ingest(const GazeIngestOptions& opt) {
    auto records = corpus::read_corpus_jsonl(opt.corpus_path);
    struct Parsed {
        ast::AstGraph graph;
        std::vector<std::string> visible;
    };
    std::map<std::string, Parsed> methods;
    std::vector<std::string> parse_failures;
    for (const auto& rec : records) {
        try {
            ast::AstGraph g = ast::parse_method(rec.source, rec.id);
            std::vector<std::string> visible;
            for (int idx : ast::linearize(g))
                if (g.nodes[static_cast<size_t>(idx)].visible)
                    visible.push_back(g.nodes[static_cast<size_t>(idx)].label);
            methods.emplace(rec.id, Parsed{std::move(g), std::move(visible)});
        } catch (const ParseError& e) {
            parse_failures.push_back(rec.id + ": " + e.what());
        }
    }

    auto ingest = gaze::ingest_fixations(opt.fixations_path);
    std::map<std::pair<std::string, std::string>, std::vector<gaze::FixationRecord>> grouped;
    std::set<std::string> unknown_methods;
    for (const auto& rec : ingest.records) {
        if (!methods.count(rec.method_id)) {
            unknown_methods.insert(rec.method_id);
            continue;
        }
        grouped[{rec.programmer_id, rec.method_id}].push_back(rec);
    }

    std::vector<std::string> excluded;
    std::ostringstream out_rows;
    long emitted = 0;
    for (const auto& [key, recs] : grouped) {
        const auto& [programmer, method] = key;
        const Parsed& parsed = methods.at(method);
        try {
            // the fixation file's own token text must agree with the parser
            for (const auto& r : recs) {
                std::string lowered = r.token_text;
                for (auto& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                if (r.token_index < static_cast<int>(parsed.visible.size()) && !lowered.empty() &&
                    lowered != parsed.visible[static_cast<size_t>(r.token_index)]) {
                    std::ostringstream diff;
                    diff << "token " << r.token_index << " is '"
                         << parsed.visible[static_cast<size_t>(r.token_index)]
                         << "' in the parse but '" << lowered << "' in the fixation file";
                    throw AlignError(diff.str());
                }
            }
            auto gv = gaze::aggregate_gaze(recs, method, programmer,
                                           static_cast<int>(parsed.visible.size()));
            auto pv = gaze::compute_ptgt(gv);
            nlohmann::json row{{"method_id", method}, {"programmer_id", programmer}, {"ptgt", pv.ptgt}};
            out_rows << row.dump() << "\n";
            ++emitted;
        } catch (const AlignError& e) {
            excluded.push_back("(" + programmer + ", " + method + "): " + e.what());
        } catch (const EmptyGazeError& e) {
            excluded.push_back("(" + programmer + ", " + method + "): " + e.what());
        }
    }
    ensure_dir(opt.out_dir);
    write_text(join_path(opt.out_dir, "ptgt.jsonl"), out_rows.str());

    nlohmann::json manifest{{"corpus_path", opt.corpus_path},
                            {"fixations_path", opt.fixations_path},
                            {"m_cap", opt.m_cap},
                            {"fixations_kept", ingest.records.size()},
                            {"fixations_dropped_short", ingest.dropped_short},
                            {"parse_failures", parse_failures},
                            {"unknown_methods",
                             std::vector<std::string>(unknown_methods.begin(), unknown_methods.end())},
                            {"excluded_pairs", excluded},
                            {"ptgt_vectors", emitted},
                            {"outputs", {"ptgt.jsonl"}}};
    write_manifest(opt.out_dir, "gaze_ingest", manifest);
    std::cout << "gaze-ingest: " << emitted << " ptgt vectors, " << ingest.dropped_short
              << " sub-threshold fixations dropped\n";
}

// ---- shared eye dataset ---------------------------------------------------------

EyeDataset build_eye_dataset(const std::string& corpus_path, const std::string& ptgt_path,
                             const eye::EyeModelConfig& config, int vocab_size) {
    auto records = corpus::read_corpus_jsonl(corpus_path);
    std::vector<ast::AstGraph> graphs;
    for (const auto& rec : records) graphs.push_back(ast::parse_method(rec.source, rec.id));

    EyeDataset ds;
    ds.vocab = ast::build_vocab(graphs, vocab_size);
    std::map<std::string, const ast::AstGraph*> by_id;
    for (const auto& g : graphs) {
        by_id[g.method_id] = &g;
        ds.methods.emplace(g.method_id, eye::encode_method(g, ds.vocab, config));
    }

    std::ifstream in(ptgt_path);
    if (!in) throw ConfigError("cannot open ptgt file " + ptgt_path);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw IngestError("malformed ptgt record", line_no);
        gaze::PtgtVector pv;
        pv.method_id = j.at("method_id").get<std::string>();
        pv.programmer_id = j.at("programmer_id").get<std::string>();
        pv.ptgt = j.at("ptgt").get<std::vector<double>>();
        auto it = by_id.find(pv.method_id);
        if (it == by_id.end()) {
            ds.alignment_failures.push_back(pv.method_id + ": not in corpus");
            continue;
        }
        try {
            auto samples =
                gaze::align_to_ast(pv, *it->second, ast::linearize(*it->second), config.m_cap);
            ds.samples.insert(ds.samples.end(), samples.begin(), samples.end());
            ds.ptgt[pv.method_id][pv.programmer_id] = pv;
        } catch (const AlignError& e) {
            ds.alignment_failures.push_back(e.what());
        }
    }
    return ds;
}

// ---- train-eye ------------------------------------------------------------------

void cmd_train_eye(const TrainEyeOptions& opt) {
    EyeDataset ds = build_eye_dataset(opt.corpus_path, opt.ptgt_path, opt.config, opt.vocab_size);
    if (ds.samples.empty()) throw ConfigError("train-eye: no usable samples");
    eye::EyeModel model = eye::EyeModel::init(opt.config, ds.vocab);
    ensure_dir(opt.out_dir);

    std::vector<nlohmann::json> loss_curve;
    auto save = [&](const eye::EyeModel& m, const std::string& name) {
        ckpt::save_checkpoint(join_path(opt.out_dir, name), m.named_params(), m.config.to_json(),
                              nlohmann::json{{"vocab", m.vocab.to_json()},
                                             {"kind", "eye"},
                                             {"pretrain_coverage", m.pretrain_coverage}});
    };
    // no validation split: the downstream checkpoint is the configured
    // eval epoch (clamped to the run length)
    int selected_epoch = std::min(opt.config.eval_epoch, opt.config.epochs);
    auto stats = eye::train_eye(model, ds.samples, ds.methods,
                                [&](int epoch, double loss, const eye::EyeModel& m) {
                                    loss_curve.push_back({{"epoch", epoch}, {"loss", loss}});
                                    if (opt.checkpoint_every > 0 && epoch % opt.checkpoint_every == 0)
                                        save(m, "eye_epoch" + std::to_string(epoch) + ".ckpt");
                                    if (epoch == selected_epoch) save(m, "eye_selected.ckpt");
                                });
    save(model, "eye.ckpt");

    nlohmann::json manifest{{"corpus_path", opt.corpus_path},
                            {"ptgt_path", opt.ptgt_path},
                            {"config", opt.config.to_json()},
                            {"vocab_size", ds.vocab.size()},
                            {"sample_count", ds.samples.size()},
                            {"alignment_failures", ds.alignment_failures},
                            {"pretrain_coverage", model.pretrain_coverage},
                            {"selected_epoch", selected_epoch},
                            {"loss_curve", loss_curve},
                            {"outputs", {"eye.ckpt", "eye_selected.ckpt"}}};
    write_manifest(opt.out_dir, "train_eye", manifest);
    std::cout << "train-eye: " << ds.samples.size() << " samples, final loss "
              << stats.back().loss << "\n";
}

// ---- eval-eye -------------------------------------------------------------------

std::map<std::string, double> programmer_agreement(
    const std::map<std::string, std::map<std::string, gaze::PtgtVector>>& ptgt) {
    std::set<std::string> programmers;
    for (const auto& [method, per_prog] : ptgt)
        for (const auto& [p, pv] : per_prog) programmers.insert(p);
    std::vector<std::string> common;
    for (const auto& [method, per_prog] : ptgt)
        if (per_prog.size() == programmers.size()) common.push_back(method);
    std::sort(common.begin(), common.end());
    std::map<std::string, double> out;
    if (common.empty() || programmers.size() < 2) return out;

    std::map<std::string, std::vector<double>> concat_own;
    std::map<std::string, std::vector<double>> concat_avg;
    for (const auto& method : common) {
        const auto& per_prog = ptgt.at(method);
        size_t len = per_prog.begin()->second.ptgt.size();
        std::vector<double> avg(len, 0.0);
        for (const auto& [p, pv] : per_prog)
            for (size_t k = 0; k < len; ++k) avg[k] += pv.ptgt[k];
        for (auto& v : avg) v /= static_cast<double>(per_prog.size());
        for (const auto& [p, pv] : per_prog) {
            auto& own = concat_own[p];
            own.insert(own.end(), pv.ptgt.begin(), pv.ptgt.end());
            auto& ca = concat_avg[p];
            ca.insert(ca.end(), avg.begin(), avg.end());
        }
    }
    for (const auto& p : programmers) {
        try {
            out[p] = metrics::pearson(concat_own.at(p), concat_avg.at(p));
        } catch (const DegenerateCorrelation&) {
            // skipped: degenerate agreement rows are left out of the table
        }
    }
    return out;
}

FoldProtocolResult run_fold_protocol(const EyeDataset& ds, const eye::EyeModelConfig& cfg) {
    std::set<std::string> programmers;
    for (const auto& s : ds.samples) programmers.insert(s.programmer_id);
    std::map<std::string, std::set<std::string>> method_programmers;
    for (const auto& s : ds.samples) method_programmers[s.method_id].insert(s.programmer_id);
    std::set<std::string> common;
    for (const auto& [m, ps] : method_programmers)
        if (ps == programmers) common.insert(m);
    if (common.empty())
        throw ConfigError("fold protocol: no method has samples from every programmer");
    auto folds = eye::make_folds(programmers, common, ds.samples);

    FoldProtocolResult result;
    result.fold_count = static_cast<long>(folds.size());
    std::vector<double> sums(static_cast<size_t>(cfg.epochs), 0.0);
    std::vector<long> counts(static_cast<size_t>(cfg.epochs), 0);
    for (const auto& fold : folds) {
        eye::EyeModel model = eye::EyeModel::init(cfg, ds.vocab);
        eye::train_eye(model, fold.train, ds.methods,
                       [&](int epoch, double, const eye::EyeModel& m) {
                           auto res = eye::evaluate_correlation(m, fold, ds.methods);
                           if (res.r) {
                               sums[static_cast<size_t>(epoch - 1)] += *res.r;
                               ++counts[static_cast<size_t>(epoch - 1)];
                           } else {
                               ++result.degenerate_evaluations;
                           }
                       });
    }
    for (int e = 0; e < cfg.epochs; ++e) {
        double mean = counts[static_cast<size_t>(e)]
                          ? sums[static_cast<size_t>(e)] / counts[static_cast<size_t>(e)]
                          : std::nan("");
        result.mean_correlation_by_epoch.push_back(mean);
        if (!std::isnan(mean) && mean > result.best_mean_correlation) {
            result.best_mean_correlation = mean;
            result.best_epoch = e + 1;
        }
    }
    return result;
}

void cmd_eval_eye(const EvalEyeOptions& opt) {
    EyeDataset ds = build_eye_dataset(opt.corpus_path, opt.ptgt_path, opt.config, opt.vocab_size);
    if (ds.samples.empty()) throw ConfigError("eval-eye: no usable samples");

    std::set<std::string> programmers;
    for (const auto& s : ds.samples) programmers.insert(s.programmer_id);
    std::map<std::string, std::set<std::string>> method_programmers;
    for (const auto& s : ds.samples) method_programmers[s.method_id].insert(s.programmer_id);
    std::set<std::string> common;
    for (const auto& [m, ps] : method_programmers)
        if (ps == programmers) common.insert(m);
    if (common.empty())
        throw ConfigError("eval-eye: no method has samples from every programmer");

    auto folds = eye::make_folds(programmers, common, ds.samples);
    int pick = std::min(opt.config.eval_epoch, opt.config.epochs);

    // table[method][programmer] = r at the picked epoch
    std::map<std::string, std::map<std::string, std::optional<double>>> table;
    nlohmann::json fold_curves = nlohmann::json::array();
    for (const auto& fold : folds) {
        eye::EyeModel model = eye::EyeModel::init(opt.config, ds.vocab);
        std::vector<std::optional<double>> curve(static_cast<size_t>(opt.config.epochs));
        eye::train_eye(model, fold.train, ds.methods,
                       [&](int epoch, double loss, const eye::EyeModel& m) {
                           (void)loss;
                           curve[static_cast<size_t>(epoch - 1)] =
                               eye::evaluate_correlation(m, fold, ds.methods).r;
                       });
        table[fold.held_method][fold.held_programmer] = curve[static_cast<size_t>(pick - 1)];
        nlohmann::json jc = nlohmann::json::array();
        for (const auto& r : curve) jc.push_back(r ? nlohmann::json(*r) : nlohmann::json());
        fold_curves.push_back({{"held_programmer", fold.held_programmer},
                               {"held_method", fold.held_method},
                               {"correlation_by_epoch", jc}});
    }

    auto agreement = programmer_agreement(ds.ptgt);

    // Correlation table: methods as rows, programmers as columns, plus the
    // per-programmer and per-method averages and the programmer-agreement row.
    std::ostringstream out;
    auto fmt = [](const std::optional<double>& v) {
        if (!v) return std::string("  N/A");
        std::ostringstream s;
        s << std::fixed << std::setprecision(3) << std::setw(5) << *v;
        return s.str();
    };
    out << "            ";
    for (const auto& p : programmers) out << std::setw(8) << p;
    out << std::setw(8) << "avg." << "\n";
    std::map<std::string, std::vector<double>> per_programmer;
    double grand_sum = 0.0;
    long grand_n = 0;
    for (const auto& [method, row] : table) {
        out << std::setw(12) << method;
        double sum = 0.0;
        long n = 0;
        for (const auto& p : programmers) {
            auto it = row.find(p);
            std::optional<double> r = it == row.end() ? std::nullopt : it->second;
            out << std::setw(8) << fmt(r);
            if (r) {
                sum += *r;
                ++n;
                per_programmer[p].push_back(*r);
                grand_sum += *r;
                ++grand_n;
            }
        }
        out << std::setw(8) << (n ? fmt(sum / n) : fmt(std::nullopt)) << "\n";
    }
    out << std::setw(12) << "m. avg.";
    for (const auto& p : programmers) {
        const auto& rs = per_programmer[p];
        if (rs.empty()) {
            out << std::setw(8) << fmt(std::nullopt);
            continue;
        }
        double s = 0.0;
        for (double r : rs) s += r;
        out << std::setw(8) << fmt(s / static_cast<double>(rs.size()));
    }
    out << std::setw(8) << (grand_n ? fmt(grand_sum / grand_n) : fmt(std::nullopt)) << "\n";
    out << std::setw(12) << "p. avg.";
    double agree_sum = 0.0;
    long agree_n = 0;
    for (const auto& p : programmers) {
        auto it = agreement.find(p);
        if (it == agreement.end()) {
            out << std::setw(8) << fmt(std::nullopt);
            continue;
        }
        out << std::setw(8) << fmt(it->second);
        agree_sum += it->second;
        ++agree_n;
    }
    out << std::setw(8) << (agree_n ? fmt(agree_sum / agree_n) : fmt(std::nullopt)) << "\n";
    std::cout << out.str();

    ensure_dir(opt.out_dir);
    write_text(join_path(opt.out_dir, "eval_eye_table.txt"), out.str());
    nlohmann::json manifest{{"corpus_path", opt.corpus_path},
                            {"ptgt_path", opt.ptgt_path},
                            {"config", opt.config.to_json()},
                            {"fold_count", folds.size()},
                            {"picked_epoch", pick},
                            {"mean_correlation", grand_n ? nlohmann::json(grand_sum / grand_n)
                                                         : nlohmann::json()},
                            {"mean_programmer_agreement",
                             agree_n ? nlohmann::json(agree_sum / agree_n) : nlohmann::json()},
                            {"fold_curves", fold_curves},
                            {"outputs", {"eval_eye_table.txt"}}};
    write_manifest(opt.out_dir, "eval_eye", manifest);
}

// ---- predict-attn ----------------------------------------------------------------

std::vector<AttentionRow> read_attention_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open attention file " + path);
    std::vector<AttentionRow> rows;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw IngestError("malformed attention record", line_no);
        AttentionRow row;
        row.method_id = j.at("method_id").get<std::string>();
        row.node_labels = j.at("node_labels").get<std::vector<std::string>>();
        row.ptgt_hat = j.at("ptgt_hat").get<std::vector<double>>();
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_attention_jsonl(const std::string& path, const std::vector<AttentionRow>& rows) {
    std::ostringstream out;
    for (const auto& row : rows) {
        nlohmann::json j{{"method_id", row.method_id},
                         {"node_labels", row.node_labels},
                         {"ptgt_hat", row.ptgt_hat}};
        out << j.dump() << "\n";
    }
    write_text(path, out.str());
}

eye::EyeModel load_eye_checkpoint(const std::string& path) {
    auto loaded = ckpt::load_checkpoint(path);
    if (loaded.extra.value("kind", std::string()) != "eye")
        throw ConfigError(path + " is not an eye model checkpoint");
    eye::EyeModelConfig cfg = eye::EyeModelConfig::from_json(loaded.config);
    ast::Vocabulary vocab = ast::Vocabulary::from_json(loaded.extra.at("vocab"));
    eye::EyeModelConfig init_cfg = cfg;
    init_cfg.pretrain_embedding_path.clear();  // weights come from the file
    eye::EyeModel model = eye::EyeModel::init(init_cfg, vocab);
    model.config = cfg;
    for (auto& [name, tensor] : model.named_params()) {
        auto it = loaded.params.find(name);
        if (it == loaded.params.end())
            throw ConfigError("checkpoint missing tensor '" + name + "'");
        if (it->second.shape() != tensor.shape())
            throw ConfigError("checkpoint tensor '" + name + "' has shape " +
                              nd::shape_str(it->second.shape()) + ", expected " +
                              nd::shape_str(tensor.shape()));
        tensor.value() = it->second.value();
    }
    return model;
}

void cmd_predict_attn(const PredictAttnOptions& opt) {
    eye::EyeModel model = load_eye_checkpoint(opt.checkpoint_path);
    auto records = corpus::read_corpus_jsonl(opt.corpus_path);
    std::vector<AttentionRow> rows;
    std::vector<std::string> parse_failures;
    for (const auto& rec : records) {
        try {
            ast::AstGraph g = ast::parse_method(rec.source, rec.id);
            eye::EncodedMethod m = eye::encode_method(g, model.vocab, model.config);
            AttentionRow row;
            row.method_id = rec.id;
            row.node_labels = m.labels;
            row.ptgt_hat = model.predict_attention_vector(m);
            rows.push_back(std::move(row));
        } catch (const ParseError& e) {
            parse_failures.push_back(rec.id + ": " + e.what());
        }
    }
    ensure_dir(opt.out_dir);
    write_attention_jsonl(join_path(opt.out_dir, "attention.jsonl"), rows);
    nlohmann::json manifest{{"corpus_path", opt.corpus_path},
                            {"checkpoint_path", opt.checkpoint_path},
                            {"methods", rows.size()},
                            {"parse_failures", parse_failures},
                            {"outputs", {"attention.jsonl"}}};
    write_manifest(opt.out_dir, "predict_attn", manifest);
    std::cout << "predict-attn: wrote attention for " << rows.size() << " methods\n";
}

// ---- train-sum -------------------------------------------------------------------

namespace {

struct SumDataset {
    ast::Vocabulary ast_vocab;
    ast::Vocabulary sum_vocab;
    std::vector<summ::SummarySample> samples;
    std::vector<std::string> skipped;  // methods without usable inputs
};

std::vector<int> ast_ids_of(const ast::AstGraph& g, const ast::Vocabulary& vocab, int max_len) {
    std::vector<int> ids;
    for (const auto& label : ast::preorder_labels(g)) {
        if (static_cast<int>(ids.size()) >= max_len) break;
        ids.push_back(vocab.id_of(label));
    }
    return ids;
}

SumDataset build_sum_dataset(const std::string& corpus_path, const std::string& attention_path,
                             const summ::SummaryModelConfig& cfg,
                             const ast::Vocabulary* fixed_ast_vocab,
                             const ast::Vocabulary* fixed_sum_vocab) {
    bool augmented = cfg.variant == summ::SummaryModelConfig::Variant::Augmented;
    auto records = corpus::read_corpus_jsonl(corpus_path);
    SumDataset ds;
    std::vector<ast::AstGraph> graphs;
    std::vector<const corpus::MethodRecord*> parsed_records;
    for (const auto& rec : records) {
        try {
            graphs.push_back(ast::parse_method(rec.source, rec.id));
            parsed_records.push_back(&rec);
        } catch (const ParseError& e) {
            ds.skipped.push_back(rec.id + ": " + e.what());
        }
    }
    if (graphs.empty()) throw ConfigError("no parseable methods in " + corpus_path);

    if (fixed_ast_vocab) {
        ds.ast_vocab = *fixed_ast_vocab;
    } else {
        ds.ast_vocab = ast::build_vocab(graphs, cfg.ast_vocab_size);
    }
    if (fixed_sum_vocab) {
        ds.sum_vocab = *fixed_sum_vocab;
    } else {
        std::vector<std::vector<std::string>> summaries;
        for (const auto* rec : parsed_records)
            summaries.push_back(summ::tokenize_summary(rec->summary, cfg.max_summary_len));
        ds.sum_vocab = ast::build_token_vocab(summaries, cfg.summary_vocab_size, true);
    }

    std::map<std::string, AttentionRow> attention;
    if (augmented)
        for (auto& row : read_attention_jsonl(attention_path))
            attention.emplace(row.method_id, std::move(row));

    for (size_t k = 0; k < graphs.size(); ++k) {
        const auto& g = graphs[k];
        const auto* rec = parsed_records[k];
        summ::SummarySample sample;
        sample.method_id = rec->id;
        sample.ast_ids = ast_ids_of(g, ds.ast_vocab, cfg.max_ast_len);
        sample.summary_ids =
            summ::summary_to_ids(summ::tokenize_summary(rec->summary, cfg.max_summary_len),
                                 ds.sum_vocab);
        if (augmented) {
            auto it = attention.find(rec->id);
            if (it == attention.end()) {
                ds.skipped.push_back(rec->id + ": no attention row");
                continue;
            }
            if (it->second.ptgt_hat.size() < sample.ast_ids.size()) {
                ds.skipped.push_back(rec->id + ": attention shorter than the AST sequence");
                continue;
            }
            std::vector<double> raw(it->second.ptgt_hat.begin(),
                                    it->second.ptgt_hat.begin() +
                                        static_cast<long>(sample.ast_ids.size()));
            sample.attention = summ::normalize_attention(raw, rec->id);
        }
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

void save_sum_checkpoint(const std::string& path, const summ::SummaryModel& model) {
    ckpt::save_checkpoint(path, model.named_params(), model.config.to_json(),
                          nlohmann::json{{"ast_vocab", model.ast_vocab.to_json()},
                                         {"sum_vocab", model.sum_vocab.to_json()},
                                         {"kind", "sum"}});
}

}  // namespace

summ::SummaryModel load_sum_checkpoint(const std::string& path) {
    auto loaded = ckpt::load_checkpoint(path);
    if (loaded.extra.value("kind", std::string()) != "sum")
        throw ConfigError(path + " is not a summarizer checkpoint");
    summ::SummaryModelConfig cfg = summ::SummaryModelConfig::from_json(loaded.config);
    ast::Vocabulary ast_vocab = ast::Vocabulary::from_json(loaded.extra.at("ast_vocab"));
    ast::Vocabulary sum_vocab = ast::Vocabulary::from_json(loaded.extra.at("sum_vocab"));
    summ::SummaryModel model = summ::SummaryModel::init(cfg, ast_vocab, sum_vocab);
    for (auto& [name, tensor] : model.named_params()) {
        auto it = loaded.params.find(name);
        if (it == loaded.params.end())
            throw ConfigError("checkpoint missing tensor '" + name + "'");
        if (it->second.shape() != tensor.shape())
            throw ConfigError("checkpoint tensor '" + name + "' shape mismatch");
        tensor.value() = it->second.value();
    }
    return model;
}

void cmd_train_sum(const TrainSumOptions& opt) {
    bool augmented = opt.config.variant == summ::SummaryModelConfig::Variant::Augmented;
    if (augmented && opt.attention_path.empty())
        throw ConfigError("train-sum: augmented variant needs --attention");
    SumDataset ds =
        build_sum_dataset(opt.train_corpus_path, opt.attention_path, opt.config, nullptr, nullptr);
    if (ds.samples.empty()) throw ConfigError("train-sum: no usable samples");

    summ::SummaryModel model = summ::SummaryModel::init(opt.config, ds.ast_vocab, ds.sum_vocab);
    std::vector<nlohmann::json> loss_curve;
    auto result = summ::train_summarizer(model, ds.samples, [&](int epoch, double loss) {
        loss_curve.push_back({{"epoch", epoch}, {"loss", loss}});
    });
    ensure_dir(opt.out_dir);
    std::string name = std::string("sum_") + model.config.variant_string() + ".ckpt";
    save_sum_checkpoint(join_path(opt.out_dir, name), model);

    nlohmann::json manifest{{"train_corpus_path", opt.train_corpus_path},
                            {"attention_path", opt.attention_path},
                            {"config", opt.config.to_json()},
                            {"sample_count", ds.samples.size()},
                            {"skipped", ds.skipped},
                            {"skipped_empty_summaries", result.skipped_empty},
                            {"output_input_width", model.output_input_width()},
                            {"loss_curve", loss_curve},
                            {"outputs", {name}}};
    write_manifest(opt.out_dir, std::string("train_sum_") + model.config.variant_string(), manifest);
    std::cout << "train-sum(" << model.config.variant_string() << "): " << ds.samples.size()
              << " samples, final loss " << result.epochs.back().loss << "\n";
}

void cmd_eval_sum(const EvalSumOptions& opt) {
    summ::SummaryModel model = load_sum_checkpoint(opt.checkpoint_path);
    bool augmented = model.config.variant == summ::SummaryModelConfig::Variant::Augmented;
    if (augmented && opt.attention_path.empty())
        throw ConfigError("eval-sum: augmented checkpoint needs --attention");
    SumDataset ds = build_sum_dataset(opt.test_corpus_path, opt.attention_path, model.config,
                                      &model.ast_vocab, &model.sum_vocab);
    if (ds.samples.empty()) throw ConfigError("eval-sum: no usable samples");

    std::vector<std::vector<std::string>> hypotheses, references;
    std::ostringstream predictions;
    auto rec_by_id = [&]() {
        std::map<std::string, std::string> m;
        for (const auto& rec : corpus::read_corpus_jsonl(opt.test_corpus_path))
            m[rec.id] = rec.summary;
        return m;
    }();
    for (const auto& sample : ds.samples) {
        auto hyp = model.generate(sample.ast_ids, sample.attention);
        auto ref = summ::tokenize_summary(rec_by_id.at(sample.method_id),
                                          model.config.max_summary_len);
        std::string hyp_text, ref_text;
        for (const auto& w : hyp) hyp_text += (hyp_text.empty() ? "" : " ") + w;
        for (const auto& w : ref) ref_text += (ref_text.empty() ? "" : " ") + w;
        nlohmann::json row{
            {"method_id", sample.method_id}, {"predicted", hyp_text}, {"reference", ref_text}};
        predictions << row.dump() << "\n";
        hypotheses.push_back(std::move(hyp));
        references.push_back(std::move(ref));
    }
    auto report = metrics::score_corpus(hypotheses, references);
    report.metadata = {{"checkpoint", opt.checkpoint_path},
                       {"variant", model.config.variant_string()},
                       {"test_corpus", opt.test_corpus_path}};
    ensure_dir(opt.out_dir);
    write_text(join_path(opt.out_dir, "predictions.jsonl"), predictions.str());
    write_text(join_path(opt.out_dir, opt.report_name + ".json"), report.to_json().dump(2) + "\n");

    nlohmann::json manifest{{"checkpoint_path", opt.checkpoint_path},
                            {"test_corpus_path", opt.test_corpus_path},
                            {"attention_path", opt.attention_path},
                            {"summary_count", report.summary_count},
                            {"mean_meteor", report.mean_meteor},
                            {"corpus_bleu", report.corpus_bleu_score},
                            {"skipped", ds.skipped},
                            {"outputs", {"predictions.jsonl", opt.report_name + ".json"}}};
    write_manifest(opt.out_dir, opt.report_name, manifest);
    std::cout << std::fixed << std::setprecision(4) << "eval-sum("
              << model.config.variant_string() << "): mean METEOR " << report.mean_meteor
              << ", corpus BLEU " << report.corpus_bleu_score << " over "
              << report.summary_count << " summaries\n";
}

// ---- control-random --------------------------------------------------------------

void cmd_control_random(const ControlRandomOptions& opt) {
    auto model_rows = read_attention_jsonl(opt.attention_path);
    if (model_rows.empty()) throw ConfigError("control-random: attention file is empty");
    double lo = model_rows[0].ptgt_hat.at(0), hi = lo;
    for (const auto& row : model_rows)
        for (double v : row.ptgt_hat) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(lo < hi)) throw ConfigError("control-random: degenerate attention range");

    summ::SummaryModelConfig cfg = opt.config;
    cfg.variant = summ::SummaryModelConfig::Variant::Augmented;

    std::vector<double> meteors, bleus;
    nlohmann::json runs = nlohmann::json::array();
    for (std::uint64_t seed : opt.seeds) {
        std::mt19937_64 rng(seed);
        std::vector<AttentionRow> control;
        for (const auto& row : model_rows) {
            AttentionRow c;
            c.method_id = row.method_id;
            c.node_labels = row.node_labels;
            c.ptgt_hat = summ::random_attention_raw(lo, hi,
                                                    static_cast<int>(row.ptgt_hat.size()), rng);
            control.push_back(std::move(c));
        }
        std::string run_dir = join_path(opt.out_dir, "control_seed" + std::to_string(seed));
        ensure_dir(run_dir);
        std::string attn_path = join_path(run_dir, "attention.jsonl");
        write_attention_jsonl(attn_path, control);

        summ::SummaryModelConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed ^ seed;
        cmd_train_sum({opt.train_corpus_path, attn_path, run_dir, run_cfg});
        EvalSumOptions ev;
        ev.checkpoint_path = join_path(run_dir, "sum_augmented.ckpt");
        ev.test_corpus_path = opt.test_corpus_path;
        ev.attention_path = attn_path;
        ev.out_dir = run_dir;
        cmd_eval_sum(ev);
        auto report = read_json_file(join_path(run_dir, "eval_sum.json"));
        double meteor = report.at("mean_meteor").get<double>();
        double bleu = report.at("corpus_bleu").get<double>();
        meteors.push_back(meteor);
        bleus.push_back(bleu);
        runs.push_back({{"seed", seed}, {"mean_meteor", meteor}, {"corpus_bleu", bleu}});
    }
    auto summarise = [](const std::vector<double>& v) {
        double lo = v[0], hi = v[0], mean = 0.0;
        for (double x : v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
            mean += x;
        }
        return nlohmann::json{
            {"min", lo}, {"mean", mean / static_cast<double>(v.size())}, {"max", hi}};
    };
    nlohmann::json manifest{{"attention_path", opt.attention_path},
                            {"train_corpus_path", opt.train_corpus_path},
                            {"test_corpus_path", opt.test_corpus_path},
                            {"config", cfg.to_json()},
                            {"range", {{"lo", lo}, {"hi", hi}}},
                            {"seeds", opt.seeds},
                            {"runs", runs},
                            {"meteor", summarise(meteors)},
                            {"bleu", summarise(bleus)}};
    write_manifest(opt.out_dir, "control_random", manifest);
    std::cout << std::fixed << std::setprecision(4) << "control-random: METEOR min/mean/max "
              << summarise(meteors).at("min").get<double>() << "/"
              << summarise(meteors).at("mean").get<double>() << "/"
              << summarise(meteors).at("max").get<double>() << " over " << opt.seeds.size()
              << " seeds\n";
}

// ---- heatmap ----------------------------------------------------------------------

void cmd_heatmap(const HeatmapOptions& opt) {
    auto records = corpus::read_corpus_jsonl(opt.corpus_path);
    const corpus::MethodRecord* rec = nullptr;
    for (const auto& r : records)
        if (r.id == opt.method_id) {
            rec = &r;
            break;
        }
    if (!rec) throw LookupError("method " + opt.method_id + " not found in " + opt.corpus_path);
    ast::AstGraph g = ast::parse_method(rec->source, rec->id);

    std::vector<std::optional<double>> token_values;
    std::vector<std::string> node_labels;
    std::vector<double> node_values;
    if (opt.source_kind == "human") {
        std::ifstream in(opt.attention_path);
        if (!in) throw ConfigError("cannot open ptgt file " + opt.attention_path);
        std::string line;
        bool found = false;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line);
            if (j.at("method_id").get<std::string>() != opt.method_id) continue;
            token_values = heatmap::cover_all(j.at("ptgt").get<std::vector<double>>());
            found = true;
            break;
        }
        if (!found)
            throw LookupError("no ptgt row for method " + opt.method_id + " in " +
                              opt.attention_path);
    } else if (opt.source_kind == "predicted") {
        auto rows = read_attention_jsonl(opt.attention_path);
        const AttentionRow* row = nullptr;
        for (const auto& r : rows)
            if (r.method_id == opt.method_id) {
                row = &r;
                break;
            }
        if (!row)
            throw LookupError("no attention row for method " + opt.method_id + " in " +
                              opt.attention_path);
        node_labels = row->node_labels;
        node_values = row->ptgt_hat;
        // tokens past the attention export's node cap stay unhighlighted
        auto order = ast::linearize(g);
        for (size_t pos = 0; pos < order.size(); ++pos) {
            if (!g.nodes[static_cast<size_t>(order[pos])].visible) continue;
            if (pos < row->ptgt_hat.size())
                token_values.push_back(row->ptgt_hat[pos]);
            else
                token_values.push_back(std::nullopt);
        }
    } else {
        throw ConfigError("heatmap source must be 'human' or 'predicted'");
    }

    std::string html = heatmap::render_html(rec->source, g, token_values, node_labels, node_values);
    write_text(opt.out_path, html);
    std::cout << "heatmap: wrote " << opt.out_path << "\n";
}

// ---- report -----------------------------------------------------------------------

void cmd_report(const ReportOptions& opt) {
    auto a = read_json_file(opt.scores_a_path);
    auto b = read_json_file(opt.scores_b_path);
    auto sa = a.at("per_summary_meteor").get<std::vector<double>>();
    auto sb = b.at("per_summary_meteor").get<std::vector<double>>();
    if (sa.size() != sb.size())
        throw ConfigError("report: score files cover different summary counts");

    nlohmann::json comparison{{"a", opt.scores_a_path},
                              {"b", opt.scores_b_path},
                              {"mean_meteor_a", a.at("mean_meteor")},
                              {"mean_meteor_b", b.at("mean_meteor")},
                              {"corpus_bleu_a", a.at("corpus_bleu")},
                              {"corpus_bleu_b", b.at("corpus_bleu")}};
    std::ostringstream line;
    line << std::fixed << std::setprecision(4);
    try {
        auto t = metrics::paired_t_test(sa, sb);
        comparison["meteor_t"] = t.t;
        comparison["meteor_p_two_sided"] = t.p_two_sided;
        comparison["meteor_p_one_sided"] = t.p_one_sided;
        comparison["df"] = t.df;
        line << "paired t-test (METEOR): t=" << t.t << " p_two_sided=" << t.p_two_sided
             << " df=" << t.df << "\n";
    } catch (const DegenerateTest& e) {
        comparison["degenerate"] = e.what();
        line << "paired t-test (METEOR): degenerate (" << e.what() << ")\n";
    }
    std::cout << line.str();
    ensure_dir(opt.out_dir);
    write_manifest(opt.out_dir, "report", comparison);
}

}  // namespace codegaze::pipeline

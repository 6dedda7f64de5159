#include "codegaze/eyemodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "codegaze/metrics.hpp"

namespace codegaze::eye {

void EyeModelConfig::validate() const {
    if (m_cap < 1 || embed_dim < 1 || epochs < 1 || batch_size < 1 || gnn_hops < 1)
        throw ConfigError("eye model config: dimensions and epochs must be positive");
    if (arch == Arch::Rnn && rnn_hidden != embed_dim)
        throw ConfigError("eye model config: rnn_hidden must equal embed_dim so per-position "
                          "outputs share the focal embedding space");
    if (optimizer != "adam" && optimizer != "sgd")
        throw ConfigError("eye model config: optimizer must be adam or sgd");
    if (hidden_width < 0) throw ConfigError("eye model config: hidden_width must be >= 0");
}

EyeModelConfig::Arch EyeModelConfig::arch_from_string(const std::string& s) {
    if (s == "gnn") return Arch::Gnn;
    if (s == "rnn") return Arch::Rnn;
    throw ConfigError("unknown architecture '" + s + "' (expected gnn or rnn)");
}

std::string EyeModelConfig::arch_string() const { return arch == Arch::Gnn ? "gnn" : "rnn"; }

nlohmann::json EyeModelConfig::to_json() const {
    return nlohmann::json{{"arch", arch_string()},
                          {"pretrain_embedding_path", pretrain_embedding_path},
                          {"m_cap", m_cap},
                          {"embed_dim", embed_dim},
                          {"gnn_hops", gnn_hops},
                          {"rnn_hidden", rnn_hidden},
                          {"hidden_width", hidden_width},
                          {"epochs", epochs},
                          {"seed", seed},
                          {"optimizer", optimizer},
                          {"learning_rate", learning_rate},
                          {"batch_size", batch_size},
                          {"self_loops", self_loops},
                          {"eval_epoch", eval_epoch}};
}

EyeModelConfig EyeModelConfig::from_json(const nlohmann::json& j) {
    EyeModelConfig cfg;
    cfg.arch = arch_from_string(j.at("arch").get<std::string>());
    cfg.pretrain_embedding_path = j.value("pretrain_embedding_path", std::string());
    cfg.m_cap = j.at("m_cap").get<int>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.gnn_hops = j.at("gnn_hops").get<int>();
    cfg.rnn_hidden = j.at("rnn_hidden").get<int>();
    cfg.hidden_width = j.value("hidden_width", 0);
    cfg.epochs = j.at("epochs").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.optimizer = j.value("optimizer", std::string("adam"));
    cfg.learning_rate = j.value("learning_rate", 1e-3);
    cfg.batch_size = j.value("batch_size", 32);
    cfg.self_loops = j.value("self_loops", true);
    cfg.eval_epoch = j.value("eval_epoch", 70);
    cfg.validate();
    return cfg;
}

EncodedMethod encode_method(const ast::AstGraph& g, const ast::Vocabulary& vocab,
                            const EyeModelConfig& cfg) {
    EncodedMethod m;
    m.method_id = g.method_id;
    m.seq = ast::encode_sequence(g, vocab, cfg.m_cap);
    auto order = ast::linearize(g);
    auto adj = ast::adjacency(g, order, cfg.m_cap, cfg.self_loops);
    m.adj = nd::Tensor::from({cfg.m_cap, cfg.m_cap}, std::move(adj.data));
    for (int k = 0; k < m.seq.true_length; ++k)
        m.labels.push_back(g.nodes[static_cast<size_t>(order[static_cast<size_t>(k)])].label);
    return m;
}

double overlay_pretrained_embeddings(const std::string& path, const ast::Vocabulary& vocab,
                                     nd::Tensor& table) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open pretrained embedding file " + path);
    int dim = table.shape()[1];
    std::string line;
    long covered = 0;
    long line_no = 0;
    std::vector<char> seen(static_cast<size_t>(vocab.size()), 0);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string token;
        row >> token;
        std::vector<double> values;
        double v;
        while (row >> v) values.push_back(v);
        if (static_cast<int>(values.size()) != dim)
            throw ConfigError("pretrained embedding line " + std::to_string(line_no) + " has " +
                              std::to_string(values.size()) + " values, expected " +
                              std::to_string(dim));
        if (!vocab.contains(token)) continue;
        int id = vocab.id_of(token);
        if (seen[static_cast<size_t>(id)]) continue;
        seen[static_cast<size_t>(id)] = 1;
        ++covered;
        std::copy(values.begin(), values.end(),
                  table.value().begin() + static_cast<long>(id) * dim);
    }
    return static_cast<double>(covered) / static_cast<double>(vocab.size());
}

EyeModel EyeModel::init(const EyeModelConfig& cfg, const ast::Vocabulary& vocab) {
    cfg.validate();
    EyeModel model;
    model.config = cfg;
    model.vocab = vocab;
    std::mt19937_64 rng(cfg.seed);
    int n = cfg.embed_dim;
    model.embedding = nd::uniform_param({vocab.size(), n}, -0.1, 0.1, rng);
    if (cfg.arch == EyeModelConfig::Arch::Gnn) {
        for (int h = 0; h < cfg.gnn_hops; ++h) {
            model.gnn_W.push_back(nd::xavier_param(n, n, rng));
            model.gnn_b.push_back(nd::zeros_param({n}));
        }
    } else {
        model.rnn = nd::GruParams::init(n, cfg.rnn_hidden, rng);
    }
    long width = model.dense_input_width();
    if (cfg.hidden_width > 0) {
        model.hid_W = nd::xavier_param(static_cast<int>(width), cfg.hidden_width, rng);
        model.hid_b = nd::zeros_param({cfg.hidden_width});
        model.out_W = nd::xavier_param(cfg.hidden_width, 1, rng);
    } else {
        model.out_W = nd::xavier_param(static_cast<int>(width), 1, rng);
    }
    model.out_b = nd::zeros_param({1});
    if (!cfg.pretrain_embedding_path.empty())
        model.pretrain_coverage =
            overlay_pretrained_embeddings(cfg.pretrain_embedding_path, vocab, model.embedding);
    return model;
}

long EyeModel::dense_input_width() const {
    return static_cast<long>(config.m_cap + 1) * config.embed_dim;
}

std::vector<std::pair<std::string, nd::Tensor>> EyeModel::named_params() const {
    std::vector<std::pair<std::string, nd::Tensor>> out;
    out.emplace_back("embedding", embedding);
    for (size_t h = 0; h < gnn_W.size(); ++h) {
        out.emplace_back("gnn." + std::to_string(h) + ".W", gnn_W[h]);
        out.emplace_back("gnn." + std::to_string(h) + ".b", gnn_b[h]);
    }
    if (config.arch == EyeModelConfig::Arch::Rnn)
        for (auto& [name, t] : rnn.named("rnn")) out.emplace_back(name, t);
    if (config.hidden_width > 0) {
        out.emplace_back("hidden.W", hid_W);
        out.emplace_back("hidden.b", hid_b);
    }
    out.emplace_back("out.W", out_W);
    out.emplace_back("out.b", out_b);
    return out;
}

std::vector<nd::Tensor> EyeModel::params() const {
    std::vector<nd::Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

nd::Tensor EyeModel::node_states(const EncodedMethod& m) const {
    nd::Tensor states = nd::embed_lookup(embedding, m.seq.ids);
    if (config.arch == EyeModelConfig::Arch::Gnn) {
        for (size_t h = 0; h < gnn_W.size(); ++h)
            states = nd::gnn_hop(states, m.adj, gnn_W[h], gnn_b[h]);
        return states;
    }
    std::vector<nd::Tensor> rows;
    rows.reserve(static_cast<size_t>(config.m_cap));
    nd::Tensor h = nd::Tensor::zeros({config.rnn_hidden});
    for (int t = 0; t < config.m_cap; ++t) {
        h = nd::gru_cell(nd::row(states, t), h, rnn);
        rows.push_back(h);
    }
    return nd::stack_rows(rows);
}

nd::Tensor EyeModel::forward(const EncodedMethod& m, int focal_index) const {
    if (focal_index < 0 || focal_index >= m.seq.true_length)
        throw UsageError("focal index " + std::to_string(focal_index) +
                         " lands on padding (true length " +
                         std::to_string(m.seq.true_length) + ")");
    nd::Tensor states = node_states(m);
    nd::Tensor focal =
        nd::embed_lookup(embedding, {m.seq.ids[static_cast<size_t>(focal_index)]});
    nd::Tensor flat = nd::flatten(nd::concat({states, focal}, 0));
    nd::Tensor z;
    if (config.hidden_width > 0) {
        nd::Tensor hidden = nd::tanh(nd::add(nd::matmul(flat, hid_W), hid_b));
        z = nd::add(nd::matmul(hidden, out_W), out_b);
    } else {
        z = nd::add(nd::matmul(flat, out_W), out_b);
    }
    return nd::sigmoid(z);
}

double EyeModel::forward_ptgt(const EncodedMethod& m, int focal_index) const {
    return forward(m, focal_index).item();
}

std::vector<double> EyeModel::predict_attention_vector(const EncodedMethod& m) const {
    nd::Tensor states = node_states(m);
    const auto& sv = states.value();
    int n = config.embed_dim;
    long state_width = static_cast<long>(config.m_cap) * n;
    std::vector<double> out;
    out.reserve(static_cast<size_t>(m.seq.true_length));

    if (config.hidden_width > 0) {
        int hw = config.hidden_width;
        // Per hidden unit, the running dot product over the (fixed) state
        // block; each focal point continues the same accumulation.
        std::vector<double> partial(static_cast<size_t>(hw), 0.0);
        for (int u = 0; u < hw; ++u) {
            double acc = 0.0;
            for (long l = 0; l < state_width; ++l) acc += sv[l] * hid_W.value()[l * hw + u];
            partial[static_cast<size_t>(u)] = acc;
        }
        for (int focal = 0; focal < m.seq.true_length; ++focal) {
            int id = m.seq.ids[static_cast<size_t>(focal)];
            const double* emb = embedding.value().data() + static_cast<long>(id) * n;
            std::vector<double> hidden(static_cast<size_t>(hw));
            for (int u = 0; u < hw; ++u) {
                double acc = partial[static_cast<size_t>(u)];
                for (int j = 0; j < n; ++j)
                    acc += emb[j] * hid_W.value()[(state_width + j) * hw + u];
                hidden[static_cast<size_t>(u)] = std::tanh(acc + hid_b.value()[u]);
            }
            double z = 0.0;
            for (int u = 0; u < hw; ++u) z += hidden[static_cast<size_t>(u)] * out_W.value()[u];
            z += out_b.value()[0];
            out.push_back(1.0 / (1.0 + std::exp(-z)));
        }
        return out;
    }

    double partial = 0.0;
    for (long l = 0; l < state_width; ++l) partial += sv[l] * out_W.value()[l];
    for (int focal = 0; focal < m.seq.true_length; ++focal) {
        int id = m.seq.ids[static_cast<size_t>(focal)];
        const double* emb = embedding.value().data() + static_cast<long>(id) * n;
        double acc = partial;
        for (int j = 0; j < n; ++j) acc += emb[j] * out_W.value()[state_width + j];
        acc += out_b.value()[0];
        out.push_back(1.0 / (1.0 + std::exp(-acc)));
    }
    return out;
}

std::vector<EpochStats> train_eye(EyeModel& model, const std::vector<gaze::PtgtSample>& samples,
                                  const std::map<std::string, EncodedMethod>& methods,
                                  const EpochCallback& on_epoch) {
    if (samples.empty()) throw ConfigError("train_eye: no samples");
    for (const auto& s : samples)
        if (!methods.count(s.method_id))
            throw ConfigError("train_eye: no encoded method for sample on " + s.method_id);

    const EyeModelConfig& cfg = model.config;
    nd::Optimizer opt = cfg.optimizer == "sgd" ? nd::Optimizer::sgd(cfg.learning_rate)
                                               : nd::Optimizer::adam(cfg.learning_rate);
    std::mt19937_64 shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<nd::Tensor> params = model.params();

    std::vector<EpochStats> stats;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        nd::fisher_yates(order, shuffle_rng);
        double loss_acc = 0.0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            nd::Tape tape;
            std::vector<nd::Tensor> losses;
            for (size_t k = start; k < end; ++k) {
                const auto& sample = samples[order[k]];
                const EncodedMethod& m = methods.at(sample.method_id);
                nd::Tensor pred = model.forward(m, sample.focal_node_index);
                losses.push_back(nd::mse(pred, nd::Tensor::scalar(sample.target)));
            }
            nd::Tensor batch_loss = nd::mean_of(losses);
            loss_acc += batch_loss.item() * static_cast<double>(losses.size());
            tape.backward(batch_loss);
            opt.step(params);
        }
        EpochStats es{epoch, loss_acc / static_cast<double>(samples.size())};
        stats.push_back(es);
        if (on_epoch) on_epoch(epoch, es.loss, model);
    }
    return stats;
}

std::vector<Fold> make_folds(const std::set<std::string>& programmers,
                             const std::set<std::string>& common_methods,
                             const std::vector<gaze::PtgtSample>& all_samples) {
    // every common method must carry samples from every programmer
    std::string gaps;
    for (const auto& t : common_methods) {
        for (const auto& p : programmers) {
            bool found = false;
            for (const auto& s : all_samples)
                if (s.method_id == t && s.programmer_id == p) {
                    found = true;
                    break;
                }
            if (!found) gaps += " (" + p + ", " + t + ")";
        }
    }
    if (!gaps.empty())
        throw ConfigError("make_folds: common methods missing programmers:" + gaps);

    std::vector<Fold> folds;
    for (const auto& t : common_methods) {
        for (const auto& p : programmers) {
            Fold fold;
            fold.held_programmer = p;
            fold.held_method = t;
            for (const auto& s : all_samples) {
                if (s.programmer_id == p) {
                    if (s.method_id == t) fold.test.push_back(s);
                    continue;
                }
                if (s.method_id == t) continue;
                fold.train.push_back(s);
            }
            folds.push_back(std::move(fold));
        }
    }
    return folds;
}

CorrelationResult evaluate_correlation(const EyeModel& model, const Fold& fold,
                                       const std::map<std::string, EncodedMethod>& methods) {
    if (fold.test.empty()) throw UsageError("evaluate_correlation: empty test set");
    std::vector<double> predicted, actual;
    for (const auto& s : fold.test) {
        const EncodedMethod& m = methods.at(s.method_id);
        predicted.push_back(model.forward_ptgt(m, s.focal_node_index));
        actual.push_back(s.target);
    }
    try {
        return {metrics::pearson(predicted, actual)};
    } catch (const DegenerateCorrelation&) {
        return {std::nullopt};
    }
}

}  // namespace codegaze::eye

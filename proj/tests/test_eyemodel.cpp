#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <map>
#include <set>

#include "codegaze/eyemodel.hpp"
#include "testutil.hpp"

using namespace codegaze;
using eye::EncodedMethod;
using eye::EyeModel;
using eye::EyeModelConfig;

namespace {

EyeModelConfig tiny_config(EyeModelConfig::Arch arch, int m_cap = 16, int n = 6) {
    EyeModelConfig cfg;
    cfg.arch = arch;
    cfg.m_cap = m_cap;
    cfg.embed_dim = n;
    cfg.rnn_hidden = n;
    cfg.epochs = 5;
    cfg.seed = 7;
    return cfg;
}

struct Setup {
    ast::Vocabulary vocab;
    std::map<std::string, EncodedMethod> methods;
    std::vector<ast::AstGraph> graphs;
};

Setup make_setup(const EyeModelConfig& cfg, const std::vector<std::string>& sources) {
    Setup s;
    for (size_t k = 0; k < sources.size(); ++k)
        s.graphs.push_back(ast::parse_method(sources[k], "m" + std::to_string(k)));
    s.vocab = ast::build_vocab(s.graphs, 1000);
    for (const auto& g : s.graphs) {
        auto enc = eye::encode_method(g, s.vocab, cfg);
        s.methods.emplace(enc.method_id, std::move(enc));
    }
    return s;
}

}  // namespace

TEST_CASE("config validation") {
    EyeModelConfig cfg = tiny_config(EyeModelConfig::Arch::Rnn);
    cfg.rnn_hidden = cfg.embed_dim + 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config(EyeModelConfig::Arch::Gnn);
    cfg.optimizer = "newton";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(EyeModelConfig::arch_from_string("gnn") == EyeModelConfig::Arch::Gnn);
    CHECK_THROWS_AS(EyeModelConfig::arch_from_string("cnn"), ConfigError);

    auto round = EyeModelConfig::from_json(tiny_config(EyeModelConfig::Arch::Rnn).to_json());
    CHECK(round.arch == EyeModelConfig::Arch::Rnn);
    CHECK(round.m_cap == 16);
}

TEST_CASE("forward output lives strictly inside (0,1)") {
    for (auto arch : {EyeModelConfig::Arch::Gnn, EyeModelConfig::Arch::Rnn}) {
        EyeModelConfig cfg = tiny_config(arch);
        Setup s = make_setup(cfg, {"void f(){ a = b; }"});
        EyeModel model = EyeModel::init(cfg, s.vocab);
        const auto& m = s.methods.at("m0");
        for (int focal = 0; focal < m.seq.true_length; ++focal) {
            double p = model.forward_ptgt(m, focal);
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
    }
}

TEST_CASE("all-zero weights output one half everywhere") {
    EyeModelConfig cfg = tiny_config(EyeModelConfig::Arch::Gnn);
    Setup s = make_setup(cfg, {"void f(){ a = b; }"});
    EyeModel model = EyeModel::init(cfg, s.vocab);
    for (auto& p : model.params()) std::fill(p.value().begin(), p.value().end(), 0.0);
    const auto& m = s.methods.at("m0");
    for (int focal = 0; focal < m.seq.true_length; ++focal)
        CHECK(model.forward_ptgt(m, focal) == 0.5);
}

TEST_CASE("focal on padding is a usage error") {
    EyeModelConfig cfg = tiny_config(EyeModelConfig::Arch::Gnn, 32, 4);
    Setup s = make_setup(cfg, {"void f(){}"});
    EyeModel model = EyeModel::init(cfg, s.vocab);
    const auto& m = s.methods.at("m0");
    CHECK_THROWS_AS(model.forward_ptgt(m, m.seq.true_length), UsageError);
    CHECK_THROWS_AS(model.forward_ptgt(m, -1), UsageError);
}

TEST_CASE("gnn forward matches an independent scalar pipeline") {
    EyeModelConfig cfg = tiny_config(EyeModelConfig::Arch::Gnn, 8, 3);
    // six-node tree: unit function name x parameter_list ... keep it tiny
    Setup s = make_setup(cfg, {"void f(){}"});
    EyeModel model = EyeModel::init(cfg, s.vocab);
    const auto& m = s.methods.at("m0");
    int mc = cfg.m_cap, n = cfg.embed_dim;

    for (int focal : {0, 2, 5}) {
        // embeddings for the padded sequence
        std::vector<double> states(static_cast<size_t>(mc) * n);
        for (int k = 0; k < mc; ++k)
            for (int j = 0; j < n; ++j)
                states[static_cast<size_t>(k) * n + j] =
                    model.embedding.value()[static_cast<size_t>(m.seq.ids[k]) * n + j];
        for (int hop = 0; hop < cfg.gnn_hops; ++hop)
            states = testutil::naive_gnn_hop(states, mc, n, m.adj.value(),
                                             model.gnn_W[hop].value(), model.gnn_b[hop].value());
        double acc = 0.0;
        for (long l = 0; l < static_cast<long>(mc) * n; ++l)
            acc += states[static_cast<size_t>(l)] * model.out_W.value()[l];
        const double* emb =
            model.embedding.value().data() + static_cast<long>(m.seq.ids[focal]) * n;
        for (int j = 0; j < n; ++j)
            acc += emb[j] * model.out_W.value()[static_cast<long>(mc) * n + j];
        acc += model.out_b.value()[0];
        double expect = 1.0 / (1.0 + std::exp(-acc));
        CHECK(std::fabs(model.forward_ptgt(m, focal) - expect) <= 1e-12);
    }
}

TEST_CASE("attention vector reuse equals naive per-focal recomputation") {
    for (auto arch : {EyeModelConfig::Arch::Gnn, EyeModelConfig::Arch::Rnn}) {
        for (int hidden : {0, 5}) {
            EyeModelConfig cfg = tiny_config(arch, 24, 5);
            cfg.hidden_width = hidden;
            Setup s = make_setup(cfg, {"int pick(int a, int b) { if (a > b) return a; return b; }"});
            EyeModel model = EyeModel::init(cfg, s.vocab);
            const auto& m = s.methods.at("m0");
            auto batched = model.predict_attention_vector(m);
            REQUIRE(batched.size() == static_cast<size_t>(m.seq.true_length));
            for (int focal = 0; focal < m.seq.true_length; ++focal) {
                double naive = model.forward_ptgt(m, focal);
                CHECK(batched[static_cast<size_t>(focal)] == naive);  // exact reuse
                CHECK(batched[static_cast<size_t>(focal)] > 0.0);
                CHECK(batched[static_cast<size_t>(focal)] < 1.0);
            }
        }
    }
}

TEST_CASE("single-node sequences produce length-one attention") {
    EyeModelConfig cfg = tiny_config(EyeModelConfig::Arch::Gnn, 4, 3);
    ast::AstGraph g;
    g.method_id = "one";
    g.nodes.push_back({"unit", false, std::nullopt});
    ast::Vocabulary vocab = ast::build_vocab({&g}, 10);
    auto enc = eye::encode_method(g, vocab, cfg);
    EyeModel model = EyeModel::init(cfg, vocab);
    CHECK(model.predict_attention_vector(enc).size() == 1);
}

TEST_CASE("pretrained embedding overlay") {
    EyeModelConfig cfg = tiny_config(EyeModelConfig::Arch::Gnn, 8, 3);
    Setup s = make_setup(cfg, {"void f(){}"});

    auto write_file = [](const std::string& path, const std::string& content) {
        std::ofstream out(path);
        out << content;
    };
    std::string dir = "pretrain_test_";

    SUBCASE("full coverage") {
        std::string path = dir + "full.txt";
        std::string content;
        for (int id = 0; id < s.vocab.size(); ++id)
            content += s.vocab.token_of(id) + " 0.5 0.25 -0.125\n";
        write_file(path, content);
        EyeModel model = EyeModel::init(cfg, s.vocab);
        double coverage = eye::overlay_pretrained_embeddings(path, s.vocab, model.embedding);
        CHECK(coverage == 1.0);
        for (int id = 0; id < s.vocab.size(); ++id)
            CHECK(model.embedding.value()[static_cast<size_t>(id) * 3] == 0.5);
        std::remove(path.c_str());
    }
    SUBCASE("empty file leaves the random init untouched") {
        std::string path = dir + "empty.txt";
        write_file(path, "");
        EyeModel a = EyeModel::init(cfg, s.vocab);
        EyeModel b = EyeModel::init(cfg, s.vocab);
        double coverage = eye::overlay_pretrained_embeddings(path, s.vocab, b.embedding);
        CHECK(coverage == 0.0);
        CHECK(a.embedding.value() == b.embedding.value());
        std::remove(path.c_str());
    }
    SUBCASE("partial coverage touches exactly the listed rows") {
        std::string path = dir + "half.txt";
        write_file(path, s.vocab.token_of(2) + " 9 9 9\nunlisted_token 1 2 3\n");
        EyeModel before = EyeModel::init(cfg, s.vocab);
        EyeModel model = EyeModel::init(cfg, s.vocab);
        double coverage = eye::overlay_pretrained_embeddings(path, s.vocab, model.embedding);
        CHECK(coverage == doctest::Approx(1.0 / s.vocab.size()));
        for (int id = 0; id < s.vocab.size(); ++id)
            for (int j = 0; j < 3; ++j) {
                double got = model.embedding.value()[static_cast<size_t>(id) * 3 + j];
                if (id == 2) CHECK(got == 9.0);
                else CHECK(got == before.embedding.value()[static_cast<size_t>(id) * 3 + j]);
            }
        std::remove(path.c_str());
    }
    SUBCASE("dimension mismatch is a config error") {
        std::string path = dir + "dims.txt";
        write_file(path, s.vocab.token_of(2) + " 1 2\n");
        EyeModel model = EyeModel::init(cfg, s.vocab);
        CHECK_THROWS_AS(eye::overlay_pretrained_embeddings(path, s.vocab, model.embedding),
                        ConfigError);
        std::remove(path.c_str());
    }
}

namespace {

std::vector<gaze::PtgtSample> synthetic_samples(const std::set<std::string>& programmers,
                                                const std::set<std::string>& methods,
                                                int tokens_per_method) {
    std::vector<gaze::PtgtSample> samples;
    std::mt19937_64 rng(5);
    for (const auto& m : methods)
        for (const auto& p : programmers)
            for (int k = 0; k < tokens_per_method; ++k)
                samples.push_back({m, p, k, nd::uniform_in(rng, 0.0, 1.0)});
    return samples;
}

}  // namespace

TEST_CASE("fold protocol") {
    SUBCASE("nine programmers by four methods is 36 folds") {
        std::set<std::string> programmers, methods;
        for (int p = 0; p < 9; ++p) programmers.insert("p" + std::to_string(p));
        for (int t = 0; t < 4; ++t) methods.insert("t" + std::to_string(t));
        auto samples = synthetic_samples(programmers, methods, 3);
        auto folds = eye::make_folds(programmers, methods, samples);
        CHECK(folds.size() == 36);
        for (const auto& fold : folds) {
            for (const auto& s : fold.train) {
                CHECK(s.programmer_id != fold.held_programmer);
                CHECK(s.method_id != fold.held_method);
            }
            for (const auto& s : fold.test) {
                CHECK(s.programmer_id == fold.held_programmer);
                CHECK(s.method_id == fold.held_method);
            }
            CHECK_FALSE(fold.test.empty());
        }
    }
    SUBCASE("two programmers by one method is 2 folds") {
        std::set<std::string> programmers = {"p0", "p1"};
        std::set<std::string> methods = {"t0"};
        auto samples = synthetic_samples(programmers, methods, 2);
        CHECK(eye::make_folds(programmers, methods, samples).size() == 2);
    }
    SUBCASE("missing programmer on a common method is a config error") {
        std::set<std::string> programmers = {"p0", "p1"};
        std::set<std::string> methods = {"t0"};
        std::vector<gaze::PtgtSample> samples = {{"t0", "p0", 0, 0.5}};
        CHECK_THROWS_WITH_AS(eye::make_folds(programmers, methods, samples),
                             doctest::Contains("p1"), ConfigError);
    }
    SUBCASE("training samples from other methods of the held programmer are excluded") {
        std::set<std::string> programmers = {"p0", "p1"};
        std::set<std::string> methods = {"t0"};
        auto samples = synthetic_samples(programmers, methods, 2);
        samples.push_back({"other_method", "p0", 0, 0.3});
        samples.push_back({"other_method", "p1", 0, 0.4});
        auto folds = eye::make_folds(programmers, methods, samples);
        for (const auto& fold : folds) {
            bool held_p0 = fold.held_programmer == "p0";
            for (const auto& s : fold.train)
                if (s.method_id == "other_method")
                    CHECK(s.programmer_id == (held_p0 ? "p1" : "p0"));
        }
    }
}

TEST_CASE("correlation evaluation") {
    EyeModelConfig cfg = tiny_config(EyeModelConfig::Arch::Gnn, 24, 4);
    Setup s = make_setup(cfg, {"int pick(int a, int b) { if (a > b) return a; return b; }"});
    EyeModel model = EyeModel::init(cfg, s.vocab);
    const auto& m = s.methods.at("m0");

    eye::Fold fold;
    fold.held_programmer = "p0";
    fold.held_method = "m0";
    SUBCASE("predictions equal to targets give r = 1") {
        for (int k = 0; k < 5; ++k)
            fold.test.push_back({"m0", "p0", k, model.forward_ptgt(m, k)});
        auto res = eye::evaluate_correlation(model, fold, s.methods);
        REQUIRE(res.r.has_value());
        CHECK(*res.r == 1.0);
    }
    SUBCASE("affine transforms of the predictions keep r = 1") {
        for (int k = 0; k < 5; ++k)
            fold.test.push_back({"m0", "p0", k, 0.25 * model.forward_ptgt(m, k) + 0.1});
        auto res = eye::evaluate_correlation(model, fold, s.methods);
        REQUIRE(res.r.has_value());
        CHECK(*res.r == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant targets are degenerate") {
        for (int k = 0; k < 5; ++k) fold.test.push_back({"m0", "p0", k, 0.5});
        auto res = eye::evaluate_correlation(model, fold, s.methods);
        CHECK_FALSE(res.r.has_value());
    }
}

TEST_CASE("training behaviour") {
    EyeModelConfig cfg = tiny_config(EyeModelConfig::Arch::Gnn, 20, 5);
    Setup s = make_setup(cfg, {"void f(){ a = b + c; }", "int g(int a){ return a; }"});

    std::vector<gaze::PtgtSample> samples;
    std::mt19937_64 rng(17);
    for (const auto& [id, m] : s.methods)
        for (int k = 0; k < m.seq.true_length; k += 3)
            samples.push_back({id, "p0", k, nd::uniform_in(rng, 0.05, 0.95)});

    SUBCASE("identical seeds give bit-identical losses") {
        EyeModel a = EyeModel::init(cfg, s.vocab);
        EyeModel b = EyeModel::init(cfg, s.vocab);
        auto stats_a = eye::train_eye(a, samples, s.methods);
        auto stats_b = eye::train_eye(b, samples, s.methods);
        REQUIRE(stats_a.size() == stats_b.size());
        for (size_t k = 0; k < stats_a.size(); ++k) CHECK(stats_a[k].loss == stats_b[k].loss);
    }

    SUBCASE("epoch-1 loss with zero dense layer matches the closed form") {
        EyeModelConfig full = cfg;
        full.batch_size = 1000;  // full batch: first reported loss predates any update
        full.epochs = 1;
        EyeModel model = EyeModel::init(full, s.vocab);
        std::fill(model.out_W.value().begin(), model.out_W.value().end(), 0.0);
        std::fill(model.out_b.value().begin(), model.out_b.value().end(), 0.0);
        auto stats = eye::train_eye(model, samples, s.methods);
        double expect = 0.0;
        for (const auto& smp : samples) expect += (0.5 - smp.target) * (0.5 - smp.target);
        expect /= static_cast<double>(samples.size());
        CHECK(stats[0].loss == doctest::Approx(expect).epsilon(1e-12));
    }

    SUBCASE("full-batch sgd decreases the loss on the overfit set") {
        EyeModelConfig sgd = cfg;
        sgd.optimizer = "sgd";
        sgd.learning_rate = 1e-2;
        sgd.batch_size = 1000;
        sgd.epochs = 60;
        EyeModel model = EyeModel::init(sgd, s.vocab);
        auto stats = eye::train_eye(model, samples, s.methods);
        CHECK(stats.back().loss < stats.front().loss);
    }

    SUBCASE("empty sample set is a config error") {
        EyeModel model = EyeModel::init(cfg, s.vocab);
        CHECK_THROWS_AS(eye::train_eye(model, {}, s.methods), ConfigError);
    }
}

TEST_CASE("adam overfits eight synthetic examples") {
    EyeModelConfig cfg = tiny_config(EyeModelConfig::Arch::Gnn, 16, 6);
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 8;
    cfg.epochs = 400;
    Setup s = make_setup(cfg, {"void f(){ a = b + c; }"});
    const auto& m = s.methods.at("m0");

    // focal points with pairwise-distinct labels, so the targets are separable
    std::vector<gaze::PtgtSample> samples;
    std::set<int> used_ids;
    for (int k = 0; k < m.seq.true_length && samples.size() < 8; ++k) {
        if (!used_ids.insert(m.seq.ids[static_cast<size_t>(k)]).second) continue;
        samples.push_back({"m0", "p0", k, 0.1 + 0.1 * static_cast<double>(samples.size())});
    }
    REQUIRE(samples.size() == 8);

    EyeModel model = EyeModel::init(cfg, s.vocab);
    auto stats = eye::train_eye(model, samples, s.methods);
    double final_loss = stats.back().loss;
    CHECK(final_loss < 1e-3);
    (void)m;
}

TEST_CASE("eye-rnn full forward gradients match finite differences") {
    EyeModelConfig cfg = tiny_config(EyeModelConfig::Arch::Rnn, 10, 4);
    Setup s = make_setup(cfg, {"void f(){ a = b; }"});
    EyeModel model = EyeModel::init(cfg, s.vocab);
    const auto& m = s.methods.at("m0");
    nd::Tensor target = nd::Tensor::scalar(0.42);
    auto build = [&]() { return nd::mse(model.forward(m, 3), target); };
    {
        nd::Tape tape;
        nd::Tensor loss = build();
        tape.backward(loss);
    }
    for (auto& p : model.params()) {
        auto analytic = p.grad();
        auto numeric = testutil::finite_diff([&]() { return build().item(); }, p);
        CHECK(testutil::max_rel_err(analytic, numeric) <= 1e-3);
        p.zero_grad();
    }
}

TEST_CASE("gnn states are equivariant under sibling subtree order") {
    // same labeled tree, siblings stored in either order: each node's state
    // must be unchanged up to its new position
    EyeModelConfig cfg = tiny_config(EyeModelConfig::Arch::Gnn, 8, 4);
    auto graph_with_order = [](bool swap) {
        ast::AstGraph g;
        g.method_id = swap ? "swapped" : "plain";
        // root -> (A -> C), B   in preorder storage
        g.nodes.push_back({"root", false, std::nullopt});
        if (!swap) {
            g.nodes.push_back({"a", false, std::nullopt});
            g.nodes.push_back({"c", false, std::nullopt});
            g.nodes.push_back({"b", false, std::nullopt});
            g.edges = {{0, 1}, {1, 2}, {0, 3}};
        } else {
            g.nodes.push_back({"b", false, std::nullopt});
            g.nodes.push_back({"a", false, std::nullopt});
            g.nodes.push_back({"c", false, std::nullopt});
            g.edges = {{0, 1}, {0, 2}, {2, 3}};
        }
        return g;
    };
    ast::AstGraph g1 = graph_with_order(false);
    ast::AstGraph g2 = graph_with_order(true);
    ast::Vocabulary vocab = ast::build_vocab(std::vector<const ast::AstGraph*>{&g1}, 100);
    EyeModel model = EyeModel::init(cfg, vocab);
    auto enc1 = eye::encode_method(g1, vocab, cfg);
    auto enc2 = eye::encode_method(g2, vocab, cfg);
    nd::Tensor s1 = model.node_states(enc1);
    nd::Tensor s2 = model.node_states(enc2);
    // label -> position maps: g1 preorder = root a c b; g2 preorder = root b a c
    std::map<std::string, int> pos1 = {{"root", 0}, {"a", 1}, {"c", 2}, {"b", 3}};
    std::map<std::string, int> pos2 = {{"root", 0}, {"b", 1}, {"a", 2}, {"c", 3}};
    for (const auto& [label, p1] : pos1) {
        int p2 = pos2.at(label);
        for (int k = 0; k < cfg.embed_dim; ++k) {
            double v1 = s1.at(p1, k);
            double v2 = s2.at(p2, k);
            double denom = std::max({std::fabs(v1), std::fabs(v2), 1e-300});
            CHECK(std::fabs(v1 - v2) / denom <= 1e-12);
        }
    }
}

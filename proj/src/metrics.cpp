#include "codegaze/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <tuple>

namespace codegaze::metrics {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw ShapeError("pearson: lengths differ (" + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()) + ")");
    size_t n = x.size();
    if (n < 2) throw UsageError("pearson needs at least two points");
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw DegenerateCorrelation("correlation of a constant vector is undefined");
    // Exactly proportional centered vectors hit +-1 without rounding drift.
    double c = 0.0;
    bool proportional = true;
    for (size_t i = 0; i < n && proportional; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        if (dx == 0.0) {
            proportional = dy == 0.0;
            continue;
        }
        if (c == 0.0) c = dy / dx;
        proportional = dy == c * dx;
    }
    if (proportional && c != 0.0) return c > 0.0 ? 1.0 : -1.0;
    double r = sxy / (std::sqrt(sxx) * std::sqrt(syy));
    return std::clamp(r, -1.0, 1.0);
}

// ---- BLEU --------------------------------------------------------------------

namespace {

std::map<std::string, long> ngram_counts(const std::vector<std::string>& toks, int n) {
    std::map<std::string, long> counts;
    if (static_cast<int>(toks.size()) < n) return counts;
    for (size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key;
        for (int k = 0; k < n; ++k) {
            key += toks[i + k];
            key += '\x01';
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

double corpus_bleu(const std::vector<std::vector<std::string>>& hypotheses,
                   const std::vector<std::vector<std::string>>& references, int max_n) {
    if (hypotheses.empty()) throw ConfigError("corpus_bleu: empty corpus");
    if (hypotheses.size() != references.size())
        throw ConfigError("corpus_bleu: hypothesis/reference counts differ");
    if (max_n < 1) throw ConfigError("corpus_bleu: max_n must be >= 1");

    std::vector<long> clipped(static_cast<size_t>(max_n), 0);
    std::vector<long> total(static_cast<size_t>(max_n), 0);
    long hyp_len = 0, ref_len = 0;
    for (size_t i = 0; i < hypotheses.size(); ++i) {
        hyp_len += static_cast<long>(hypotheses[i].size());
        ref_len += static_cast<long>(references[i].size());
        for (int n = 1; n <= max_n; ++n) {
            auto hc = ngram_counts(hypotheses[i], n);
            auto rc = ngram_counts(references[i], n);
            for (const auto& [gram, count] : hc) {
                auto it = rc.find(gram);
                clipped[n - 1] += std::min(count, it == rc.end() ? 0L : it->second);
            }
            total[n - 1] += std::max<long>(0, static_cast<long>(hypotheses[i].size()) - n + 1);
        }
    }
    if (hyp_len == 0) return 0.0;
    double log_p = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        if (clipped[n - 1] == 0 || total[n - 1] == 0) return 0.0;
        log_p += std::log(static_cast<double>(clipped[n - 1]) / total[n - 1]);
    }
    log_p /= max_n;
    double bp = hyp_len >= ref_len
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    return 100.0 * bp * std::exp(log_p);
}

// ---- Porter stemmer -------------------------------------------------------------

namespace {

struct Stemmer {
    std::string w;

    bool is_cons(size_t i) const {
        char c = w[i];
        if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return false;
        if (c == 'y') return i == 0 ? true : !is_cons(i - 1);
        return true;
    }

    // measure of w[0..end)
    int measure(size_t end) const {
        int m = 0;
        size_t i = 0;
        while (i < end && is_cons(i)) ++i;
        while (i < end) {
            while (i < end && !is_cons(i)) ++i;
            if (i >= end) break;
            ++m;
            while (i < end && is_cons(i)) ++i;
        }
        return m;
    }

    bool has_vowel(size_t end) const {
        for (size_t i = 0; i < end; ++i)
            if (!is_cons(i)) return true;
        return false;
    }

    bool ends(const char* suffix) const {
        size_t n = std::strlen(suffix);
        return w.size() >= n && w.compare(w.size() - n, n, suffix) == 0;
    }

    size_t stem_len(const char* suffix) const { return w.size() - std::strlen(suffix); }

    bool double_cons() const {
        size_t n = w.size();
        return n >= 2 && w[n - 1] == w[n - 2] && is_cons(n - 1);
    }

    // consonant-vowel-consonant ending where the final consonant is not w/x/y
    bool cvc(size_t end) const {
        if (end < 3) return false;
        if (!is_cons(end - 1) || is_cons(end - 2) || !is_cons(end - 3)) return false;
        char c = w[end - 1];
        return c != 'w' && c != 'x' && c != 'y';
    }

    bool replace(const char* suffix, const char* repl, int min_measure) {
        if (!ends(suffix)) return false;
        size_t stem = stem_len(suffix);
        if (measure(stem) <= min_measure) return true;  // matched but condition failed
        w = w.substr(0, stem) + repl;
        return true;
    }

    void step1a() {
        if (ends("sses")) w.resize(w.size() - 2);
        else if (ends("ies")) w.resize(w.size() - 2);
        else if (!ends("ss") && ends("s")) w.resize(w.size() - 1);
    }

    void step1b() {
        if (ends("eed")) {
            if (measure(stem_len("eed")) > 0) w.resize(w.size() - 1);
            return;
        }
        bool hit = false;
        if (ends("ed") && has_vowel(stem_len("ed"))) {
            w.resize(w.size() - 2);
            hit = true;
        } else if (ends("ing") && has_vowel(stem_len("ing"))) {
            w.resize(w.size() - 3);
            hit = true;
        }
        if (!hit) return;
        if (ends("at") || ends("bl") || ends("iz")) {
            w += "e";
        } else if (double_cons() && !ends("l") && !ends("s") && !ends("z")) {
            w.resize(w.size() - 1);
        } else if (measure(w.size()) == 1 && cvc(w.size())) {
            w += "e";
        }
    }

    void step1c() {
        if (ends("y") && has_vowel(stem_len("y"))) w[w.size() - 1] = 'i';
    }

    void step2() {
        static const std::pair<const char*, const char*> rules[] = {
            {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},  {"anci", "ance"},
            {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},    {"entli", "ent"},
            {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
            {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
            {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},  {"biliti", "ble"}};
        for (const auto& [suf, repl] : rules)
            if (replace(suf, repl, 0)) return;
    }

    void step3() {
        static const std::pair<const char*, const char*> rules[] = {
            {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
            {"ical", "ic"},  {"ful", ""},   {"ness", ""}};
        for (const auto& [suf, repl] : rules)
            if (replace(suf, repl, 0)) return;
    }

    void step4() {
        static const char* plain[] = {"al",  "ance", "ence", "er",   "ic",  "able", "ible",
                                      "ant", "ement", "ment", "ent"};
        for (const char* suf : plain) {
            if (ends(suf)) {
                if (measure(stem_len(suf)) > 1) w.resize(stem_len(suf));
                return;
            }
        }
        if (ends("ion")) {
            size_t stem = stem_len("ion");
            if (measure(stem) > 1 && stem >= 1 && (w[stem - 1] == 's' || w[stem - 1] == 't'))
                w.resize(stem);
            return;
        }
        static const char* rest[] = {"ou", "ism", "ate", "iti", "ous", "ive", "ize"};
        for (const char* suf : rest) {
            if (ends(suf)) {
                if (measure(stem_len(suf)) > 1) w.resize(stem_len(suf));
                return;
            }
        }
    }

    void step5() {
        if (ends("e")) {
            size_t stem = w.size() - 1;
            int m = measure(stem);
            if (m > 1 || (m == 1 && !cvc(stem))) w.resize(stem);
        }
        if (w.size() >= 2 && w[w.size() - 1] == 'l' && double_cons() && measure(w.size()) > 1)
            w.resize(w.size() - 1);
    }
};

}  // namespace

std::string porter_stem(const std::string& word) {
    if (word.size() <= 2) return word;
    Stemmer s{word};
    for (auto& c : s.w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    s.step1a();
    s.step1b();
    s.step1c();
    s.step2();
    s.step3();
    s.step4();
    s.step5();
    return s.w;
}

// ---- METEOR -------------------------------------------------------------------

namespace {

struct AlignBest {
    int exact = -1;
    int total = -1;
    int chunks = 1 << 20;

    bool improves(int e, int t, int c) const {
        return std::tie(e, t) > std::tie(exact, total) ||
               (e == exact && t == total && c < chunks);
    }
};

// Exhaustive alignment search, lexicographically maximizing
// (exact matches, total matches, -chunks). Candidates per hypothesis word are
// tiered: exact matches first, then stem matches.
struct AlignSearch {
    const std::vector<std::vector<int>>& exact_cand;
    const std::vector<std::vector<int>>& stem_cand;
    int hyp_len;
    int ref_len;
    AlignBest best;
    long budget = 2'000'000;

    std::vector<char> used;

    void run() {
        used.assign(static_cast<size_t>(ref_len), 0);
        recurse(0, 0, 0, 0, -2, -2);
    }

    void recurse(int i, int exact, int total, int chunks, int last_i, int last_j) {
        if (budget-- <= 0) return;
        int rem = hyp_len - i;
        if (exact + rem < best.exact) return;
        if (exact + rem == best.exact && total + rem < best.total) return;
        if (i == hyp_len) {
            if (best.improves(exact, total, chunks)) best = {exact, total, chunks};
            return;
        }
        for (int tier = 0; tier < 2; ++tier) {
            const auto& cands = tier == 0 ? exact_cand[i] : stem_cand[i];
            for (int j : cands) {
                if (used[j]) continue;
                used[j] = 1;
                int nc = chunks + ((last_i == i - 1 && last_j == j - 1) ? 0 : 1);
                recurse(i + 1, exact + (tier == 0 ? 1 : 0), total + 1, nc, i, j);
                used[j] = 0;
            }
        }
        recurse(i + 1, exact, total, chunks, last_i, last_j);
    }
};

}  // namespace

double meteor(const std::vector<std::string>& hypothesis,
              const std::vector<std::string>& reference, const MeteorParams& params) {
    if (hypothesis.empty() || reference.empty()) return 0.0;
    int hn = static_cast<int>(hypothesis.size());
    int rn = static_cast<int>(reference.size());
    std::vector<std::string> hyp_stem(hn), ref_stem(rn);
    for (int i = 0; i < hn; ++i) hyp_stem[i] = porter_stem(hypothesis[i]);
    for (int j = 0; j < rn; ++j) ref_stem[j] = porter_stem(reference[j]);

    std::vector<std::vector<int>> exact_cand(hn), stem_cand(hn);
    for (int i = 0; i < hn; ++i)
        for (int j = 0; j < rn; ++j) {
            if (hypothesis[i] == reference[j]) exact_cand[i].push_back(j);
            else if (hyp_stem[i] == ref_stem[j]) stem_cand[i].push_back(j);
        }

    AlignSearch search{exact_cand, stem_cand, hn, rn, {}, 2'000'000, {}};
    search.run();
    int m = search.best.total;
    int chunks = search.best.chunks;
    if (m <= 0) return 0.0;

    double precision = static_cast<double>(m) / hn;
    double recall = static_cast<double>(m) / rn;
    double f_mean = precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
    double penalty = params.gamma * std::pow(static_cast<double>(chunks) / m, params.beta);
    return f_mean * (1.0 - penalty);
}

// ---- Student's t ---------------------------------------------------------------

namespace {

double beta_cont_frac(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw UsageError("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw UsageError("incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cont_frac(a, b, x) / a;
    return 1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    double x = df / (df + t * t);
    double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
    return t >= 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("paired_t_test: lengths differ");
    size_t n = a.size();
    if (n < 2) throw UsageError("paired_t_test needs at least two pairs");
    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) throw DegenerateTest("paired differences have zero variance");
    TTestResult res;
    res.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    res.df = static_cast<long>(n) - 1;
    double df = static_cast<double>(res.df);
    res.p_two_sided = incomplete_beta(df / 2.0, 0.5, df / (df + res.t * res.t));
    res.p_one_sided = res.t > 0.0 ? res.p_two_sided / 2.0 : 1.0 - res.p_two_sided / 2.0;
    return res;
}

// ---- reporting -----------------------------------------------------------------

nlohmann::json MetricReport::to_json() const {
    return nlohmann::json{{"per_summary_meteor", per_summary_meteor},
                          {"mean_meteor", mean_meteor},
                          {"corpus_bleu", corpus_bleu_score},
                          {"summary_count", summary_count},
                          {"empty_pairs", empty_pairs},
                          {"meteor_variant", meteor_variant},
                          {"metadata", metadata}};
}

MetricReport score_corpus(const std::vector<std::vector<std::string>>& hypotheses,
                          const std::vector<std::vector<std::string>>& references,
                          const MeteorParams& params) {
    if (hypotheses.size() != references.size())
        throw ConfigError("score_corpus: hypothesis/reference counts differ");
    MetricReport report;
    report.summary_count = static_cast<long>(hypotheses.size());
    double acc = 0.0;
    for (size_t i = 0; i < hypotheses.size(); ++i) {
        if (hypotheses[i].empty() || references[i].empty()) ++report.empty_pairs;
        double s = meteor(hypotheses[i], references[i], params);
        report.per_summary_meteor.push_back(s);
        acc += s;
    }
    report.mean_meteor = hypotheses.empty() ? 0.0 : acc / static_cast<double>(hypotheses.size());
    report.corpus_bleu_score = corpus_bleu(hypotheses, references);
    return report;
}

}  // namespace codegaze::metrics

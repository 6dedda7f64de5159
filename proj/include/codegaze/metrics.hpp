#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "codegaze/errors.hpp"

namespace codegaze::metrics {

// Sample Pearson correlation; throws DegenerateCorrelation when either input
// is constant.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Cumulative corpus BLEU on [0,100]: corpus-level clipped n-gram precisions,
// uniform geometric mean, brevity penalty, hard zero when any order has no
// matches. One reference per hypothesis.
double corpus_bleu(const std::vector<std::vector<std::string>>& hypotheses,
                   const std::vector<std::vector<std::string>>& references, int max_n = 4);

struct MeteorParams {
    double alpha = 0.9;
    double beta = 3.0;
    double gamma = 0.5;
};

// Unigram-alignment METEOR with exact + stem matching (no synonym lexicon).
double meteor(const std::vector<std::string>& hypothesis,
              const std::vector<std::string>& reference, const MeteorParams& params = {});

std::string porter_stem(const std::string& word);

struct TTestResult {
    double t = 0.0;
    double p_two_sided = 1.0;
    double p_one_sided = 1.0;  // direction mean(a-b) > 0
    long df = 0;
};

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta I_x(a,b), abs err well under 1e-8.
double incomplete_beta(double a, double b, double x);
// P(T <= t) for Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

// Optional semantic-similarity hook. No implementation ships with the
// toolkit; external scorers can be plugged in at the reporting layer.
class SummarySimilarity {
  public:
    virtual ~SummarySimilarity() = default;
    virtual double score(const std::vector<std::string>& hypothesis,
                         const std::vector<std::string>& reference) const = 0;
    virtual std::string name() const = 0;
};

struct MetricReport {
    std::vector<double> per_summary_meteor;
    double mean_meteor = 0.0;
    double corpus_bleu_score = 0.0;
    long summary_count = 0;
    long empty_pairs = 0;  // pairs with an empty hypothesis or reference, scored 0
    std::string meteor_variant = "exact+stem (no synonym matching)";
    nlohmann::json metadata;

    nlohmann::json to_json() const;
};

MetricReport score_corpus(const std::vector<std::vector<std::string>>& hypotheses,
                          const std::vector<std::vector<std::string>>& references,
                          const MeteorParams& params = {});

}  // namespace codegaze::metrics

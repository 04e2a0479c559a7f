#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace tracelam {

// Empirical distribution of samples: exact counts for discrete data, a
// sorted array for continuous data.
struct EmpiricalDist {
  enum class Kind { Discrete, Continuous };
  Kind kind = Kind::Discrete;
  std::size_t n = 0;
  std::map<double, std::size_t> counts;  // Discrete
  std::vector<double> sorted;            // Continuous

  static EmpiricalDist discrete(std::span<const double> values);
  // rejects non-finite samples
  static EmpiricalDist continuous(std::span<const double> values);
};

struct GofResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Pearson chi-squared against expected point probabilities. Probabilities
// may sum to at most 1 + 1e-9; any deficit from 1 acts as a pooled tail
// bucket, which also absorbs cells with expected count below 5. Observed
// values outside the expected support must land in a tail with positive
// probability, otherwise DomainMismatchError.
GofResult chi_square_discrete(const EmpiricalDist& observed,
                              const std::map<double, double>& expected);

// Two-sample Pearson chi-squared test of homogeneity on pooled cells.
GofResult chi_square_two_sample(const EmpiricalDist& a,
                                const EmpiricalDist& b);

// Two-sample Kolmogorov-Smirnov with the asymptotic p-value.
GofResult ks_two_sample(const EmpiricalDist& a, const EmpiricalDist& b);

// Binned total variation distance, in [0, 1]. Continuous pairs share
// equal-probability bins computed from the pooled samples; discrete pairs
// use their exact joint support.
double tv_binned(const EmpiricalDist& a, const EmpiricalDist& b,
                 int bins = 50);

// Total variation of a discrete empirical distribution against exact point
// probabilities.
double tv_vs_probs(const EmpiricalDist& a,
                   const std::map<double, double>& probs);

// Regularized upper incomplete gamma Q(a, x); chi-squared survival function.
double gamma_q(double a, double x);
double chi_square_sf(double statistic, double dof);
// Kolmogorov distribution tail Q_KS(lambda).
double ks_tail(double lambda);

// JSON summary: count, mean, variance, quantiles, histogram.
std::string summary_json(const EmpiricalDist& d);

}  // namespace tracelam

#include "tracelam/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tracelam/errors.hpp"

#include "json.hpp"

namespace tracelam {

EmpiricalDist EmpiricalDist::discrete(std::span<const double> values) {
  EmpiricalDist d;
  d.kind = Kind::Discrete;
  d.n = values.size();
  for (double v : values) d.counts[v]++;
  return d;
}

EmpiricalDist EmpiricalDist::continuous(std::span<const double> values) {
  EmpiricalDist d;
  d.kind = Kind::Continuous;
  d.n = values.size();
  d.sorted.assign(values.begin(), values.end());
  for (double v : d.sorted)
    if (!std::isfinite(v))
      throw DomainMismatchError("continuous samples must be finite");
  std::sort(d.sorted.begin(), d.sorted.end());
  return d;
}

// --------------------------------------------------------------------------
// special functions
// --------------------------------------------------------------------------

namespace {

constexpr int kMaxIter = 500;
constexpr double kEps = 1e-15;

// series expansion of P(a, x), valid for x < a + 1
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < kMaxIter; i++) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// continued fraction for Q(a, x), valid for x >= a + 1 (modified Lentz)
double gamma_q_cf(double a, double x) {
  const double fpmin = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; i++) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0)
    throw DomainMismatchError("gamma_q requires a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi_square_sf(double statistic, double dof) {
  return gamma_q(dof / 2.0, statistic / 2.0);
}

double ks_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; j++) {
    double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  double q = 2.0 * sum;
  return std::clamp(q, 0.0, 1.0);
}

// --------------------------------------------------------------------------
// goodness of fit
// --------------------------------------------------------------------------

namespace {

constexpr double kMinExpected = 5.0;

struct Cell {
  double observed;
  double expected;
};

GofResult pearson(const std::vector<Cell>& cells) {
  GofResult r;
  if (cells.size() < 2) {
    // one bucket left after pooling: nothing to test
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  double stat = 0.0;
  for (const Cell& c : cells) {
    double d = c.observed - c.expected;
    stat += d * d / c.expected;
  }
  r.statistic = stat;
  r.p_value = chi_square_sf(stat, static_cast<double>(cells.size() - 1));
  return r;
}

}  // namespace

GofResult chi_square_discrete(const EmpiricalDist& observed,
                              const std::map<double, double>& expected) {
  if (observed.kind != EmpiricalDist::Kind::Discrete)
    throw KindMismatchError("chi_square_discrete needs a discrete sample");
  double total_p = 0.0;
  for (const auto& [v, p] : expected) {
    if (p < 0.0) throw DomainMismatchError("negative expected probability");
    total_p += p;
  }
  if (total_p > 1.0 + 1e-9)
    throw DomainMismatchError("expected probabilities sum to more than 1");

  double n = static_cast<double>(observed.n);
  double tail_p = std::max(0.0, 1.0 - total_p);
  double tail_obs = 0.0;
  for (const auto& [v, c] : observed.counts)
    if (expected.find(v) == expected.end())
      tail_obs += static_cast<double>(c);
  // impossible observations are only admissible inside a real tail bucket
  if (tail_obs > 0.0 && tail_p <= 0.0)
    throw DomainMismatchError(
        "observed values with zero expected probability and no tail bucket");

  std::vector<Cell> cells;
  for (const auto& [v, p] : expected) {
    auto it = observed.counts.find(v);
    double obs = it == observed.counts.end() ? 0.0
                                             : static_cast<double>(it->second);
    double exp_count = n * p;
    if (exp_count < kMinExpected) {
      tail_p += p;
      tail_obs += obs;
    } else {
      cells.push_back(Cell{obs, exp_count});
    }
  }
  if (tail_p > 0.0) {
    double tail_exp = n * tail_p;
    if (tail_exp >= kMinExpected || tail_obs > 0.0) {
      if (tail_exp < kMinExpected && !cells.empty()) {
        // merge the undersized tail into the smallest regular cell
        auto smallest = std::min_element(
            cells.begin(), cells.end(),
            [](const Cell& a, const Cell& b) { return a.expected < b.expected; });
        smallest->observed += tail_obs;
        smallest->expected += tail_exp;
      } else {
        cells.push_back(Cell{tail_obs, tail_exp});
      }
    }
  }
  return pearson(cells);
}

GofResult chi_square_two_sample(const EmpiricalDist& a,
                                const EmpiricalDist& b) {
  if (a.kind != EmpiricalDist::Kind::Discrete ||
      b.kind != EmpiricalDist::Kind::Discrete)
    throw KindMismatchError("chi_square_two_sample needs discrete samples");
  double na = static_cast<double>(a.n);
  double nb = static_cast<double>(b.n);
  if (na == 0.0 || nb == 0.0)
    throw DomainMismatchError("two-sample test needs nonempty samples");

  std::map<double, std::pair<double, double>> joint;
  for (const auto& [v, c] : a.counts) joint[v].first = static_cast<double>(c);
  for (const auto& [v, c] : b.counts) joint[v].second = static_cast<double>(c);

  // pool cells whose pooled count is too small for the asymptotics
  double pa = 0.0, pb = 0.0;
  std::vector<std::pair<double, double>> cells;
  for (const auto& [v, oc] : joint) {
    if (oc.first + oc.second < 2.0 * kMinExpected) {
      pa += oc.first;
      pb += oc.second;
    } else {
      cells.push_back(oc);
    }
  }
  if (pa + pb > 0.0) cells.emplace_back(pa, pb);
  if (cells.size() < 2) return GofResult{0.0, 1.0};

  double stat = 0.0;
  for (const auto& [oa, ob] : cells) {
    double pooled = (oa + ob) / (na + nb);
    double ea = na * pooled;
    double eb = nb * pooled;
    stat += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
  }
  GofResult r;
  r.statistic = stat;
  r.p_value = chi_square_sf(stat, static_cast<double>(cells.size() - 1));
  return r;
}

GofResult ks_two_sample(const EmpiricalDist& a, const EmpiricalDist& b) {
  if (a.kind != EmpiricalDist::Kind::Continuous ||
      b.kind != EmpiricalDist::Kind::Continuous)
    throw KindMismatchError("ks_two_sample needs continuous samples");
  if (a.n < 2 || b.n < 2)
    throw DomainMismatchError("ks_two_sample needs at least 2 samples each");

  const std::vector<double>& xa = a.sorted;
  const std::vector<double>& xb = b.sorted;
  double na = static_cast<double>(a.n);
  double nb = static_cast<double>(b.n);
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < xa.size() && j < xb.size()) {
    double x = std::min(xa[i], xb[j]);
    while (i < xa.size() && xa[i] <= x) i++;
    while (j < xb.size() && xb[j] <= x) j++;
    double fa = static_cast<double>(i) / na;
    double fb = static_cast<double>(j) / nb;
    d = std::max(d, std::fabs(fa - fb));
  }
  double ne = na * nb / (na + nb);
  double sq = std::sqrt(ne);
  double lambda = (sq + 0.12 + 0.11 / sq) * d;
  GofResult r;
  r.statistic = d;
  r.p_value = ks_tail(lambda);
  return r;
}

double tv_binned(const EmpiricalDist& a, const EmpiricalDist& b, int bins) {
  if (a.kind != b.kind) throw KindMismatchError("tv_binned needs equal kinds");
  double na = static_cast<double>(a.n);
  double nb = static_cast<double>(b.n);
  if (a.n == 0 || b.n == 0)
    throw DomainMismatchError("tv_binned needs nonempty samples");

  if (a.kind == EmpiricalDist::Kind::Discrete) {
    double tv = 0.0;
    auto ita = a.counts.begin();
    auto itb = b.counts.begin();
    while (ita != a.counts.end() || itb != b.counts.end()) {
      if (itb == b.counts.end() ||
          (ita != a.counts.end() && ita->first < itb->first)) {
        tv += static_cast<double>(ita->second) / na;
        ++ita;
      } else if (ita == a.counts.end() || itb->first < ita->first) {
        tv += static_cast<double>(itb->second) / nb;
        ++itb;
      } else {
        tv += std::fabs(static_cast<double>(ita->second) / na -
                        static_cast<double>(itb->second) / nb);
        ++ita;
        ++itb;
      }
    }
    return tv / 2.0;
  }

  if (bins < 2) throw DomainMismatchError("tv_binned needs at least 2 bins");
  std::vector<double> pooled;
  pooled.reserve(a.n + b.n);
  pooled.insert(pooled.end(), a.sorted.begin(), a.sorted.end());
  pooled.insert(pooled.end(), b.sorted.begin(), b.sorted.end());
  std::sort(pooled.begin(), pooled.end());
  // equal-probability bin edges from pooled quantiles
  std::vector<double> edges;
  edges.reserve(static_cast<std::size_t>(bins) - 1);
  for (int k = 1; k < bins; k++) {
    std::size_t idx = static_cast<std::size_t>(
        static_cast<double>(k) * static_cast<double>(pooled.size()) /
        static_cast<double>(bins));
    if (idx >= pooled.size()) idx = pooled.size() - 1;
    edges.push_back(pooled[idx]);
  }
  auto bin_fractions = [&edges, bins](const std::vector<double>& xs) {
    std::vector<double> frac(static_cast<std::size_t>(bins), 0.0);
    for (double x : xs) {
      std::size_t k = static_cast<std::size_t>(
          std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
      frac[k] += 1.0;
    }
    for (double& f : frac) f /= static_cast<double>(xs.size());
    return frac;
  };
  std::vector<double> fa = bin_fractions(a.sorted);
  std::vector<double> fb = bin_fractions(b.sorted);
  double tv = 0.0;
  for (std::size_t k = 0; k < fa.size(); k++) tv += std::fabs(fa[k] - fb[k]);
  return tv / 2.0;
}

double tv_vs_probs(const EmpiricalDist& a,
                   const std::map<double, double>& probs) {
  if (a.kind != EmpiricalDist::Kind::Discrete)
    throw KindMismatchError("tv_vs_probs needs a discrete sample");
  double n = static_cast<double>(a.n);
  double tv = 0.0;
  double covered = 0.0;
  for (const auto& [v, p] : probs) {
    auto it = a.counts.find(v);
    double hat = it == a.counts.end() ? 0.0 : static_cast<double>(it->second) / n;
    tv += std::fabs(hat - p);
    covered += p;
  }
  for (const auto& [v, c] : a.counts)
    if (probs.find(v) == probs.end()) tv += static_cast<double>(c) / n;
  tv += std::max(0.0, 1.0 - covered);
  return tv / 2.0;
}

std::string summary_json(const EmpiricalDist& d) {
  nlohmann::json j;
  j["n"] = d.n;
  std::vector<double> xs;
  if (d.kind == EmpiricalDist::Kind::Discrete) {
    j["kind"] = "discrete";
    for (const auto& [v, c] : d.counts)
      for (std::size_t i = 0; i < c; i++) xs.push_back(v);
  } else {
    j["kind"] = "continuous";
    xs = d.sorted;
  }
  if (xs.empty()) return j.dump();
  std::sort(xs.begin(), xs.end());
  double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var = xs.size() > 1 ? var / (n - 1.0) : 0.0;
  j["mean"] = mean;
  j["variance"] = var;
  j["min"] = xs.front();
  j["max"] = xs.back();
  auto quant = [&xs](double q) {
    double pos = q * (static_cast<double>(xs.size()) - 1.0);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, xs.size() - 1);
    double w = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - w) + xs[hi] * w;
  };
  j["quantiles"] = {{"p05", quant(0.05)}, {"p25", quant(0.25)},
                    {"p50", quant(0.50)}, {"p75", quant(0.75)},
                    {"p95", quant(0.95)}};
  int hb = 20;
  double lo = xs.front();
  double hi = xs.back();
  double width = (hi - lo) / hb;
  std::vector<std::size_t> hist(static_cast<std::size_t>(hb), 0);
  if (width > 0.0) {
    for (double x : xs) {
      int k = static_cast<int>((x - lo) / width);
      if (k >= hb) k = hb - 1;
      hist[static_cast<std::size_t>(k)]++;
    }
  } else {
    hist[0] = xs.size();
  }
  std::vector<double> edges;
  for (int k = 0; k <= hb; k++)
    edges.push_back(lo + width * static_cast<double>(k));
  j["histogram"] = {{"edges", edges}, {"counts", hist}};
  return j.dump();
}

}  // namespace tracelam

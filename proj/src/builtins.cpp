#include "tracelam/builtins.hpp"

#include <cmath>
#include <limits>

#include "tracelam/errors.hpp"

namespace tracelam {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_arity(std::size_t got, std::size_t want, const char* what,
                 Symbol id) {
  if (got != want)
    throw ArityMismatchError(std::string(what) + " '" + symbol_name(id) +
                             "' expects " + std::to_string(want) +
                             " arguments, got " + std::to_string(got));
}

}  // namespace

double gaussian_log_pdf(double mean, double variance, double x) {
  if (!(variance > 0.0) || !std::isfinite(variance)) return kNegInf;
  double d = x - mean;
  if (std::isnan(d)) return kNegInf;
  return -(d * d) / (2.0 * variance) - 0.5 * std::log(kTwoPi * variance);
}

double gaussian_pdf(double mean, double variance, double x) {
  if (!(variance > 0.0) || !std::isfinite(variance)) return 0.0;
  double d = x - mean;
  if (std::isnan(d)) return 0.0;
  return std::exp(-(d * d) / (2.0 * variance)) / std::sqrt(kTwoPi * variance);
}

void Registry::add_dist(DistSpec spec) { dists_[spec.id] = std::move(spec); }
void Registry::add_prim(PrimSpec spec) { prims_[spec.id] = std::move(spec); }

const DistSpec* Registry::find_dist(Symbol id) const {
  auto it = dists_.find(id);
  return it == dists_.end() ? nullptr : &it->second;
}
const PrimSpec* Registry::find_prim(Symbol id) const {
  auto it = prims_.find(id);
  return it == prims_.end() ? nullptr : &it->second;
}

const DistSpec& Registry::dist(Symbol id) const {
  const DistSpec* d = find_dist(id);
  if (d == nullptr)
    throw UnknownDistError("unknown distribution '" + symbol_name(id) + "'");
  return *d;
}
const PrimSpec& Registry::prim(Symbol id) const {
  const PrimSpec* p = find_prim(id);
  if (p == nullptr)
    throw UnknownPrimError("unknown primitive '" + symbol_name(id) + "'");
  return *p;
}

namespace {

Registry build_default_registry() {
  Registry reg;

  reg.add_dist(DistSpec{
      intern("rnd"), 0,
      [](std::span<const double>, double x) {
        return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0;
      },
      [](std::span<const double>, double x) {
        return (x >= 0.0 && x <= 1.0) ? 0.0 : kNegInf;
      },
      [](std::span<const double>, Rng& rng) {
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      }});

  reg.add_dist(DistSpec{
      intern("gaussian"), 2,
      [](std::span<const double> p, double x) {
        return gaussian_pdf(p[0], p[1], x);
      },
      [](std::span<const double> p, double x) {
        return gaussian_log_pdf(p[0], p[1], x);
      },
      [](std::span<const double> p, Rng& rng) {
        if (!(p[1] > 0.0) || !std::isfinite(p[1]) || !std::isfinite(p[0]))
          throw InvalidParamsError("gaussian requires finite mean and variance > 0");
        return std::normal_distribution<double>(p[0], std::sqrt(p[1]))(rng);
      }});

  auto prim2 = [&reg](const char* name, double (*fn)(double, double)) {
    Symbol id = intern(name);
    reg.add_prim(PrimSpec{
        id, 2, [fn](std::span<const double> a) { return fn(a[0], a[1]); }});
  };
  auto prim1 = [&reg](const char* name, double (*fn)(double)) {
    Symbol id = intern(name);
    reg.add_prim(
        PrimSpec{id, 1, [fn](std::span<const double> a) { return fn(a[0]); }});
  };

  prim2("+", [](double a, double b) { return a + b; });
  prim2("-", [](double a, double b) { return a - b; });
  prim2("*", [](double a, double b) { return a * b; });
  prim2("<", [](double a, double b) { return a < b ? 1.0 : 0.0; });
  prim2(">", [](double a, double b) { return a > b ? 1.0 : 0.0; });
  prim2("=", [](double a, double b) { return a == b ? 1.0 : 0.0; });
  prim1("exp", [](double a) { return std::exp(a); });
  prim1("sqr", [](double a) { return a * a; });

  return reg;
}

}  // namespace

const Registry& default_registry() {
  static const Registry* reg = new Registry(build_default_registry());
  return *reg;
}

double dist_pdf(const Registry& reg, Symbol dist, std::span<const double> params,
                double point) {
  const DistSpec& d = reg.dist(dist);
  check_arity(params.size(), d.arity, "distribution", dist);
  return d.pdf(params, point);
}

double dist_log_pdf(const Registry& reg, Symbol dist,
                    std::span<const double> params, double point) {
  const DistSpec& d = reg.dist(dist);
  check_arity(params.size(), d.arity, "distribution", dist);
  return d.log_pdf(params, point);
}

double apply_prim(const Registry& reg, Symbol prim,
                  std::span<const double> args) {
  const PrimSpec& p = reg.prim(prim);
  check_arity(args.size(), p.arity, "primitive", prim);
  return p.interp(args);
}

double sample_dist(const Registry& reg, Symbol dist,
                   std::span<const double> params, Rng& rng) {
  const DistSpec& d = reg.dist(dist);
  check_arity(params.size(), d.arity, "distribution", dist);
  return d.sample(params, rng);
}

}  // namespace tracelam

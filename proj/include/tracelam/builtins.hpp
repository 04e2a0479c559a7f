#pragma once

#include <functional>
#include <random>
#include <span>
#include <unordered_map>

#include "tracelam/symbol.hpp"

namespace tracelam {

using Rng = std::mt19937_64;

// A distribution identifier with its density and a forward sampler.
// pdf must be a sub-probability density: nonnegative, integral over the reals
// at most 1 for valid parameters. log_pdf is -inf exactly where pdf is 0.
struct DistSpec {
  Symbol id;
  std::size_t arity;
  std::function<double(std::span<const double>, double)> pdf;
  std::function<double(std::span<const double>, double)> log_pdf;
  // Draws a point whose law has the density above; throws InvalidParamsError
  // when the parameters admit no samples (e.g. Gaussian variance <= 0).
  std::function<double(std::span<const double>, Rng&)> sample;
};

// A function identifier with a total interpretation over the reals.
// Comparisons return 0.0 or 1.0.
struct PrimSpec {
  Symbol id;
  std::size_t arity;
  std::function<double(std::span<const double>)> interp;
};

class Registry {
 public:
  void add_dist(DistSpec spec);
  void add_prim(PrimSpec spec);
  const DistSpec* find_dist(Symbol id) const;
  const PrimSpec* find_prim(Symbol id) const;
  const DistSpec& dist(Symbol id) const;  // throws UnknownDistError
  const PrimSpec& prim(Symbol id) const;  // throws UnknownPrimError

 private:
  std::unordered_map<Symbol, DistSpec> dists_;
  std::unordered_map<Symbol, PrimSpec> prims_;
};

// rnd and gaussian(mean, variance); prims + - * < > = exp sqr.
const Registry& default_registry();

double dist_pdf(const Registry& reg, Symbol dist, std::span<const double> params,
                double point);
double dist_log_pdf(const Registry& reg, Symbol dist,
                    std::span<const double> params, double point);
double apply_prim(const Registry& reg, Symbol prim,
                  std::span<const double> args);
double sample_dist(const Registry& reg, Symbol dist,
                   std::span<const double> params, Rng& rng);

// Gaussian density parameterized by (mean, variance); 0 when variance <= 0.
double gaussian_pdf(double mean, double variance, double x);
double gaussian_log_pdf(double mean, double variance, double x);

}  // namespace tracelam

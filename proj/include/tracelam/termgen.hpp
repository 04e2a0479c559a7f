#pragma once

#include "tracelam/builtins.hpp"
#include "tracelam/eval.hpp"

namespace tracelam {

// Random closed terms for differential and property testing. The sampler is
// bounded-depth and biased toward well-formed redexes, with a slice of
// erroneous shapes (lambda arguments to draws and prims, non-boolean
// scrutinees, out-of-range scores) so failure paths get exercised too.
//
// Seed protocol: a suite derives one Rng from a fixed base seed and draws all
// cases from it sequentially, so case i is reproducible given (seed, i).
TermPtr gen_closed_term(Rng& rng, int max_depth = 6);

std::size_t count_draw_sites(const Term& t);

// Trace whose length is matched to the draw sites of t, give or take a couple
// of elements; values mix in-support and out-of-support points.
Trace gen_trace(const Term& t, Rng& rng);

}  // namespace tracelam

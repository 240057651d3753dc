#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "mst/graph.hpp"

namespace mst {

/// Builds the scalar loss on the given graph from the current parameter
/// values. Called repeatedly with fresh graphs while parameters are perturbed.
using LossBuilder = std::function<NodeId(Graph&)>;

/// abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
double relative_error(double analytic, double numeric);

struct GradCheckOptions {
    double h = 1e-5;       // central-difference step, must be in [1e-7, 1e-3]
    std::uint64_t seed = 0; // picks the coordinate sample when subsampling
    std::size_t max_coords_per_param = SIZE_MAX;
};

/// Central finite-difference verification of the tape gradients: computes the
/// analytic gradient once via backward(), then (f(t+h) - f(t-h)) / 2h per
/// checked coordinate, and returns the max relative error over coordinates.
/// Parameters are restored bit-exactly afterwards.
double grad_check(const LossBuilder& f, std::span<Parameter* const> params,
                  const GradCheckOptions& opt = {});

} // namespace mst

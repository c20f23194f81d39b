#pragma once

// Central-difference Jacobian shared by the equilibrium solver and the
// linearizer, so there is a single numerical-derivative code path.

#include <Eigen/Dense>

#include <functional>
#include <span>

namespace invstab {

using VectorFunction = std::function<void(std::span<const double> x, std::span<double> out)>;

struct StepRule {
    double relative = 1e-6;
    double absolute_pu = 1e-8;
    /// Multiplies every step; 0.5 is used for Richardson consistency checks.
    double factor = 1.0;
};

/// Step for coordinate j: factor * max(relative*|x_j|, absolute_pu*scale_j).
double difference_step(double x_j, double scale_j, const StepRule& rule);

/// d out_i / d x_j for an `n_out`-valued function. Throws NumericError naming
/// the entry when a derivative is not finite.
Eigen::MatrixXd central_jacobian(const VectorFunction& f, std::span<const double> x, std::size_t n_out,
                                 std::span<const double> scales, const StepRule& rule = {});

}  // namespace invstab

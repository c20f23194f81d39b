#pragma once

#include "invstab/errors.hpp"
#include "invstab/plant.hpp"

#include <optional>
#include <span>
#include <vector>

namespace invstab {

/// What the operating point must deliver. Droop modes adopt p_target as their
/// power reference; GFL solves its current references so that p and q hit the
/// targets; hybrid-PLL passes i_lq_ref through and uses p_target only for the
/// starting guess.
struct OperatingTarget {
    double p_target = 750.0;  // W
    double q_target = 0.0;    // var, GFL closure only
};

struct Equilibrium {
    NonlinearModel model;  // references closed at the operating point
    std::vector<double> x_star;
    double residual_inf = 0.0;  // per-unit rate, 1/s
    SignalSet signals;
    bool converged = false;
    int iterations = 0;
};

struct SolveOptions {
    int max_iterations = 60;
    double tolerance = 1e-10;
    /// Newton keeps iterating below the tolerance down to this floor.
    double polish = 1e-13;
    double min_step = 1.0 / 1048576.0;  // 2^-20
};

class EquilibriumError : public NumericError {
public:
    EquilibriumError(const std::string& what, double residual, std::vector<double> iterate)
        : NumericError(what), residual_(residual), iterate_(std::move(iterate)) {}
    double residual() const { return residual_; }
    const std::vector<double>& iterate() const { return iterate_; }

private:
    double residual_;
    std::vector<double> iterate_;
};

/// max_i |f_i(x)| / scale_i.
double residual(const NonlinearModel& m, std::span<const double> x);

/// Flat start: v_c at its reference, currents from p_target, integrators
/// consistent with that point and delta from the small-angle power-flow estimate
/// (or `delta0` when given).
std::vector<double> flat_start(const NonlinearModel& m, const OperatingTarget& target,
                               std::optional<double> delta0 = std::nullopt);

/// Damped Newton with the operating-target closure. Never throws on
/// non-convergence; inspect `converged`.
Equilibrium try_solve(const NonlinearModel& m, const OperatingTarget& target,
                      std::optional<std::span<const double>> guess = std::nullopt, const SolveOptions& opts = {});

/// As try_solve, plus the low-angle branch rule (retry from a flat start with
/// delta0 = 0.1 rad when delta* leaves (-pi/2, pi/2)). Throws EquilibriumError
/// whose message contains "no equilibrium" when nothing acceptable is found.
Equilibrium solve(const NonlinearModel& m, const OperatingTarget& target,
                  std::optional<std::span<const double>> guess = std::nullopt, const SolveOptions& opts = {});

}  // namespace invstab

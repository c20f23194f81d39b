#include "invstab/jacobian.hpp"

#include "invstab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace invstab {

double difference_step(double x_j, double scale_j, const StepRule& rule) {
    return rule.factor * std::max(rule.relative * std::abs(x_j), rule.absolute_pu * scale_j);
}

Eigen::MatrixXd central_jacobian(const VectorFunction& f, std::span<const double> x, std::size_t n_out,
                                 std::span<const double> scales, const StepRule& rule) {
    const std::size_t n = x.size();
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(n));
    std::vector<double> xp(x.begin(), x.end());
    std::vector<double> plus(n_out), minus(n_out);
    for (std::size_t j = 0; j < n; ++j) {
        const double h = difference_step(x[j], scales.empty() ? 1.0 : scales[j], rule);
        // Exact representable step so (x+h) - (x-h) == 2h.
        const volatile double up = x[j] + h;
        const volatile double down = x[j] - h;
        const double width = up - down;
        xp[j] = up;
        f(xp, plus);
        xp[j] = down;
        f(xp, minus);
        xp[j] = x[j];
        for (std::size_t i = 0; i < n_out; ++i) {
            const double d = (plus[i] - minus[i]) / width;
            if (!std::isfinite(d)) {
                throw NumericError("non-finite derivative d(" + std::to_string(i) + ")/d(" + std::to_string(j) + ")");
            }
            jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
        }
    }
    return jac;
}

}  // namespace invstab

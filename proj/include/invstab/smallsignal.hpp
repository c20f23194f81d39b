#pragma once

// =============================================================================
// Numerical linearization, eigenvalue analysis, pole maps over line-impedance
// sweeps and dq port-admittance scans with complex-vector reduction.
// =============================================================================

#include "invstab/equilibrium.hpp"
#include "invstab/jacobian.hpp"
#include "invstab/plant.hpp"

#include <Eigen/Dense>

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace invstab {

enum class OutputId { P, Q, Vcd, Vcq, Ild, Ilq, Igd, Igq, Omega, Delta, Vid, Viq };

std::string_view input_label(InputId id);
std::string_view output_label(OutputId id);

struct LinearModel {
    Eigen::MatrixXd a, b, c, d;
    std::vector<std::string> state_labels;
    std::vector<std::string> input_labels;
    std::vector<std::string> output_labels;
};

/// Central-difference linearization of the closed model at the equilibrium.
LinearModel linearize(const Equilibrium& eq, std::span<const InputId> inputs = {},
                      std::span<const OutputId> outputs = {}, const StepRule& rule = {});

/// A = df/dx only, for a model under the given port options.
Eigen::MatrixXd state_matrix(const NonlinearModel& m, std::span<const double> x, const PortOptions& port = {},
                             const StepRule& rule = {});

/// Eigenvalues in rad/s, ordered by descending real part then descending
/// imaginary part. Throws NumericError on non-finite input or QR failure.
std::vector<Complex> eigenvalues(const Eigen::MatrixXd& a);

struct ModeInfo {
    Complex eigenvalue;
    double sigma = 0.0;          // 1/s
    double freq = 0.0;           // Hz
    double damping_ratio = 1.0;
};

inline constexpr double kOscillatoryThresholdHz = 0.5;

/// Largest-real-part oscillatory eigenvalue (|imag| > 2 pi 0.5 rad/s), ties
/// broken by larger |imag|; otherwise the largest real eigenvalue with freq 0.
ModeInfo dominant_mode(std::span<const Complex> eigs);

struct PoleMapPoint {
    double zg_pu = 0.0;
    double scr = 0.0;
    bool feasible = false;
    bool stable = false;
    std::vector<Complex> eigs;
    std::vector<double> x_star;
    std::string note;  // failure diagnostic for infeasible points
};

struct PoleMap {
    ControlMode mode = ControlMode::HybridPll;
    std::vector<PoleMapPoint> points;
};

/// For each Z_g (p.u.): equilibrium (warm-started from the previous point),
/// linearization and eigenvalues. Failed points are marked infeasible.
PoleMap pole_sweep(ControlMode mode, const SystemParams& sys, const ControlParams& ctrl, const OperatingTarget& target,
                   std::span<const double> zg_values);

/// Evenly spaced sweep including both end points.
std::vector<double> linear_sweep(double start, double stop, std::size_t points);

struct ComplexVectorPair {
    Complex plus;
    Complex minus;
};

/// Y+ = ((Ydd + Yqq) + j(Yqd - Ydq))/2, Y- = ((Ydd - Yqq) + j(Yqd + Ydq))/2.
ComplexVectorPair complex_vector_reduce(const Eigen::Matrix2cd& y_dq);
/// Inverse of complex_vector_reduce for a real-coefficient system, which needs
/// the pair at the mirrored frequency as well (Y(-f) = conj(Y(f))). For a real
/// matrix pass the same pair twice.
Eigen::Matrix2cd complex_vector_expand(const ComplexVectorPair& at_f, const ComplexVectorPair& at_minus_f);

struct AdmittancePoint {
    double freq = 0.0;  // Hz, signed (dq frame)
    Eigen::Matrix2cd y_dq = Eigen::Matrix2cd::Zero();  // S
    ComplexVectorPair y_pm;
    bool singular = false;
};

struct AdmittanceResponse {
    ControlMode mode = ControlMode::HybridPll;
    double z_base = 1.0;  // ohm; y_pu = y * z_base
    std::vector<AdmittancePoint> points;
};

struct PortScanOptions {
    /// Converter voltage held at its equilibrium value (passive LC network).
    bool freeze_controller = false;
};

/// Port at the filter capacitor with the grid branch removed: the grid-side
/// current i_g (flowing out of the inverter) is the input, v_c the output, and
/// Y(j w) = Z(j w)^-1 with Z = C (j w I - A)^-1 B. The operating point is the
/// grid-connected equilibrium for `sys` (its l_g).
AdmittanceResponse port_admittance(ControlMode mode, const SystemParams& sys, const ControlParams& ctrl,
                                   const OperatingTarget& target, std::span<const double> freqs,
                                   const PortScanOptions& opts = {});
AdmittanceResponse port_admittance(const Equilibrium& eq, std::span<const double> freqs,
                                   const PortScanOptions& opts = {});

/// Log-spaced grid over +/-[f_min, f_max], `per_sign` points per sign, ascending.
std::vector<double> signed_log_grid(double f_min, double f_max, std::size_t per_sign);

/// Analytic out-flowing admittance of the R_f-L_f branch plus C_f shunt in a
/// frame rotating at omega (converter voltage frozen).
Eigen::Matrix2cd passive_port_admittance(const SystemParams& sys, double omega, double f);

/// Single-axis equivalents extracted from the linearized full model with every
/// state outside the axis loop frozen (synchronization, the other axis, C_f and
/// the grid branch). The q-axis transfer needs a current-controlled q-axis, the
/// d-axis transfer a d-axis voltage loop; otherwise ConfigError.
NortonQ extract_norton_q(const Equilibrium& eq, double f);
TheveninD extract_thevenin_d(const Equilibrium& eq, double f);

}  // namespace invstab

#pragma once

// =============================================================================
// Full-order closed-loop model of one inverter (LC filter + inductive line +
// controller + synchronization) against an infinite bus, written in the
// controller dq frame. The four control modes share the plant equations and
// differ only in the controller states they append.
// =============================================================================

#include "invstab/control_blocks.hpp"
#include "invstab/params.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace invstab {

enum class StateId {
    Ild, Ilq, Vcd, Vcq, Igd, Igq,
    XiVd, XiVq, XiId, XiIq, Pf, XiPll, Delta,
    DelD, DelQ,
    Count
};

std::string_view state_label(StateId id);

/// Exogenous reference channels available for linearization.
enum class InputId { VcdRef, IldRef, IlqRef, PRef };

struct References {
    double v_cd_ref = 0.0;
    double i_ld_ref = 0.0;
    double i_lq_ref = 0.0;
    double p_ref = 0.0;

    double get(InputId id) const;
    void set(InputId id, double value);
};

struct SignalSet {
    double p = 0.0;  // W, 3/2 (v_c . i_g)
    double q = 0.0;  // var, 3/2 (v_cq i_gd - v_cd i_gq)
    Dq v_c, i_l, i_g, v_i, v_g;
    double omega_ctrl = 0.0;  // rad/s
    double delta = 0.0;       // rad
};

/// Plant-equation variants used for port scans.
struct PortOptions {
    /// i_g is held at its state value (treated as an input); its derivative is zero.
    bool grid_branch_removed = false;
    /// v_i is held at `frozen_v_i` instead of following the controller.
    bool freeze_controller = false;
    Dq frozen_v_i{};
    /// The LC filter and line rotate at `frozen_omega` instead of the
    /// synchronization output.
    bool freeze_sync = false;
    double frozen_omega = 0.0;
};

class NonlinearModel {
public:
    NonlinearModel() = default;

    ControlMode mode() const { return mode_; }
    const SystemParams& system() const { return sys_; }
    const ControlParams& control() const { return ctrl_; }

    std::size_t n_states() const { return labels_.size(); }
    const std::vector<std::string>& state_labels() const { return labels_; }
    /// Position of a state, or -1 when the mode does not carry it.
    int index(StateId id) const { return index_[static_cast<std::size_t>(id)]; }
    bool has(StateId id) const { return index(id) >= 0; }
    StateId state_at(std::size_t position) const { return ids_[position]; }

    /// Per-state base values (state units); rates divided by these are in 1/s.
    const std::vector<double>& state_scales() const { return scales_; }

    References references() const;

    std::vector<double> derivatives(std::span<const double> x) const;
    void derivatives(std::span<const double> x, std::span<double> dx) const;
    SignalSet outputs(std::span<const double> x) const;

    /// General evaluation with overridden references and port options.
    /// Throws NumericError on a non-finite state.
    SignalSet evaluate(std::span<const double> x, const References& refs, const PortOptions& port,
                       std::span<double> dx) const;

    /// Same controller and layout with a new line inductance.
    NonlinearModel with_line_inductance(double l_g) const;
    /// Same layout with new references (gains and mode unchanged).
    NonlinearModel with_references(const References& refs) const;

    /// Stored energy 3/4 (L_f |i_l|^2 + C_f |v_c|^2 + L_g |i_g|^2), J.
    double stored_energy(std::span<const double> x) const;

private:
    friend NonlinearModel assemble(ControlMode, const SystemParams&, const ControlParams&);

    ControlMode mode_ = ControlMode::HybridPll;
    SystemParams sys_{};
    ControlParams ctrl_{};
    std::vector<std::string> labels_;
    std::vector<StateId> ids_;
    std::array<int, static_cast<std::size_t>(StateId::Count)> index_{};
    std::vector<double> scales_;
};

/// Throws ConfigError when ctrl.mode != mode or a gain the mode needs is
/// missing, negative or non-finite; the message names the gain.
NonlinearModel assemble(ControlMode mode, const SystemParams& sys, const ControlParams& ctrl);

/// Power balance terms at a state: converter-side input power, power delivered
/// to the grid source, copper losses, and the analytic energy derivative.
struct PowerBalance {
    double p_converter = 0.0;
    double p_grid = 0.0;
    double losses = 0.0;
    double d_energy = 0.0;
};
PowerBalance power_balance(const NonlinearModel& m, std::span<const double> x);

}  // namespace invstab

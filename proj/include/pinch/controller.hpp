#pragma once

#include "pinch/contact.hpp"
#include "pinch/errors.hpp"
#include "pinch/kinematics.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace pinch {

struct ControllerParams {
    double desired_force = 4.0;  // f_d, N
    std::array<VecX, 2> damping{VecX::Constant(4, 0.07), VecX::Constant(4, 0.07)};  // diag(K_v)
    double tip_radius = 0.015;

    void validate() const
    {
        if (!(desired_force > 0.0)) {
            throw std::invalid_argument("desired force must be positive");
        }
        for (const auto& k : damping) {
            if (k.size() == 0 || (k.array() <= 0.0).any()) {
                throw std::invalid_argument("damping gains must be positive");
            }
        }
        if (!(tip_radius > 0.0)) {
            throw std::invalid_argument("tip radius must be positive");
        }
    }
};

/// Everything the grasp law is allowed to see: proprioception of both
/// fingers, the sensed contact tangents and the integrated rolling angles.
/// No object model enters.
struct GraspInputs {
    std::array<VecX, 2> qdot;
    std::array<Vec3, 2> tip_position;
    std::array<Jacobians, 2> jac;
    std::array<ContactFrame, 2> sensed;
    RelativeAngles angles;
};

/// Joint torques of finger `i` (0 or 1, i.e. finger 1 or 2):
///   u_i = -K_vi qdot_i - (-1)^i f_d J_vi^T t12
///         - r f_d J_wi^T [(-1)^(i+1) t_xi sin(psi) - t_yi sin(phi)]
/// with t12 the unit vector from tip 1 to tip 2 and i counted from 1.
inline VecX grasp_torque(int i, const GraspInputs& in, const ControllerParams& p,
                         double degenerate_tol = 1e-9)
{
    const auto iu = static_cast<std::size_t>(i);
    const Vec3 d = in.tip_position[1] - in.tip_position[0];
    const double len = d.norm();
    if (len < degenerate_tol) {
        throw Error(ErrorKind::DegenerateTips, "fingertip centres coincide");
    }
    const Vec3 line = d / len;
    // Finger 1 (i = 0) pushes along +line, finger 2 along -line.
    const double sign = (i == 0) ? 1.0 : -1.0;
    const ContactFrame& f = in.sensed[iu];
    const Vec3 moment = sign * f.tx * std::sin(in.angles.psi) - f.ty * std::sin(in.angles.phi);

    VecX u = -(p.damping[iu].array() * in.qdot[iu].array()).matrix();
    u += sign * p.desired_force * in.jac[iu].linear.transpose() * line;
    u -= p.tip_radius * p.desired_force * in.jac[iu].angular.transpose() * moment;
    return u;
}

enum class Phase { Closing, Grasping };

struct GraspPhase {
    Phase phase = Phase::Closing;
    std::array<bool, 2> contact{false, false};
};

/// Contact flags latch; the phase switches to grasping once both are set
/// and never reverts.
inline GraspPhase phase_update(const GraspPhase& current, std::array<bool, 2> signals)
{
    GraspPhase next = current;
    for (std::size_t i = 0; i < 2; ++i) {
        next.contact[i] = current.contact[i] || signals[i];
    }
    if (next.contact[0] && next.contact[1]) {
        next.phase = Phase::Grasping;
    }
    return next;
}

struct ClosingParams {
    std::array<VecX, 2> target;
    double kp = 2.0;
    double kd = 0.02;
    double max_speed = 0.5;  // rad/s, rate limit of the servo reference

    void validate() const
    {
        if (kp < 0.0 || kd < 0.0) {
            throw std::invalid_argument("closing gains must be non-negative");
        }
        if (!(max_speed > 0.0)) {
            throw std::invalid_argument("closing speed cap must be positive");
        }
    }
};

struct ClosingCommand {
    VecX torque;
    VecX reference;  // servo reference after this step
};

/// Joint PD servo toward a reference that advances on the target at no more
/// than `max_speed`:
///   reference' = reference + clamp(target - reference, +-max_speed dt)
///   torque     = kp (reference' - q) - kd qdot
inline ClosingCommand closing_command(const JointState& state, const VecX& reference,
                                      const VecX& target, const ClosingParams& p, double dt)
{
    const double step = p.max_speed * dt;
    ClosingCommand out;
    out.reference = reference + (target - reference).cwiseMax(-step).cwiseMin(step);
    out.torque = p.kp * (out.reference - state.q) - p.kd * state.qdot;
    return out;
}

} // namespace pinch

#pragma once

#include "pinch/contact.hpp"
#include "pinch/controller.hpp"
#include "pinch/dynamics.hpp"
#include "pinch/errors.hpp"

#include <cmath>
#include <deque>
#include <vector>

namespace pinch {

struct EnergyReport {
    double value = 0.0;      // V, J
    double kinetic = 0.0;    // 1/2 xdot^T M_s xdot
    double distance = 0.0;   // f_d |p_t2 - p_t1|
    double z1 = 0.0;         // 1 - cos(phi)
    double z2 = 0.0;         // 1 - cos(psi)
    double dissipation = 0.0;  // W, J/s
};

/// Storage function and dissipation rate of the closed loop:
///   V = 1/2 xdot^T M_s xdot + f_d |p_t2 - p_t1| + r f_d (z1 + z2)
///   W = sum k_v qdot^2 + sum w_rel^T K_s Q_s w_rel
/// `geometry` supplies the interaction line for the spin term; without it
/// the spin dissipation is omitted. Throws DomainExceeded outside
/// |phi|, |psi| < pi/2.
inline EnergyReport lyapunov(const Scene& scene, const SystemState& s, const ControllerParams& p,
                             const RelativeAngles& angles, const FrictionParams& friction,
                             const ContactGeometry* geometry)
{
    if (!(std::abs(angles.phi) < 0.5 * kPi) || !(std::abs(angles.psi) < 0.5 * kPi)) {
        throw Error(ErrorKind::DomainExceeded, "rolling angle outside (-pi/2, pi/2)");
    }
    EnergyReport e;
    const VecX v = generalized_velocity(scene, s);
    e.kinetic = 0.5 * v.dot(system_mass_matrix(scene, s) * v);
    const Vec3 p1 = forward_kinematics(scene.fingers[0], s.fingers[0].q).position;
    const Vec3 p2 = forward_kinematics(scene.fingers[1], s.fingers[1].q).position;
    e.distance = p.desired_force * (p2 - p1).norm();
    e.z1 = 1.0 - std::cos(angles.phi);
    e.z2 = 1.0 - std::cos(angles.psi);
    e.value = e.kinetic + e.distance + p.tip_radius * p.desired_force * (e.z1 + e.z2);

    for (std::size_t i = 0; i < 2; ++i) {
        e.dissipation += (p.damping[i].array() * s.fingers[i].qdot.array().square()).sum();
    }
    if (geometry != nullptr) {
        const Mat3 qs = spin_projection(geometry->line());
        for (std::size_t i = 0; i < 2; ++i) {
            const Vec3 wrel = relative_spin(geometry->fingers[i], s.fingers[i].qdot, s.object.angular_velocity);
            e.dissipation += wrel.dot(friction.spin[i] * qs * wrel);
        }
    }
    return e;
}

/// Distance of the closed loop from its equilibrium manifold.
struct EquilibriumResiduals {
    std::array<double, 2> delta_f{};         // N
    std::array<Vec2, 2> delta_lambda{Vec2::Zero(), Vec2::Zero()};  // N
    std::array<double, 2> delta_n{};         // |Delta N_i|, N
    double spin_moment = 0.0;                // |S_N|, N m
    double parallelism = 0.0;                // |(p_oc2 - p_oc1) x t12|
    std::array<double, 2> force_error{};     // ||f_i| - f_d| on the full contact force, N
    std::array<double, 2> beta_psi{};        // |sin psi - t_yi^T t12|
    std::array<double, 2> beta_phi{};        // |sin phi - (-1)^(i+1) t_xi^T t12|

    double max_delta() const
    {
        double m = std::max({std::abs(delta_f[0]), std::abs(delta_f[1]), delta_n[0], delta_n[1], spin_moment});
        m = std::max({m, delta_lambda[0].cwiseAbs().maxCoeff(), delta_lambda[1].cwiseAbs().maxCoeff()});
        return m;
    }
    double max_beta() const { return std::max({beta_psi[0], beta_psi[1], beta_phi[0], beta_phi[1]}); }
};

/// `controller_frames` are the tangents the grasp law used (the sensed
/// frames) and enter only the moment balance Delta N; every other residual,
/// including the rolling-angle conditions, uses the true contact frames.
inline EquilibriumResiduals equilibrium_residuals(const ContactGeometry& g, const Multipliers& mu,
                                                  const std::array<ContactFrame, 2>& controller_frames,
                                                  const RelativeAngles& angles, const ControllerParams& p,
                                                  const Vec3& object_position)
{
    EquilibriumResiduals r;
    const double fd = p.desired_force;
    const Vec3 d = g.fingers[1].tip.position - g.fingers[0].tip.position;
    const Vec3 t12 = d / d.norm();
    const Vec3 poc1 = g.fingers[0].query.frame.point - object_position;
    const Vec3 poc2 = g.fingers[1].query.frame.point - object_position;

    for (std::size_t i = 0; i < 2; ++i) {
        const double sign = (i == 0) ? 1.0 : -1.0;
        const ContactFrame& f = g.fingers[i].query.frame;
        const ContactFrame& c = controller_frames[i];
        r.delta_f[i] = mu.normal[i] - sign * fd * f.nz.dot(t12);
        r.delta_lambda[i] = mu.tangential[i] - sign * fd * Vec2(f.tx.dot(t12), f.ty.dot(t12));
        const Vec3 dn = sign * fd * (f.ty * f.tx.dot(t12) - f.tx * f.ty.dot(t12))
                      + fd * (sign * c.tx * std::sin(angles.psi) - c.ty * std::sin(angles.phi));
        r.delta_n[i] = dn.norm();
        const Vec3 force = f.nz * mu.normal[i] + f.tx * mu.tangential[i][0] + f.ty * mu.tangential[i][1];
        r.force_error[i] = std::abs(force.norm() - fd);
        r.beta_psi[i] = std::abs(std::sin(angles.psi) - f.ty.dot(t12));
        r.beta_phi[i] = std::abs(std::sin(angles.phi) - sign * f.tx.dot(t12));
    }
    r.spin_moment = (fd * (skew(poc1).transpose() - skew(poc2).transpose()) * t12).norm();
    r.parallelism = (poc2 - poc1).cross(t12).norm();
    return r;
}

// ---------------------------------------------------------------------------
// Convergence

struct ConvergenceSample {
    double time = 0.0;
    double max_speed = 0.0;  // |xdot|_inf
    std::array<double, 2> force{};  // contact force magnitudes
};

struct ConvergenceCriteria {
    double speed_tol = 1e-4;
    double force_rel_tol = 0.02;
    double window = 0.5;  // s
};

enum class Verdict { Converged, Settling, Diverged };

inline const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::Converged: return "converged";
    case Verdict::Settling: return "settling";
    case Verdict::Diverged: return "diverged";
    }
    return "unknown";
}

struct ConvergenceReport {
    Verdict verdict = Verdict::Settling;
    double settle_time = -1.0;  // start of the final in-band stretch, or -1
};

inline bool in_band(const ConvergenceSample& s, double desired_force, const ConvergenceCriteria& c)
{
    return s.max_speed < c.speed_tol
        && std::abs(s.force[0] - desired_force) < c.force_rel_tol * desired_force
        && std::abs(s.force[1] - desired_force) < c.force_rel_tol * desired_force;
}

/// Judges the trailing `window` seconds of `samples` (time-ordered).
/// Converged when every sample there is in band; diverged when the speed
/// grows monotonically across the window (or is not finite); otherwise
/// settling.
inline ConvergenceReport convergence_check(const std::vector<ConvergenceSample>& samples, double desired_force,
                                           const ConvergenceCriteria& c = {})
{
    ConvergenceReport out;
    if (samples.empty()) {
        return out;
    }
    const double t_end = samples.back().time;
    const double t_start = t_end - c.window;
    if (samples.front().time > t_start + 1e-12) {
        return out;  // window not yet covered
    }
    std::size_t first = samples.size();
    for (std::size_t k = samples.size(); k-- > 0;) {
        if (samples[k].time < t_start - 1e-12) {
            break;
        }
        first = k;
    }
    bool all_in = true;
    bool monotone_up = true;
    for (std::size_t k = first; k < samples.size(); ++k) {
        if (!std::isfinite(samples[k].max_speed)) {
            out.verdict = Verdict::Diverged;
            return out;
        }
        all_in = all_in && in_band(samples[k], desired_force, c);
        if (k > first && samples[k].max_speed < samples[k - 1].max_speed) {
            monotone_up = false;
        }
    }
    if (all_in) {
        out.verdict = Verdict::Converged;
        std::size_t k = first;
        while (k > 0 && in_band(samples[k - 1], desired_force, c)) {
            --k;
        }
        out.settle_time = samples[k].time;
        return out;
    }
    if (monotone_up && samples.back().max_speed > samples[first].max_speed
        && samples.back().max_speed >= c.speed_tol) {
        out.verdict = Verdict::Diverged;
    }
    return out;
}

/// Online detector of settle events: an event fires once the signal has been
/// continuously in band for `window` seconds; its time is the start of that
/// stretch. Leaving the band re-arms the detector.
class SettleTracker {
public:
    SettleTracker(double desired_force, ConvergenceCriteria c = {}) : fd_(desired_force), c_(c) {}

    /// Returns true when this sample completes a new settle event.
    bool add(const ConvergenceSample& s)
    {
        if (!in_band(s, fd_, c_)) {
            stretch_start_ = -1.0;
            armed_ = true;
            return false;
        }
        if (stretch_start_ < 0.0) {
            stretch_start_ = s.time;
        }
        if (armed_ && s.time - stretch_start_ >= c_.window - 1e-12) {
            armed_ = false;
            events_.push_back(stretch_start_);
            return true;
        }
        return false;
    }

    const std::vector<double>& events() const { return events_; }
    bool settled() const { return !armed_ && stretch_start_ >= 0.0; }

private:
    double fd_;
    ConvergenceCriteria c_;
    double stretch_start_ = -1.0;
    bool armed_ = true;
    std::vector<double> events_;
};

} // namespace pinch

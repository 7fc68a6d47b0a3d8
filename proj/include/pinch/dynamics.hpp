#pragma once

#include "pinch/contact.hpp"
#include "pinch/errors.hpp"
#include "pinch/kinematics.hpp"
#include "pinch/shapes.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace pinch {

// ---------------------------------------------------------------------------
// Finger inertia

inline MatX mass_matrix(const FingerChain& chain, const VecX& q)
{
    const ChainFrames f = chain_frames(chain, q);
    const int n = chain.dof();
    MatX m = MatX::Zero(n, n);
    Mat3X jv(3, n);
    Mat3X jw(3, n);
    for (int link = 0; link < n; ++link) {
        const auto lu = static_cast<std::size_t>(link);
        jv.setZero();
        jw.setZero();
        for (int k = 0; k <= link; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            jw.col(k) = f.joint_axes[ku];
            jv.col(k) = f.joint_axes[ku].cross(f.link_coms[lu] - f.joint_origins[ku]);
        }
        const Joint& j = chain.joints[lu];
        const Mat3& r = f.link_rotations[lu];
        m += j.mass * jv.transpose() * jv + jw.transpose() * (r * j.inertia * r.transpose()) * jw;
    }
    return m;
}

/// C(q, qdot) qdot from Christoffel symbols of the first kind, with dM/dq_k by
/// central differences of step h.
inline VecX coriolis(const FingerChain& chain, const VecX& q, const VecX& qdot, double h = 1e-6)
{
    const int n = chain.dof();
    if (qdot.isZero(0.0)) {
        return VecX::Zero(n);
    }
    std::vector<MatX> dm(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        VecX qp = q;
        VecX qm = q;
        qp[k] += h;
        qm[k] -= h;
        dm[static_cast<std::size_t>(k)] = (mass_matrix(chain, qp) - mass_matrix(chain, qm)) / (2.0 * h);
    }
    MatX mdot = MatX::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        mdot += qdot[k] * dm[static_cast<std::size_t>(k)];
    }
    VecX c = mdot * qdot;
    for (int i = 0; i < n; ++i) {
        c[i] -= 0.5 * qdot.dot(dm[static_cast<std::size_t>(i)] * qdot);
    }
    return c;
}

// ---------------------------------------------------------------------------
// System model and state

using Twist = Eigen::Matrix<double, 6, 1>;

struct Scene {
    std::array<FingerChain, 2> fingers;
    ObjectShape shape = Sphere{};

    int dof() const { return fingers[0].dof() + fingers[1].dof() + 6; }
    int offset(int finger) const { return finger == 0 ? 0 : fingers[0].dof(); }
    int object_offset() const { return fingers[0].dof() + fingers[1].dof(); }
};

struct SystemState {
    std::array<JointState, 2> fingers;
    ObjectState object;
    RollingState rolling;
    double time = 0.0;
};

/// Generalized velocity [qdot_1; qdot_2; v_o; w_o].
inline VecX generalized_velocity(const Scene& scene, const SystemState& s)
{
    VecX v(scene.dof());
    v.segment(scene.offset(0), scene.fingers[0].dof()) = s.fingers[0].qdot;
    v.segment(scene.offset(1), scene.fingers[1].dof()) = s.fingers[1].qdot;
    v.segment<3>(scene.object_offset()) = s.object.velocity;
    v.segment<3>(scene.object_offset() + 3) = s.object.angular_velocity;
    return v;
}

inline void set_generalized_velocity(const Scene& scene, SystemState& s, const VecX& v)
{
    s.fingers[0].qdot = v.segment(scene.offset(0), scene.fingers[0].dof());
    s.fingers[1].qdot = v.segment(scene.offset(1), scene.fingers[1].dof());
    s.object.velocity = v.segment<3>(scene.object_offset());
    s.object.angular_velocity = v.segment<3>(scene.object_offset() + 3);
}

/// Moves the configuration along `delta` (same layout as the generalized
/// velocity); the rotational part is applied through the exponential map.
inline void displace(const Scene& scene, SystemState& s, const VecX& delta)
{
    s.fingers[0].q += delta.segment(scene.offset(0), scene.fingers[0].dof());
    s.fingers[1].q += delta.segment(scene.offset(1), scene.fingers[1].dof());
    s.object.position += delta.segment<3>(scene.object_offset());
    s.object.orientation = integrate_orientation(s.object.orientation,
                                                 delta.segment<3>(scene.object_offset() + 3), 1.0);
}

inline MatX system_mass_matrix(const Scene& scene, const SystemState& s)
{
    const int n = scene.dof();
    MatX m = MatX::Zero(n, n);
    for (int i = 0; i < 2; ++i) {
        const int ni = scene.fingers[static_cast<std::size_t>(i)].dof();
        m.block(scene.offset(i), scene.offset(i), ni, ni)
            = mass_matrix(scene.fingers[static_cast<std::size_t>(i)], s.fingers[static_cast<std::size_t>(i)].q);
    }
    const int o = scene.object_offset();
    m.block<3, 3>(o, o) = Mat3::Identity() * s.object.mass;
    m.block<3, 3>(o + 3, o + 3) = s.object.inertia_world();
    return m;
}

/// Per-finger kinematic and contact quantities for one configuration.
struct FingerContact {
    TipPose tip;
    Jacobians jac;
    ContactQuery query;
    ConstraintBlocks blocks;
};

struct ContactGeometry {
    std::array<FingerContact, 2> fingers;

    Vec3 line() const
    {
        return interaction_line(fingers[0].query.frame.point, fingers[1].query.frame.point);
    }
};

inline ContactGeometry contact_geometry(const Scene& scene, const SystemState& s)
{
    ContactGeometry g;
    const ObjectPose pose = pose_of(s.object);
    for (std::size_t i = 0; i < 2; ++i) {
        const FingerChain& chain = scene.fingers[i];
        const ChainFrames frames = chain_frames(chain, s.fingers[i].q);
        FingerContact& fc = g.fingers[i];
        fc.tip = frames.tip;
        fc.jac = jacobians(frames);
        fc.query = surface_query(scene.shape, pose, fc.tip.position, chain.tip_radius);
        fc.blocks = constraint_blocks(fc.query.frame, fc.jac, s.object.position, chain.tip_radius);
    }
    return g;
}

/// The N x 6 matrix A of the compact closed-loop form; columns ordered
/// [f_1, f_2, lambda_1 (2), lambda_2 (2)], so A^T xdot stacks the contact
/// constraints then the rolling constraints.
inline MatX constraint_matrix(const Scene& scene, const ContactGeometry& g)
{
    MatX a = MatX::Zero(scene.dof(), 6);
    const int o = scene.object_offset();
    for (int i = 0; i < 2; ++i) {
        const auto& b = g.fingers[static_cast<std::size_t>(i)].blocks;
        const int off = scene.offset(i);
        const int ni = static_cast<int>(b.d_finger.size());
        a.block(off, i, ni, 1) = b.d_finger.transpose();
        a.block<6, 1>(o, i) = b.d_object.transpose();
        a.block(off, 2 + 2 * i, ni, 2) = b.a_finger.transpose();
        a.block<6, 2>(o, 2 + 2 * i) = b.a_object.transpose();
    }
    return a;
}

struct Multipliers {
    std::array<double, 2> normal{0.0, 0.0};     // f_1, f_2
    std::array<Vec2, 2> tangential{Vec2::Zero(), Vec2::Zero()};  // (lambda_x, lambda_y)
    bool active = false;

    Eigen::Matrix<double, 6, 1> stacked() const
    {
        Eigen::Matrix<double, 6, 1> m;
        m << normal[0], normal[1], tangential[0], tangential[1];
        return m;
    }
};

struct FrictionParams {
    std::array<Mat3, 2> spin{Mat3::Identity() * 0.01, Mat3::Identity() * 0.01};
};

struct DynamicsOptions {
    bool gyroscopic = false;
    double baumgarte_alpha = 20.0;
    double baumgarte_beta = 20.0;
    double rate_step = 1e-7;
    bool post_stabilize = true;
    bool implicit_friction = true;
    double penetration_limit = 1e-4;
    int grasp_lost_steps = 10;
};

/// Applied loads: joint torques per finger and an external object wrench.
/// `damping` optionally declares the diagonal joint damping D already
/// contained in `torque` as -D qdot, so the integrator may evaluate that
/// term at the end-of-step velocity.
struct Controls {
    std::array<VecX, 2> torque;
    Vec3 object_force = Vec3::Zero();
    Vec3 object_torque = Vec3::Zero();
    std::array<VecX, 2> damping;

    static Controls zeros(const Scene& scene)
    {
        Controls u;
        u.torque = {VecX::Zero(scene.fingers[0].dof()), VecX::Zero(scene.fingers[1].dof())};
        return u;
    }
};

/// (d/dt A^T) xdot by central differences of A(x)^T xdot along the current
/// velocity with time step h.
inline Eigen::Matrix<double, 6, 1> constraint_rate(const Scene& scene, const SystemState& s, double h = 1e-7)
{
    const VecX v = generalized_velocity(scene, s);
    if (v.isZero(0.0)) {
        return Eigen::Matrix<double, 6, 1>::Zero();
    }
    SystemState plus = s;
    SystemState minus = s;
    displace(scene, plus, h * v);
    displace(scene, minus, -h * v);
    const MatX ap = constraint_matrix(scene, contact_geometry(scene, plus));
    const MatX am = constraint_matrix(scene, contact_geometry(scene, minus));
    return (ap - am).transpose() * v / (2.0 * h);
}

inline Vec3 relative_spin(const FingerContact& fc, const VecX& qdot, const Vec3& omega_object)
{
    return fc.jac.angular * qdot - omega_object;
}

/// Maps the generalized velocity to finger i's tip spin relative to the
/// object: G_i xdot = w_ti - w_o.
inline MatX relative_spin_map(const Scene& scene, const ContactGeometry& g, int i)
{
    MatX gmap = MatX::Zero(3, scene.dof());
    const auto iu = static_cast<std::size_t>(i);
    gmap.block(0, scene.offset(i), 3, scene.fingers[iu].dof()) = g.fingers[iu].jac.angular;
    gmap.block<3, 3>(0, scene.object_offset() + 3) = -Mat3::Identity();
    return gmap;
}

/// Spin friction as a generalized damping matrix: the friction force is
/// -B xdot with B = sum_i G_i^T K_si Q_s G_i, which reproduces
/// J_wi^T K_si Q_s w_rel_i on the finger rows and -K_si Q_s w_rel_i on the
/// object rotation rows of the equations of motion.
inline MatX spin_damping(const Scene& scene, const ContactGeometry& g, const FrictionParams& friction)
{
    const Mat3 qs = spin_projection(g.line());
    MatX b = MatX::Zero(scene.dof(), scene.dof());
    for (int i = 0; i < 2; ++i) {
        const MatX gmap = relative_spin_map(scene, g, i);
        b += gmap.transpose() * (friction.spin[static_cast<std::size_t>(i)] * qs) * gmap;
    }
    return b;
}

/// Generalized applied force without friction: torques minus Coriolis, the
/// optional gyroscopic term and the external object wrench.
inline VecX applied_forces(const Scene& scene, const SystemState& s, const Controls& u,
                           const DynamicsOptions& opt)
{
    VecX tau = VecX::Zero(scene.dof());
    const int o = scene.object_offset();
    for (int i = 0; i < 2; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        const FingerChain& chain = scene.fingers[iu];
        tau.segment(scene.offset(i), chain.dof())
            = u.torque[iu] - coriolis(chain, s.fingers[iu].q, s.fingers[iu].qdot);
    }
    tau.segment<3>(o) = u.object_force;
    Vec3 torque = u.object_torque;
    if (opt.gyroscopic) {
        const Vec3& w = s.object.angular_velocity;
        torque -= w.cross(s.object.inertia_world() * w);
    }
    tau.segment<3>(o + 3) = torque;
    return tau;
}

struct Solution {
    VecX acceleration;
    Multipliers multipliers;
};

/// Solves [M A; A^T 0][xddot; mu] = [tau - B xdot; b] with
/// b = -(d/dt A^T) xdot - 2 alpha A^T xdot + beta^2 [gap_1, gap_2, 0, 0, 0, 0]
/// and B the spin-friction damping. With `implicit_dt` > 0 the friction and
/// the declared joint damping D are taken linearly implicit over that step:
/// M is replaced by M + implicit_dt (B + D). Without contact geometry the
/// bodies move freely and no multipliers exist.
inline Solution assemble_and_solve(const Scene& scene, const SystemState& s, const ContactGeometry* g,
                                   const Controls& u, const FrictionParams& friction,
                                   const DynamicsOptions& opt = {}, double implicit_dt = 0.0)
{
    MatX m = system_mass_matrix(scene, s);
    VecX tau = applied_forces(scene, s, u, opt);
    if (implicit_dt > 0.0) {
        for (int i = 0; i < 2; ++i) {
            const VecX& d = u.damping[static_cast<std::size_t>(i)];
            if (d.size() > 0) {
                m.diagonal().segment(scene.offset(i), d.size()) += implicit_dt * d;
            }
        }
    }
    Solution out;
    if (g == nullptr) {
        out.acceleration = m.llt().solve(tau);
        return out;
    }
    const VecX v = generalized_velocity(scene, s);
    const MatX damping = spin_damping(scene, *g, friction);
    tau -= damping * v;
    if (implicit_dt > 0.0) {
        m += implicit_dt * damping;
    }
    const Eigen::PartialPivLU<MatX> mlu(m);

    const MatX a = constraint_matrix(scene, *g);
    Eigen::Matrix<double, 6, 1> target = -constraint_rate(scene, s, opt.rate_step)
                                       - 2.0 * opt.baumgarte_alpha * (a.transpose() * v);
    const double beta2 = opt.baumgarte_beta * opt.baumgarte_beta;
    target[0] += beta2 * g->fingers[0].query.gap;
    target[1] += beta2 * g->fingers[1].query.gap;

    const MatX minv_a = mlu.solve(a);
    const Eigen::Matrix<double, 6, 6> schur = a.transpose() * minv_a;
    const Eigen::JacobiSVD<Eigen::Matrix<double, 6, 6>> svd(schur);
    const auto& sv = svd.singularValues();
    if (!(sv[5] > 1e-12 * sv[0])) {
        throw Error(ErrorKind::SingularKKT, "constraint rows are rank deficient");
    }
    const VecX free_acc = mlu.solve(tau);
    const Eigen::Matrix<double, 6, 1> mu = schur.partialPivLu().solve(a.transpose() * free_acc - target);
    out.acceleration = free_acc - minv_a * mu;
    out.multipliers.active = true;
    out.multipliers.normal = {mu[0], mu[1]};
    out.multipliers.tangential = {mu.segment<2>(2), mu.segment<2>(4)};
    return out;
}

// ---------------------------------------------------------------------------
// Constraint manifold projection

/// Newton steps on the two gap functions with minimum mass-weighted
/// displacement. Returns the final max |gap|.
inline double project_positions(const Scene& scene, SystemState& s, int iterations = 6, double tol = 1e-13)
{
    double worst = 0.0;
    for (int it = 0; it < iterations; ++it) {
        const ContactGeometry g = contact_geometry(scene, s);
        const Vec2 gaps(g.fingers[0].query.gap, g.fingers[1].query.gap);
        worst = gaps.cwiseAbs().maxCoeff();
        if (worst < tol) {
            break;
        }
        const MatX an = constraint_matrix(scene, g).leftCols(2);
        const Eigen::LLT<MatX> mllt(system_mass_matrix(scene, s));
        const MatX minv_an = mllt.solve(an);
        const Vec2 y = (an.transpose() * minv_an).ldlt().solve(gaps);
        displace(scene, s, minv_an * y);
    }
    return worst;
}

/// Mass-weighted least-squares correction onto A^T xdot = 0.
inline void project_velocities(const Scene& scene, SystemState& s, const ContactGeometry& g)
{
    const MatX a = constraint_matrix(scene, g);
    const Eigen::LLT<MatX> mllt(system_mass_matrix(scene, s));
    const MatX minv_a = mllt.solve(a);
    const VecX v = generalized_velocity(scene, s);
    const VecX y = (a.transpose() * minv_a).ldlt().solve(a.transpose() * v);
    set_generalized_velocity(scene, s, v - minv_a * y);
}

// ---------------------------------------------------------------------------
// Time stepping

/// Simulation abort carrying the step index and a state snapshot.
class SimulationAbort : public Error {
public:
    SimulationAbort(ErrorKind kind, long step, SystemState snapshot, const std::string& what)
        : Error(kind, "step " + std::to_string(step) + ": " + what), step_(step),
          snapshot_(std::move(snapshot))
    {
    }

    long step() const noexcept { return step_; }
    const SystemState& snapshot() const noexcept { return snapshot_; }

private:
    long step_;
    SystemState snapshot_;
};

struct StepResult {
    SystemState state;
    Multipliers multipliers;
};

inline RollingRates rolling_rates_at(const Scene& scene, const SystemState& s,
                                     const std::array<ContactFrame, 2>& frames)
{
    const Vec3 w1 = tip_angular_velocity(scene.fingers[0], s.fingers[0]);
    const Vec3 w2 = tip_angular_velocity(scene.fingers[1], s.fingers[1]);
    return rolling_rates(w1, w2, frames[0], frames[1]);
}

/// One semi-implicit Euler step: velocities from the KKT accelerations, then
/// positions with the updated velocities. With `rolling_frames` (grasping
/// phase) the contacts are enforced, the configuration is projected back
/// onto the constraint manifold, and the rolling angles are advanced using
/// the supplied tangents (trapezoidal rule).
inline StepResult step(const Scene& scene, const SystemState& s, const Controls& u,
                       const FrictionParams& friction, double dt,
                       const std::array<ContactFrame, 2>* rolling_frames,
                       const DynamicsOptions& opt = {})
{
    StepResult out;
    std::optional<ContactGeometry> g;
    if (rolling_frames != nullptr) {
        g = contact_geometry(scene, s);
    }
    const Solution sol = assemble_and_solve(scene, s, g ? &*g : nullptr, u, friction, opt,
                                            opt.implicit_friction ? dt : 0.0);
    out.multipliers = sol.multipliers;

    SystemState next = s;
    const VecX v = generalized_velocity(scene, s) + dt * sol.acceleration;
    set_generalized_velocity(scene, next, v);
    displace(scene, next, dt * v);
    next.time = s.time + dt;

    if (rolling_frames != nullptr) {
        if (opt.post_stabilize) {
            project_positions(scene, next);
            project_velocities(scene, next, contact_geometry(scene, next));
        }
        const RollingRates before = rolling_rates_at(scene, s, *rolling_frames);
        const RollingRates after = rolling_rates_at(scene, next, *rolling_frames);
        next.rolling = advance_rolling(s.rolling, before, after, dt);
    }
    out.state = std::move(next);
    return out;
}

} // namespace pinch

#pragma once

#include "pinch/errors.hpp"
#include "pinch/kinematics.hpp"
#include "pinch/shapes.hpp"

#include <array>

namespace pinch {

/// Integrated rolling distances of both fingertips (index 0 = finger 1).
struct RollingState {
    std::array<double, 2> phi{0.0, 0.0};
    std::array<double, 2> psi{0.0, 0.0};
};

struct RollingRates {
    std::array<double, 2> phi{0.0, 0.0};
    std::array<double, 2> psi{0.0, 0.0};
};

struct RelativeAngles {
    double phi = 0.0;
    double psi = 0.0;
};

/// Contact (one row) and rolling (two rows) constraints of one finger,
/// split into the finger joint block and the object twist block [v_o; w_o].
struct ConstraintBlocks {
    Eigen::RowVectorXd d_finger;                 // D_ii, 1 x n
    Eigen::Matrix<double, 1, 6> d_object;        // D_i3
    Eigen::Matrix<double, 2, Eigen::Dynamic> a_finger;  // A_ii, 2 x n
    Eigen::Matrix<double, 2, 6> a_object;        // A_i3

    /// Rows [D; A] applied to (qdot, [v_o; w_o]).
    Vec3 residual(const VecX& qdot, const Eigen::Matrix<double, 6, 1>& twist) const
    {
        Vec3 r;
        r[0] = d_finger.dot(qdot) + d_object.dot(twist);
        r.tail<2>() = a_finger * qdot + a_object * twist;
        return r;
    }
};

inline ConstraintBlocks constraint_blocks(const ContactFrame& frame, const Jacobians& jac,
                                          const Vec3& object_position, double r)
{
    const Mat3 poc_hat = skew(frame.point - object_position);
    const auto n = jac.linear.cols();
    ConstraintBlocks b;
    b.d_finger = frame.nz.transpose() * jac.linear;
    b.d_object << -frame.nz.transpose(), frame.nz.transpose() * poc_hat;
    b.a_finger.resize(2, n);
    b.a_finger.row(0) = frame.tx.transpose() * jac.linear + r * frame.ty.transpose() * jac.angular;
    b.a_finger.row(1) = frame.ty.transpose() * jac.linear - r * frame.tx.transpose() * jac.angular;
    b.a_object.row(0) << -frame.tx.transpose(), frame.tx.transpose() * poc_hat;
    b.a_object.row(1) << -frame.ty.transpose(), frame.ty.transpose() * poc_hat;
    return b;
}

/// Rolling rates of both tips projected on the given tangents; finger 2's
/// phi rate carries a minus sign.
inline RollingRates rolling_rates(const Vec3& omega_tip1, const Vec3& omega_tip2,
                                  const ContactFrame& frame1, const ContactFrame& frame2)
{
    RollingRates out;
    out.phi[0] = frame1.ty.dot(omega_tip1);
    out.phi[1] = -frame2.ty.dot(omega_tip2);
    out.psi[0] = frame1.tx.dot(omega_tip1);
    out.psi[1] = frame2.tx.dot(omega_tip2);
    return out;
}

inline RelativeAngles relative_angles(const RollingState& rs)
{
    return {rs.phi[1] - rs.phi[0], rs.psi[0] - rs.psi[1]};
}

/// Trapezoidal update of the rolling angles.
inline RollingState advance_rolling(const RollingState& rs, const RollingRates& before,
                                    const RollingRates& after, double dt)
{
    RollingState out = rs;
    for (int i = 0; i < 2; ++i) {
        out.phi[i] += 0.5 * dt * (before.phi[i] + after.phi[i]);
        out.psi[i] += 0.5 * dt * (before.psi[i] + after.psi[i]);
    }
    return out;
}

/// Unit vector from contact point 1 to contact point 2.
inline Vec3 interaction_line(const Vec3& contact1, const Vec3& contact2)
{
    const Vec3 d = contact2 - contact1;
    const double len = d.norm();
    if (len <= 1e-9) {
        throw Error(ErrorKind::DegenerateContacts, "contact points coincide");
    }
    return d / len;
}

inline Mat3 spin_projection(const Vec3& line) { return line * line.transpose(); }

} // namespace pinch

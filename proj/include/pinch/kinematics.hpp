#pragma once

#include "pinch/spatial.hpp"

#include <cassert>
#include <stdexcept>
#include <vector>

namespace pinch {

/// One revolute joint and the rigid link it drives.
///
/// The joint rotates about `axis` (expressed in the parent link frame); the
/// child frame origin is then displaced by `offset` in the rotated frame.
/// `com` and `inertia` are expressed in the child frame.
struct Joint {
    Vec3 axis = Vec3::UnitZ();
    Vec3 offset = Vec3::Zero();
    double mass = 0.05;
    Vec3 com = Vec3::Zero();
    Mat3 inertia = Mat3::Identity() * 1e-6;
};

/// Serial revolute chain ending in a hemispherical fingertip whose centre
/// sits at the child frame origin of the last joint.
struct FingerChain {
    Vec3 base_position = Vec3::Zero();
    Mat3 base_rotation = Mat3::Identity();
    std::vector<Joint> joints;
    double tip_radius = 0.015;

    int dof() const { return static_cast<int>(joints.size()); }

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const
    {
        if (joints.empty()) {
            throw std::invalid_argument("finger chain needs at least one joint");
        }
        if (!(tip_radius > 0.0)) {
            throw std::invalid_argument("tip radius must be positive");
        }
        if (!is_rotation(base_rotation, 1e-8)) {
            throw std::invalid_argument("base rotation is not a rotation matrix");
        }
        for (const auto& j : joints) {
            if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
                throw std::invalid_argument("joint axis must be unit length");
            }
            if (!(j.mass > 0.0)) {
                throw std::invalid_argument("link mass must be positive");
            }
            if ((j.inertia - j.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
                throw std::invalid_argument("link inertia must be symmetric");
            }
            Eigen::SelfAdjointEigenSolver<Mat3> es(j.inertia);
            if (es.eigenvalues().minCoeff() <= 0.0) {
                throw std::invalid_argument("link inertia must be positive definite");
            }
        }
    }
};

struct JointState {
    VecX q;
    VecX qdot;

    static JointState zeros(int n) { return {VecX::Zero(n), VecX::Zero(n)}; }
};

struct TipPose {
    Vec3 position;
    Mat3 rotation;
};

/// World-frame quantities of every joint for one configuration.
struct ChainFrames {
    std::vector<Vec3> joint_origins;
    std::vector<Vec3> joint_axes;
    std::vector<Mat3> link_rotations;
    std::vector<Vec3> link_coms;
    TipPose tip;
};

inline ChainFrames chain_frames(const FingerChain& chain, const VecX& q)
{
    assert(q.size() == chain.dof());
    const auto n = chain.joints.size();
    ChainFrames f;
    f.joint_origins.reserve(n);
    f.joint_axes.reserve(n);
    f.link_rotations.reserve(n);
    f.link_coms.reserve(n);

    Vec3 p = chain.base_position;
    Mat3 r = chain.base_rotation;
    for (std::size_t k = 0; k < n; ++k) {
        const Joint& j = chain.joints[k];
        const Vec3 axis_world = r * j.axis;
        f.joint_origins.push_back(p);
        f.joint_axes.push_back(axis_world);
        r = r * rotation_about(j.axis, q[static_cast<Eigen::Index>(k)]);
        f.link_rotations.push_back(r);
        f.link_coms.push_back(p + r * j.com);
        p = p + r * j.offset;
    }
    f.tip = {p, r};
    return f;
}

inline TipPose forward_kinematics(const FingerChain& chain, const VecX& q)
{
    return chain_frames(chain, q).tip;
}

struct Jacobians {
    Mat3X linear;   // J_v
    Mat3X angular;  // J_omega
};

inline Jacobians jacobians(const ChainFrames& f)
{
    const auto n = static_cast<Eigen::Index>(f.joint_axes.size());
    Jacobians j{Mat3X(3, n), Mat3X(3, n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        j.angular.col(k) = f.joint_axes[ku];
        j.linear.col(k) = f.joint_axes[ku].cross(f.tip.position - f.joint_origins[ku]);
    }
    return j;
}

inline Jacobians jacobians(const FingerChain& chain, const VecX& q)
{
    return jacobians(chain_frames(chain, q));
}

inline Vec3 tip_angular_velocity(const FingerChain& chain, const JointState& state)
{
    return jacobians(chain, state.q).angular * state.qdot;
}

/// Default finger: one abduction joint about the local y axis followed by
/// three parallel flexion joints about `flexion_axis`, links extending along
/// local z with lengths 0.05/0.05/0.04/0.03 m, 0.05 kg solid-rod links.
inline FingerChain default_finger(const Vec3& base_position, const Mat3& base_rotation,
                                  const Vec3& flexion_axis, double tip_radius = 0.015)
{
    FingerChain chain;
    chain.base_position = base_position;
    chain.base_rotation = base_rotation;
    chain.tip_radius = tip_radius;
    const double lengths[4] = {0.05, 0.05, 0.04, 0.03};
    const Vec3 axes[4] = {Vec3::UnitY(), flexion_axis, flexion_axis, flexion_axis};
    for (int k = 0; k < 4; ++k) {
        Joint j;
        j.axis = axes[k].normalized();
        j.offset = Vec3(0.0, 0.0, lengths[k]);
        j.mass = 0.05;
        j.com = Vec3(0.0, 0.0, 0.5 * lengths[k]);
        // Solid rod of radius 5 mm about its long (z) axis.
        const double rod_r = 0.005;
        const double transverse = j.mass * (3.0 * rod_r * rod_r + lengths[k] * lengths[k]) / 12.0;
        const double axial = 0.5 * j.mass * rod_r * rod_r;
        j.inertia = Vec3(transverse, transverse, axial).asDiagonal();
        chain.joints.push_back(j);
    }
    return chain;
}

} // namespace pinch

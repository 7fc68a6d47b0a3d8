#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>

namespace pinch {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using UnitQuaternion = Eigen::Quaterniond;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Hat operator: skew(v) * w == v.cross(w).
inline Mat3 skew(const Vec3& v)
{
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

/// Rotation by angle |axis_angle| about axis_angle / |axis_angle|.
inline UnitQuaternion exp_quaternion(const Vec3& axis_angle)
{
    const double angle = axis_angle.norm();
    if (angle < 1e-300) {
        return UnitQuaternion::Identity();
    }
    return UnitQuaternion(Eigen::AngleAxisd(angle, axis_angle / angle));
}

inline Mat3 rotation_about(const Vec3& axis, double angle)
{
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

/// Advances q by the rotation generated by a world-frame angular velocity
/// held constant over dt (exponential map), then renormalizes.
inline UnitQuaternion integrate_orientation(const UnitQuaternion& q, const Vec3& omega, double dt)
{
    UnitQuaternion out = exp_quaternion(omega * dt) * q;
    out.normalize();
    return out;
}

/// Smallest rotation vector taking `from` to `to` (both world frame).
inline Vec3 rotation_vector_between(const UnitQuaternion& from, const UnitQuaternion& to)
{
    Eigen::AngleAxisd aa(to * from.conjugate());
    double angle = aa.angle();
    if (angle > kPi) {
        angle -= 2.0 * kPi;
    }
    return aa.axis() * angle;
}

inline bool is_rotation(const Mat3& r, double tol = 1e-10)
{
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < tol
        && std::abs(r.determinant() - 1.0) < tol;
}

} // namespace pinch

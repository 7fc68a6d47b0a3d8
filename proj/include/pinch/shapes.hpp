#pragma once

#include "pinch/errors.hpp"
#include "pinch/spatial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

namespace pinch {

/// Contact point with its orthonormal right-handed triad (t_x, t_y, n_z),
/// n_z pointing from the fingertip into the object, t_x x t_y = n_z.
struct ContactFrame {
    Vec3 point = Vec3::Zero();
    Vec3 tx = Vec3::UnitX();
    Vec3 ty = Vec3::UnitY();
    Vec3 nz = Vec3::UnitZ();

    Mat3 basis() const
    {
        Mat3 b;
        b.col(0) = tx;
        b.col(1) = ty;
        b.col(2) = nz;
        return b;
    }

    bool is_orthonormal(double tol = 1e-10) const { return is_rotation(basis(), tol); }
};

/// Tangent gauge shared by every surface: t_x is the x axis projected onto
/// the tangent plane (the z axis when n is nearly parallel to x), t_y = n x t_x.
/// The gauge is even in n, so opposing contacts share t_x and the rolling
/// angle differences of Eq. 5 measure relative rolling of the two tips.
inline std::pair<Vec3, Vec3> tangent_axes(const Vec3& n)
{
    Vec3 tx = Vec3::UnitX() - n.x() * n;
    if (tx.norm() < 1e-6) {
        tx = Vec3::UnitZ() - n.z() * n;
    }
    tx.normalize();
    return {tx, n.cross(tx)};
}

/// A planar face of a convex polyhedron, body frame. Interior points satisfy
/// -normal . x <= offset; `normal` points into the solid.
struct Face {
    Vec3 normal;
    double offset = 0.0;
    Vec3 tx;
    Vec3 ty;

    static Face from_outward(const Vec3& outward, double offset)
    {
        Face f;
        f.normal = -outward.normalized();
        f.offset = offset;
        std::tie(f.tx, f.ty) = tangent_axes(f.normal);
        return f;
    }

    double signed_distance(const Vec3& x) const { return -normal.dot(x) - offset; }
};

struct Polyhedron {
    std::vector<Face> faces;
};

struct Sphere {
    double radius = 0.024;
};

using ObjectShape = std::variant<Polyhedron, Sphere>;

struct MassProperties {
    double volume = 0.0;
    Vec3 centroid = Vec3::Zero();
    Mat3 unit_mass_inertia = Mat3::Zero();  // about centroid, per kilogram
};

inline std::vector<Vec3> polyhedron_vertices(const Polyhedron& poly, double tol = 1e-12)
{
    std::vector<Vec3> out;
    const auto& f = poly.faces;
    for (std::size_t a = 0; a < f.size(); ++a) {
        for (std::size_t b = a + 1; b < f.size(); ++b) {
            for (std::size_t c = b + 1; c < f.size(); ++c) {
                Mat3 m;
                m.row(0) = -f[a].normal;
                m.row(1) = -f[b].normal;
                m.row(2) = -f[c].normal;
                if (std::abs(m.determinant()) < 1e-12) {
                    continue;
                }
                const Vec3 x = m.fullPivLu().solve(Vec3(f[a].offset, f[b].offset, f[c].offset));
                const bool inside = std::all_of(f.begin(), f.end(), [&](const Face& face) {
                    return face.signed_distance(x) <= tol;
                });
                const bool seen = std::any_of(out.begin(), out.end(), [&](const Vec3& v) {
                    return (v - x).norm() < 1e-9;
                });
                if (inside && !seen) {
                    out.push_back(x);
                }
            }
        }
    }
    return out;
}

/// Uniform-density volume, centroid and inertia by tetrahedral decomposition.
inline MassProperties polyhedron_mass_properties(const Polyhedron& poly)
{
    const auto verts = polyhedron_vertices(poly);
    Vec3 origin = Vec3::Zero();
    for (const auto& v : verts) {
        origin += v;
    }
    origin /= static_cast<double>(verts.size());

    Mat3 canonical;
    canonical << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    canonical /= 120.0;

    double volume = 0.0;
    Vec3 first = Vec3::Zero();
    Mat3 second = Mat3::Zero();
    for (const auto& face : poly.faces) {
        std::vector<Vec3> ring;
        for (const auto& v : verts) {
            if (std::abs(face.signed_distance(v)) < 1e-10) {
                ring.push_back(v - origin);
            }
        }
        if (ring.size() < 3) {
            continue;
        }
        Vec3 center = Vec3::Zero();
        for (const auto& v : ring) {
            center += v;
        }
        center /= static_cast<double>(ring.size());
        const Vec3 u = face.tx;
        const Vec3 w = face.ty;
        std::sort(ring.begin(), ring.end(), [&](const Vec3& p, const Vec3& q) {
            return std::atan2((p - center).dot(w), (p - center).dot(u))
                 < std::atan2((q - center).dot(w), (q - center).dot(u));
        });
        for (std::size_t k = 1; k + 1 < ring.size(); ++k) {
            Mat3 a;
            a.col(0) = ring[0];
            a.col(1) = ring[k];
            a.col(2) = ring[k + 1];
            const double det = std::abs(a.determinant());
            volume += det / 6.0;
            first += det / 6.0 * (a.col(0) + a.col(1) + a.col(2)) / 4.0;
            second += det * a * canonical * a.transpose();
        }
    }
    MassProperties mp;
    mp.volume = volume;
    const Vec3 shift = first / volume;
    mp.centroid = origin + shift;
    const Mat3 central = second - volume * shift * shift.transpose();
    mp.unit_mass_inertia = (central.trace() * Mat3::Identity() - central) / volume;
    return mp;
}

/// Moves the body origin to the centroid.
inline Polyhedron recentered(const Polyhedron& poly, const Vec3& centroid)
{
    Polyhedron out = poly;
    for (auto& f : out.faces) {
        f.offset += f.normal.dot(centroid);
    }
    return out;
}

inline Polyhedron box(double sx, double sy, double sz)
{
    Polyhedron p;
    const std::array<std::pair<Vec3, double>, 6> planes{{
        {Vec3::UnitX(), 0.5 * sx}, {-Vec3::UnitX(), 0.5 * sx},
        {Vec3::UnitY(), 0.5 * sy}, {-Vec3::UnitY(), 0.5 * sy},
        {Vec3::UnitZ(), 0.5 * sz}, {-Vec3::UnitZ(), 0.5 * sz},
    }};
    for (const auto& [n, d] : planes) {
        p.faces.push_back(Face::from_outward(n, d));
    }
    return p;
}

inline Polyhedron cube(double side) { return box(side, side, side); }

/// Prism whose trapezoidal profile lies in the body y-z plane and extrudes
/// along x. The small base is on top; the -y side leans outward by
/// `angle_neg_y` from vertical, the +y side by `angle_pos_y`. The body
/// origin is placed at the centroid.
inline Polyhedron trapezoid_prism(double height, double small_base, double angle_neg_y,
                                  double angle_pos_y, double depth)
{
    Polyhedron p;
    const double top = 0.5 * height;
    auto add = [&](const Vec3& outward, const Vec3& point_on_plane) {
        const Vec3 n = outward.normalized();
        p.faces.push_back(Face::from_outward(n, n.dot(point_on_plane)));
    };
    add(Vec3::UnitX(), Vec3(0.5 * depth, 0, 0));
    add(-Vec3::UnitX(), Vec3(-0.5 * depth, 0, 0));
    add(Vec3::UnitZ(), Vec3(0, 0, top));
    add(-Vec3::UnitZ(), Vec3(0, 0, -top));
    add(Vec3(0, -std::cos(angle_neg_y), std::sin(angle_neg_y)), Vec3(0, -0.5 * small_base, top));
    add(Vec3(0, std::cos(angle_pos_y), std::sin(angle_pos_y)), Vec3(0, 0.5 * small_base, top));
    return recentered(p, polyhedron_mass_properties(p).centroid);
}

struct ObjectState {
    Vec3 position = Vec3::Zero();
    UnitQuaternion orientation = UnitQuaternion::Identity();
    Vec3 velocity = Vec3::Zero();
    Vec3 angular_velocity = Vec3::Zero();  // world frame
    double mass = 0.0021;
    Mat3 inertia_body = Mat3::Identity() * 1e-7;

    Mat3 rotation() const { return orientation.toRotationMatrix(); }
    Mat3 inertia_world() const
    {
        const Mat3 r = rotation();
        return r * inertia_body * r.transpose();
    }
};

struct ObjectPose {
    Vec3 position = Vec3::Zero();
    UnitQuaternion orientation = UnitQuaternion::Identity();
};

inline ObjectPose pose_of(const ObjectState& s) { return {s.position, s.orientation}; }

/// Body inertia per unit mass for the given shape (about its body origin).
inline Mat3 unit_mass_inertia(const ObjectShape& shape)
{
    if (const auto* s = std::get_if<Sphere>(&shape)) {
        return Mat3::Identity() * 0.4 * s->radius * s->radius;
    }
    return polyhedron_mass_properties(std::get<Polyhedron>(shape)).unit_mass_inertia;
}

struct ContactQuery {
    double gap = 0.0;
    ContactFrame frame;
    int face = -1;  // polyhedron face index, -1 for spheres
};

namespace detail {

inline ContactQuery query_sphere(const Sphere& s, const ObjectPose& pose, const Vec3& tip, double r)
{
    const Vec3 d = pose.position - tip;
    const double dist = d.norm();
    if (dist < 1e-12) {
        throw Error(ErrorKind::QueryAmbiguous, "fingertip centre coincides with sphere centre");
    }
    ContactQuery out;
    out.frame.nz = d / dist;
    out.gap = dist - s.radius - r;
    out.frame.point = pose.position - s.radius * out.frame.nz;
    std::tie(out.frame.tx, out.frame.ty) = tangent_axes(out.frame.nz);
    return out;
}

inline ContactQuery query_polyhedron(const Polyhedron& p, const ObjectPose& pose, const Vec3& tip,
                                     double r, double tol)
{
    const Mat3 rot = pose.orientation.toRotationMatrix();
    const Vec3 local = rot.transpose() * (tip - pose.position);
    int best = -1;
    double best_s = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < p.faces.size(); ++k) {
        const double s = p.faces[k].signed_distance(local);
        if (s > best_s) {
            best_s = s;
            best = static_cast<int>(k);
        }
    }
    const Face& f = p.faces[static_cast<std::size_t>(best)];
    const Vec3 foot = local + best_s * f.normal;
    for (std::size_t k = 0; k < p.faces.size(); ++k) {
        if (static_cast<int>(k) != best && p.faces[k].signed_distance(foot) > tol) {
            throw Error(ErrorKind::QueryAmbiguous,
                        "closest feature is an edge or vertex, not the interior of face "
                            + std::to_string(best));
        }
    }
    ContactQuery out;
    out.face = best;
    out.gap = best_s - r;
    out.frame.point = pose.position + rot * foot;
    out.frame.nz = rot * f.normal;
    out.frame.tx = rot * f.tx;
    out.frame.ty = rot * f.ty;
    return out;
}

} // namespace detail

/// Closest-point query between a fingertip sphere (centre `tip`, radius `r`)
/// and the object surface. Throws QueryAmbiguous when the closest polyhedron
/// feature is an edge or vertex by more than `edge_tol` metres.
inline ContactQuery surface_query(const ObjectShape& shape, const ObjectPose& pose, const Vec3& tip,
                                  double r, double edge_tol = 1e-9)
{
    if (const auto* s = std::get_if<Sphere>(&shape)) {
        return detail::query_sphere(*s, pose, tip, r);
    }
    return detail::query_polyhedron(std::get<Polyhedron>(shape), pose, tip, r, edge_tol);
}

/// Velocity of the contact point taken as a material point of the object.
inline Vec3 surface_velocity(const ObjectState& object, const ContactFrame& frame)
{
    return object.velocity + object.angular_velocity.cross(frame.point - object.position);
}

} // namespace pinch

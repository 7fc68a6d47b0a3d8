#pragma once

#include "pinch/controller.hpp"
#include "pinch/dynamics.hpp"
#include "pinch/errors.hpp"
#include "pinch/kinematics.hpp"
#include "pinch/sensor.hpp"
#include "pinch/shapes.hpp"

#include <json.hpp>

#include <array>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace pinch {

// ---------------------------------------------------------------------------
// Scenario configuration

/// How the closing phase decides that a fingertip touches the object.
enum class DetectionMode { Geometric, Tactile };

struct DetectionParams {
    DetectionMode mode = DetectionMode::Geometric;
    double skin_margin = 5e-4;  // m; tactile skin compresses once the gap drops below this
    double threshold = 0.0;     // e_SSIM threshold; <= 0 selects the calibrated default
};

/// Additive load held for exactly one step starting at `time`: joint torques
/// on one finger (1 or 2) or an external object wrench.
struct Perturbation {
    double time = 0.0;
    int finger = 0;  // 1 or 2; 0 for an object wrench
    VecX torque;
    Vec3 object_force = Vec3::Zero();
    Vec3 object_torque = Vec3::Zero();
};

struct ShapeSpec {
    std::string type = "cube";  // cube | box | sphere | trapezoid | polyhedron
    double side = 0.048;
    Vec3 size = Vec3::Constant(0.048);
    double radius = 0.024;
    double height = 0.048;
    double small_base = 0.0277;
    double angle_neg_y = deg2rad(30.0);
    double angle_pos_y = deg2rad(15.0);
    double depth = 0.048;
    std::vector<std::pair<Vec3, double>> faces;  // outward normal, offset

    ObjectShape build() const
    {
        if (type == "cube") {
            return cube(side);
        }
        if (type == "box") {
            return box(size.x(), size.y(), size.z());
        }
        if (type == "sphere") {
            return Sphere{radius};
        }
        if (type == "trapezoid") {
            return trapezoid_prism(height, small_base, angle_neg_y, angle_pos_y, depth);
        }
        Polyhedron p;
        for (const auto& [n, d] : faces) {
            p.faces.push_back(Face::from_outward(n.normalized(), d));
        }
        return p;
    }
};

struct ObjectSpec {
    ShapeSpec shape;
    double mass = 0.0021;
    Vec3 position = Vec3::Zero();
    UnitQuaternion orientation = UnitQuaternion::Identity();
    std::optional<Mat3> inertia;  // body frame; default from the shape at uniform density
};

struct FingerSpec {
    FingerChain chain;
    VecX initial_q;
};

struct SimulationParams {
    double dt = 1e-4;
    double duration = 5.0;
    unsigned long long seed = 0;
    bool gyroscopic = false;
    double baumgarte_alpha = 20.0;
    double baumgarte_beta = 20.0;
    int log_every = 1;
    bool stop_on_convergence = false;
};

struct ScenarioConfig {
    std::string name = "custom";
    ObjectSpec object;
    std::array<FingerSpec, 2> fingers;
    ControllerParams controller;
    ClosingParams closing;
    DetectionParams detection;
    SensorErrorModel sensor;
    FrictionParams friction;
    SimulationParams simulation;
    std::vector<Perturbation> perturbations;
    std::string output;  // CSV path; empty disables logging

    Scene scene() const
    {
        Scene s;
        s.fingers = {fingers[0].chain, fingers[1].chain};
        s.shape = object.shape.build();
        return s;
    }

    SystemState initial_state() const
    {
        SystemState s;
        for (std::size_t i = 0; i < 2; ++i) {
            s.fingers[i].q = fingers[i].initial_q;
            s.fingers[i].qdot = VecX::Zero(fingers[i].initial_q.size());
        }
        s.object.position = object.position;
        s.object.orientation = object.orientation.normalized();
        s.object.mass = object.mass;
        s.object.inertia_body = object.inertia ? *object.inertia
                                               : Mat3(object.mass * unit_mass_inertia(object.shape.build()));
        return s;
    }

    DynamicsOptions dynamics_options() const
    {
        DynamicsOptions o;
        o.gyroscopic = simulation.gyroscopic;
        o.baumgarte_alpha = simulation.baumgarte_alpha;
        o.baumgarte_beta = simulation.baumgarte_beta;
        return o;
    }

    /// Cross-field checks; throws ConfigError(ValidationError) naming the field.
    void validate() const;
};

namespace detail {

[[noreturn]] inline void invalid(const std::string& field, const std::string& what)
{
    throw ConfigError(ErrorKind::ValidationError, field, what);
}

template <class F>
void guard(const std::string& field, F&& check)
{
    try {
        check();
    } catch (const std::invalid_argument& e) {
        invalid(field, e.what());
    }
}

} // namespace detail

inline void ScenarioConfig::validate() const
{
    using detail::invalid;
    if (!(simulation.dt > 0.0)) {
        invalid("simulation.dt", "must be positive");
    }
    if (!(simulation.duration > 0.0)) {
        invalid("simulation.duration", "must be positive");
    }
    if (simulation.log_every < 1) {
        invalid("simulation.log_every", "must be at least 1");
    }
    if (!(object.mass > 0.0)) {
        invalid("object.mass", "must be positive");
    }
    const auto& sh = object.shape;
    if (sh.type == "sphere" && !(sh.radius > 0.0)) {
        invalid("object.shape.radius", "must be positive");
    }
    if (sh.type == "cube" && !(sh.side > 0.0)) {
        invalid("object.shape.side", "must be positive");
    }
    if (sh.type == "box" && !(sh.size.minCoeff() > 0.0)) {
        invalid("object.shape.size", "must be positive");
    }
    if (sh.type == "polyhedron" && sh.faces.size() < 4) {
        invalid("object.shape.faces", "needs at least four faces");
    }
    if (sh.type == "trapezoid"
        && !(sh.height > 0.0 && sh.small_base > 0.0 && sh.depth > 0.0
             && std::abs(sh.angle_neg_y) < 0.5 * kPi && std::abs(sh.angle_pos_y) < 0.5 * kPi)) {
        invalid("object.shape", "trapezoid dimensions must be positive and angles within (-90, 90) deg");
    }
    if (object.inertia) {
        const Mat3& m = *object.inertia;
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12
            || Eigen::SelfAdjointEigenSolver<Mat3>(m).eigenvalues().minCoeff() <= 0.0) {
            invalid("object.inertia", "must be symmetric positive definite");
        }
    }
    for (std::size_t i = 0; i < 2; ++i) {
        const std::string f = "fingers[" + std::to_string(i) + "]";
        detail::guard(f, [&] { fingers[i].chain.validate(); });
        if (fingers[i].initial_q.size() != fingers[i].chain.dof()) {
            invalid(f + ".initial_q", "length must equal the number of joints");
        }
        if (controller.damping[i].size() != fingers[i].chain.dof()) {
            invalid("controller.k_v[" + std::to_string(i) + "]", "length must equal the number of joints");
        }
        if (closing.target[i].size() != fingers[i].chain.dof()) {
            invalid("closing.targets[" + std::to_string(i) + "]", "length must equal the number of joints");
        }
        const Mat3& ks = friction.spin[i];
        if ((ks.array() < 0.0).any()) {
            invalid("friction.k_s[" + std::to_string(i) + "]", "must be non-negative");
        }
    }
    if (std::abs(fingers[0].chain.tip_radius - fingers[1].chain.tip_radius) > 1e-12) {
        invalid("fingers[1].tip_radius", "both fingertips must share one radius");
    }
    detail::guard("controller", [&] { controller.validate(); });
    detail::guard("closing", [&] { closing.validate(); });
    detail::guard("sensor", [&] { sensor.validate(); });
    if (!(detection.skin_margin > 0.0) && detection.mode == DetectionMode::Tactile) {
        invalid("closing.detection.skin_margin", "must be positive");
    }
    for (std::size_t k = 0; k < perturbations.size(); ++k) {
        const std::string f = "perturbations[" + std::to_string(k) + "]";
        const Perturbation& p = perturbations[k];
        if (!(p.time >= 0.0)) {
            invalid(f + ".time", "must be non-negative");
        }
        if (p.finger == 1 || p.finger == 2) {
            if (p.torque.size() != fingers[static_cast<std::size_t>(p.finger - 1)].chain.dof()) {
                invalid(f + ".torque", "length must equal the number of joints");
            }
        } else if (p.finger != 0) {
            invalid(f + ".finger", "must be 1 or 2");
        }
    }
}

// ---------------------------------------------------------------------------
// JSON schema

using Json = nlohmann::json;

namespace detail {

/// Walks one JSON object, remembering which keys were consumed so unknown
/// keys can be rejected with their full path.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            invalid(path_.empty() ? "<root>" : path_, "expected an object");
        }
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& raw(const std::string& key)
    {
        if (!j_.contains(key)) {
            invalid(field(key), "missing required field");
        }
        used_.insert(key);
        return j_.at(key);
    }

    Reader object(const std::string& key) { return Reader(raw(key), field(key)); }

    double number(const std::string& key) { return as_number(raw(key), field(key)); }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    int integer(const std::string& key, int fallback)
    {
        if (!has(key)) {
            return fallback;
        }
        const Json& v = raw(key);
        if (!v.is_number_integer()) {
            invalid(field(key), "expected an integer");
        }
        return v.get<int>();
    }

    bool boolean(const std::string& key, bool fallback)
    {
        if (!has(key)) {
            return fallback;
        }
        const Json& v = raw(key);
        if (!v.is_boolean()) {
            invalid(field(key), "expected true or false");
        }
        return v.get<bool>();
    }

    std::string string(const std::string& key) { return as_string(raw(key), field(key)); }
    std::string string(const std::string& key, const std::string& fallback)
    {
        return has(key) ? string(key) : fallback;
    }

    VecX vector(const std::string& key, long expected = -1) { return as_vector(raw(key), field(key), expected); }
    Vec3 vec3(const std::string& key) { return as_vector(raw(key), field(key), 3); }
    Mat3 mat3(const std::string& key) { return as_mat3(raw(key), field(key)); }

    const Json& array(const std::string& key)
    {
        const Json& v = raw(key);
        if (!v.is_array()) {
            invalid(field(key), "expected an array");
        }
        return v;
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!used_.count(it.key())) {
                invalid(field(it.key()), "unknown key");
            }
        }
    }

    static double as_number(const Json& v, const std::string& f)
    {
        if (!v.is_number()) {
            invalid(f, "expected a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            invalid(f, "must be finite");
        }
        return x;
    }

    static std::string as_string(const Json& v, const std::string& f)
    {
        if (!v.is_string()) {
            invalid(f, "expected a string");
        }
        return v.get<std::string>();
    }

    static VecX as_vector(const Json& v, const std::string& f, long expected = -1)
    {
        if (!v.is_array()) {
            invalid(f, "expected an array of numbers");
        }
        if (expected >= 0 && static_cast<long>(v.size()) != expected) {
            invalid(f, "expected " + std::to_string(expected) + " entries");
        }
        VecX out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t k = 0; k < v.size(); ++k) {
            out[static_cast<Eigen::Index>(k)] = as_number(v[k], f + "[" + std::to_string(k) + "]");
        }
        return out;
    }

    static Mat3 as_mat3(const Json& v, const std::string& f)
    {
        if (!v.is_array() || v.size() != 3) {
            invalid(f, "expected a 3x3 array of rows");
        }
        Mat3 m;
        for (std::size_t r = 0; r < 3; ++r) {
            m.row(static_cast<Eigen::Index>(r)) = as_vector(v[r], f + "[" + std::to_string(r) + "]", 3).transpose();
        }
        return m;
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline Json to_json(const VecX& v)
{
    Json a = Json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        a.push_back(v[k]);
    }
    return a;
}

inline Json to_json(const Mat3& m)
{
    Json a = Json::array();
    for (int r = 0; r < 3; ++r) {
        a.push_back(to_json(VecX(m.row(r).transpose())));
    }
    return a;
}

inline ShapeSpec parse_shape(Reader r)
{
    ShapeSpec s;
    s.type = r.string("type");
    if (s.type == "cube") {
        s.side = r.number("side");
    } else if (s.type == "box") {
        s.size = r.vec3("size");
    } else if (s.type == "sphere") {
        s.radius = r.number("radius");
    } else if (s.type == "trapezoid") {
        s.height = r.number("height");
        s.small_base = r.number("small_base");
        s.angle_neg_y = deg2rad(r.number("angle_neg_y_deg"));
        s.angle_pos_y = deg2rad(r.number("angle_pos_y_deg"));
        s.depth = r.number("depth");
    } else if (s.type == "polyhedron") {
        const Json& faces = r.array("faces");
        for (std::size_t k = 0; k < faces.size(); ++k) {
            Reader fr(faces[k], r.field("faces") + "[" + std::to_string(k) + "]");
            const Vec3 n = fr.vec3("outward");
            const double d = fr.number("offset");
            fr.finish();
            if (!(n.norm() > 0.0)) {
                invalid(fr.field("outward"), "must be non-zero");
            }
            s.faces.emplace_back(n, d);
        }
    } else {
        invalid(r.field("type"), "unknown shape type '" + s.type + "'");
    }
    r.finish();
    return s;
}

inline Json shape_json(const ShapeSpec& s)
{
    Json j{{"type", s.type}};
    if (s.type == "cube") {
        j["side"] = s.side;
    } else if (s.type == "box") {
        j["size"] = to_json(VecX(s.size));
    } else if (s.type == "sphere") {
        j["radius"] = s.radius;
    } else if (s.type == "trapezoid") {
        j["height"] = s.height;
        j["small_base"] = s.small_base;
        j["angle_neg_y_deg"] = rad2deg(s.angle_neg_y);
        j["angle_pos_y_deg"] = rad2deg(s.angle_pos_y);
        j["depth"] = s.depth;
    } else {
        Json faces = Json::array();
        for (const auto& [n, d] : s.faces) {
            faces.push_back({{"outward", to_json(VecX(n))}, {"offset", d}});
        }
        j["faces"] = faces;
    }
    return j;
}

inline TangentAxis parse_axis(const std::string& s, const std::string& f)
{
    if (s == "t_x") {
        return TangentAxis::X;
    }
    if (s == "t_y") {
        return TangentAxis::Y;
    }
    invalid(f, "expected \"t_x\" or \"t_y\"");
}

/// Either one array applied to both fingers or an array of two arrays.
inline std::array<VecX, 2> per_finger_vectors(const Json& v, const std::string& f)
{
    if (v.is_array() && !v.empty() && v[0].is_array()) {
        if (v.size() != 2) {
            invalid(f, "expected one entry per finger");
        }
        return {Reader::as_vector(v[0], f + "[0]"), Reader::as_vector(v[1], f + "[1]")};
    }
    const VecX both = Reader::as_vector(v, f);
    return {both, both};
}

} // namespace detail

/// Parses and validates a scenario document. Throws ConfigError with kind
/// ValidationError and the dotted field path on any schema violation.
inline ScenarioConfig config_from_json(const Json& doc)
{
    using detail::Reader;
    ScenarioConfig c;
    Reader root(doc, "");
    c.name = root.string("name", "custom");

    {
        Reader o = root.object("object");
        c.object.shape = detail::parse_shape(o.object("shape"));
        c.object.mass = o.number("mass");
        if (o.has("position")) {
            c.object.position = o.vec3("position");
        }
        if (o.has("orientation")) {
            const VecX q = o.vector("orientation", 4);
            if (!(q.norm() > 0.0)) {
                detail::invalid(o.field("orientation"), "quaternion must be non-zero");
            }
            c.object.orientation = UnitQuaternion(q[0], q[1], q[2], q[3]).normalized();
        }
        if (o.has("inertia")) {
            c.object.inertia = o.mat3("inertia");
        }
        o.finish();
    }

    {
        const Json& fingers = root.array("fingers");
        if (fingers.size() != 2) {
            detail::invalid("fingers", "expected exactly two fingers");
        }
        for (std::size_t i = 0; i < 2; ++i) {
            Reader fr(fingers[i], "fingers[" + std::to_string(i) + "]");
            FingerChain& chain = c.fingers[i].chain;
            chain.base_position = fr.vec3("base_position");
            if (fr.has("base_rotation")) {
                chain.base_rotation = fr.mat3("base_rotation");
            }
            chain.tip_radius = fr.number("tip_radius");
            const Json& joints = fr.array("joints");
            for (std::size_t k = 0; k < joints.size(); ++k) {
                Reader jr(joints[k], fr.field("joints") + "[" + std::to_string(k) + "]");
                Joint j;
                j.axis = jr.vec3("axis");
                j.offset = jr.vec3("offset");
                j.mass = jr.number("mass");
                j.com = jr.vec3("com");
                j.inertia = jr.mat3("inertia");
                jr.finish();
                chain.joints.push_back(j);
            }
            c.fingers[i].initial_q = fr.vector("initial_q");
            fr.finish();
        }
    }

    {
        Reader k = root.object("controller");
        c.controller.desired_force = k.number("f_d");
        c.controller.damping = detail::per_finger_vectors(k.raw("k_v"), k.field("k_v"));
        k.finish();
        c.controller.tip_radius = c.fingers[0].chain.tip_radius;
    }

    {
        Reader k = root.object("closing");
        c.closing.target = detail::per_finger_vectors(k.raw("targets"), k.field("targets"));
        c.closing.kp = k.number("kp", c.closing.kp);
        c.closing.kd = k.number("kd", c.closing.kd);
        c.closing.max_speed = k.number("max_speed", c.closing.max_speed);
        if (k.has("detection")) {
            Reader d = k.object("detection");
            const std::string mode = d.string("mode", "geometric");
            if (mode == "tactile") {
                c.detection.mode = DetectionMode::Tactile;
            } else if (mode == "geometric") {
                c.detection.mode = DetectionMode::Geometric;
            } else {
                detail::invalid(d.field("mode"), "expected \"tactile\" or \"geometric\"");
            }
            c.detection.skin_margin = d.number("skin_margin", c.detection.skin_margin);
            c.detection.threshold = d.number("threshold", c.detection.threshold);
            d.finish();
        }
        k.finish();
    }

    if (root.has("sensor")) {
        Reader k = root.object("sensor");
        if (k.has("fingers")) {
            const Json& fs = k.array("fingers");
            if (fs.size() != 2) {
                detail::invalid(k.field("fingers"), "expected one entry per finger");
            }
            for (std::size_t i = 0; i < 2; ++i) {
                Reader fr(fs[i], k.field("fingers") + "[" + std::to_string(i) + "]");
                FrameError& e = c.sensor.fingers[i];
                e.axis = detail::parse_axis(fr.string("axis", "t_x"), fr.field("axis"));
                e.bias = deg2rad(fr.number("bias_deg", 0.0));
                e.noise_std = deg2rad(fr.number("noise_std_deg", 0.0));
                fr.finish();
            }
        }
        c.sensor.update_period = k.number("update_period", 0.0);
        k.finish();
    }

    if (root.has("friction")) {
        Reader k = root.object("friction");
        const auto ks = detail::per_finger_vectors(k.raw("k_s"), k.field("k_s"));
        for (std::size_t i = 0; i < 2; ++i) {
            if (ks[i].size() != 3) {
                detail::invalid(k.field("k_s"), "expected three diagonal entries per finger");
            }
            c.friction.spin[i] = ks[i].asDiagonal();
        }
        k.finish();
    }

    {
        Reader k = root.object("simulation");
        c.simulation.dt = k.number("dt");
        c.simulation.duration = k.number("duration");
        if (k.has("seed")) {
            const Json& v = k.raw("seed");
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
                detail::invalid(k.field("seed"), "expected a non-negative integer");
            }
            c.simulation.seed = v.get<unsigned long long>();
        }
        c.simulation.gyroscopic = k.boolean("gyroscopic", false);
        c.simulation.baumgarte_alpha = k.number("baumgarte_alpha", c.simulation.baumgarte_alpha);
        c.simulation.baumgarte_beta = k.number("baumgarte_beta", c.simulation.baumgarte_beta);
        c.simulation.log_every = k.integer("log_every", 1);
        c.simulation.stop_on_convergence = k.boolean("stop_on_convergence", false);
        k.finish();
    }
    c.sensor.seed = c.simulation.seed;

    if (root.has("perturbations")) {
        const Json& ps = root.array("perturbations");
        for (std::size_t k = 0; k < ps.size(); ++k) {
            Reader pr(ps[k], "perturbations[" + std::to_string(k) + "]");
            Perturbation p;
            p.time = pr.number("time");
            if (pr.has("finger")) {
                p.finger = pr.integer("finger", 0);
                p.torque = pr.vector("torque");
            } else {
                if (pr.has("object_force")) {
                    p.object_force = pr.vec3("object_force");
                }
                if (pr.has("object_torque")) {
                    p.object_torque = pr.vec3("object_torque");
                }
            }
            pr.finish();
            c.perturbations.push_back(p);
        }
    }

    c.output = root.string("output", "");
    root.finish();
    c.validate();
    return c;
}

inline ScenarioConfig parse_config(const std::string& text)
{
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(ErrorKind::ParseError, "", e.what());
    }
    return config_from_json(doc);
}

inline ScenarioConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(ErrorKind::ParseError, "", "cannot open " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

/// Inverse of config_from_json.
inline Json config_to_json(const ScenarioConfig& c)
{
    using detail::to_json;
    Json doc;
    doc["name"] = c.name;
    Json obj{{"shape", detail::shape_json(c.object.shape)},
             {"mass", c.object.mass},
             {"position", to_json(VecX(c.object.position))}};
    const UnitQuaternion& q = c.object.orientation;
    obj["orientation"] = Json::array({q.w(), q.x(), q.y(), q.z()});
    if (c.object.inertia) {
        obj["inertia"] = to_json(*c.object.inertia);
    }
    doc["object"] = obj;

    Json fingers = Json::array();
    for (const auto& f : c.fingers) {
        Json joints = Json::array();
        for (const auto& j : f.chain.joints) {
            joints.push_back({{"axis", to_json(VecX(j.axis))},
                              {"offset", to_json(VecX(j.offset))},
                              {"mass", j.mass},
                              {"com", to_json(VecX(j.com))},
                              {"inertia", to_json(j.inertia)}});
        }
        fingers.push_back({{"base_position", to_json(VecX(f.chain.base_position))},
                           {"base_rotation", to_json(f.chain.base_rotation)},
                           {"tip_radius", f.chain.tip_radius},
                           {"joints", joints},
                           {"initial_q", to_json(f.initial_q)}});
    }
    doc["fingers"] = fingers;

    doc["controller"] = {{"f_d", c.controller.desired_force},
                         {"k_v", Json::array({to_json(c.controller.damping[0]), to_json(c.controller.damping[1])})}};
    doc["closing"] = {{"targets", Json::array({to_json(c.closing.target[0]), to_json(c.closing.target[1])})},
                      {"kp", c.closing.kp},
                      {"kd", c.closing.kd},
                      {"max_speed", c.closing.max_speed},
                      {"detection",
                       {{"mode", c.detection.mode == DetectionMode::Tactile ? "tactile" : "geometric"},
                        {"skin_margin", c.detection.skin_margin},
                        {"threshold", c.detection.threshold}}}};
    Json sensor_fingers = Json::array();
    for (const auto& e : c.sensor.fingers) {
        sensor_fingers.push_back({{"axis", e.axis == TangentAxis::X ? "t_x" : "t_y"},
                                  {"bias_deg", rad2deg(e.bias)},
                                  {"noise_std_deg", rad2deg(e.noise_std)}});
    }
    doc["sensor"] = {{"fingers", sensor_fingers}, {"update_period", c.sensor.update_period}};
    doc["friction"] = {{"k_s", Json::array({to_json(VecX(c.friction.spin[0].diagonal())),
                                            to_json(VecX(c.friction.spin[1].diagonal()))})}};
    doc["simulation"] = {{"dt", c.simulation.dt},
                         {"duration", c.simulation.duration},
                         {"seed", c.simulation.seed},
                         {"gyroscopic", c.simulation.gyroscopic},
                         {"baumgarte_alpha", c.simulation.baumgarte_alpha},
                         {"baumgarte_beta", c.simulation.baumgarte_beta},
                         {"log_every", c.simulation.log_every},
                         {"stop_on_convergence", c.simulation.stop_on_convergence}};
    Json ps = Json::array();
    for (const auto& p : c.perturbations) {
        if (p.finger != 0) {
            ps.push_back({{"time", p.time}, {"finger", p.finger}, {"torque", to_json(p.torque)}});
        } else {
            ps.push_back({{"time", p.time},
                          {"object_force", to_json(VecX(p.object_force))},
                          {"object_torque", to_json(VecX(p.object_torque))}});
        }
    }
    doc["perturbations"] = ps;
    if (!c.output.empty()) {
        doc["output"] = c.output;
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Built-in scenes

namespace detail {

/// Joint angles placing the tip centre at `goal`: damped Gauss-Newton from
/// `q`, used only to lay out preset postures.
inline VecX reach(const FingerChain& chain, VecX q, const Vec3& goal)
{
    for (int it = 0; it < 50; ++it) {
        const Vec3 err = goal - forward_kinematics(chain, q).position;
        if (err.norm() < 1e-13) {
            break;
        }
        const Mat3X jv = jacobians(chain, q).linear;
        const MatX jjt = jv * jv.transpose() + 1e-12 * MatX::Identity(3, 3);
        q += jv.transpose() * jjt.ldlt().solve(err);
    }
    return q;
}

} // namespace detail

/// Point where the horizontal ray at height `height` (body z) heading along
/// `outward_dir` leaves the object, and the outward surface normal there.
/// Polyhedra use the face whose outward normal best matches `outward_dir`.
inline std::pair<Vec3, Vec3> preset_contact(const ObjectShape& shape, const Vec3& outward_dir, double height)
{
    const Vec3 lift = height * Vec3::UnitZ();
    if (const auto* s = std::get_if<Sphere>(&shape)) {
        const Vec3 point = std::sqrt(s->radius * s->radius - height * height) * outward_dir + lift;
        return {point, point / s->radius};
    }
    const Polyhedron& p = std::get<Polyhedron>(shape);
    const Face* best = nullptr;
    for (const auto& f : p.faces) {
        if (best == nullptr || (-f.normal).dot(outward_dir) > (-best->normal).dot(outward_dir)) {
            best = &f;
        }
    }
    const Vec3 n = -best->normal;
    const double t = (best->offset - n.dot(lift)) / n.dot(outward_dir);
    return {lift + t * outward_dir, n};
}

inline const std::vector<std::string>& builtin_scene_names()
{
    static const std::vector<std::string> names{"cube", "trapezoid", "sphere", "cube_fd10", "perturbed_cube",
                                                "trapezoid_biased"};
    return names;
}

/// Paper-parameter presets. Fingers stand below the object on either side of
/// the world y axis; each tip starts 5 mm off the object along the surface
/// normal at the height of the object origin, and the closing target moves it
/// 10 mm toward the other tip.
inline ScenarioConfig builtin_scene(const std::string& name)
{
    ScenarioConfig c;
    c.name = name;
    std::string base = name;
    if (name == "cube_fd10" || name == "perturbed_cube") {
        base = "cube";
    } else if (name == "trapezoid_biased") {
        base = "trapezoid";
    }
    if (base == "cube") {
        c.object.shape.type = "cube";
        c.object.shape.side = 0.048;
    } else if (base == "sphere") {
        c.object.shape.type = "sphere";
        c.object.shape.radius = 0.024;
    } else if (base == "trapezoid") {
        c.object.shape.type = "trapezoid";
        c.object.shape.height = 0.048;
        c.object.shape.small_base = 0.0277;
        c.object.shape.angle_neg_y = deg2rad(30.0);
        c.object.shape.angle_pos_y = deg2rad(15.0);
        c.object.shape.depth = 0.048;
    } else {
        throw Error(ErrorKind::UnknownScene, "no built-in scene named '" + name + "'");
    }
    c.object.mass = 0.0021;

    const double r = 0.015;
    const double standoff = 0.005;
    const ObjectShape shape = c.object.shape.build();
    const VecX q0 = (VecX(4) << 0.0, deg2rad(10.0), deg2rad(30.0), deg2rad(40.0)).finished();
    std::array<Vec3, 2> tips;
    for (std::size_t i = 0; i < 2; ++i) {
        const Vec3 dir = (i == 0) ? Vec3(-Vec3::UnitY()) : Vec3(Vec3::UnitY());
        const auto [point, outward] = preset_contact(shape, dir, 0.0);
        tips[i] = point + (r + standoff) * outward;
    }
    for (std::size_t i = 0; i < 2; ++i) {
        const Vec3 flexion = (i == 0) ? Vec3(-Vec3::UnitX()) : Vec3(Vec3::UnitX());
        FingerChain chain = default_finger(Vec3::Zero(), Mat3::Identity(), flexion, r);
        chain.base_position = tips[i] - forward_kinematics(chain, q0).position;
        const Vec3 toward = (tips[1 - i] - tips[i]).normalized();
        c.closing.target[i] = detail::reach(chain, q0, tips[i] + 0.01 * toward);
        c.fingers[i].chain = chain;
        c.fingers[i].initial_q = q0;
    }

    c.controller.desired_force = (name == "cube_fd10") ? 10.0 : 4.0;
    c.controller.damping = {VecX::Constant(4, 0.07), VecX::Constant(4, 0.07)};
    c.controller.tip_radius = r;

    if (name == "trapezoid_biased") {
        c.sensor.fingers[0] = {TangentAxis::X, deg2rad(30.0), 0.0};
        c.sensor.fingers[1] = {TangentAxis::X, deg2rad(15.0), 0.0};
    }
    if (name == "perturbed_cube") {
        c.perturbations.push_back({2.0, 1, VecX::Constant(4, 0.5), Vec3::Zero(), Vec3::Zero()});
        c.perturbations.push_back({3.0, 2, VecX::Constant(4, 0.5), Vec3::Zero(), Vec3::Zero()});
    }
    c.validate();
    return c;
}

} // namespace pinch

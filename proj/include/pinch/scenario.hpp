#pragma once

#include "pinch/config.hpp"
#include "pinch/contact.hpp"
#include "pinch/controller.hpp"
#include "pinch/diagnostics.hpp"
#include "pinch/dynamics.hpp"
#include "pinch/sensor.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pinch {

// ---------------------------------------------------------------------------
// Trajectory log

/// One logged sample. Contact and energy fields are NaN outside the grasping
/// phase.
struct TrajectoryRow {
    double t = 0.0;
    std::string phase;
    SystemState state;
    RelativeAngles angles;
    Multipliers multipliers;
    std::array<double, 2> force{};  // contact force magnitudes
    double value = std::numeric_limits<double>::quiet_NaN();        // V
    double dissipation = std::numeric_limits<double>::quiet_NaN();  // W
    std::array<double, 2> gap{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double rolling_residual = std::numeric_limits<double>::quiet_NaN();
    std::optional<EquilibriumResiduals> residuals;
    double max_speed = 0.0;
};

inline std::vector<std::string> csv_header(const Scene& scene)
{
    std::vector<std::string> h{"t", "phase"};
    for (const char* prefix : {"q", "qd"}) {
        for (int i = 0; i < 2; ++i) {
            for (int k = 0; k < scene.fingers[static_cast<std::size_t>(i)].dof(); ++k) {
                h.push_back(std::string(prefix) + std::to_string(i + 1) + "_" + std::to_string(k));
            }
        }
    }
    for (const char* name : {"po_x", "po_y", "po_z", "quat_w", "quat_x", "quat_y", "quat_z", "vo_x", "vo_y",
                             "vo_z", "wo_x", "wo_y", "wo_z", "phi", "psi", "f1", "f2", "lambda1_x", "lambda1_y",
                             "lambda2_x", "lambda2_y", "force1", "force2", "V", "W", "gap1", "gap2",
                             "rolling_residual", "parallelism", "spin_moment", "delta_f1", "delta_f2",
                             "delta_lambda1", "delta_lambda2", "delta_n1", "delta_n2", "beta_psi1", "beta_psi2",
                             "beta_phi1", "beta_phi2", "force_error1", "force_error2", "max_speed"}) {
        h.emplace_back(name);
    }
    return h;
}

/// Fixed-format CSV writer; identical inputs give byte-identical files.
class CsvLog {
public:
    CsvLog() = default;

    CsvLog(const std::string& path, const Scene& scene) : out_(path)
    {
        if (!out_) {
            throw Error(ErrorKind::ParseError, "cannot open log file " + path);
        }
        const auto h = csv_header(scene);
        for (std::size_t k = 0; k < h.size(); ++k) {
            out_ << (k ? "," : "") << h[k];
        }
        out_ << '\n';
    }

    bool is_open() const { return out_.is_open(); }

    void write(const TrajectoryRow& r)
    {
        if (!out_.is_open()) {
            return;
        }
        line_.clear();
        put(r.t);
        line_ += ',';
        line_ += r.phase;
        for (const auto& f : r.state.fingers) {
            put_all(f.q);
        }
        for (const auto& f : r.state.fingers) {
            put_all(f.qdot);
        }
        const ObjectState& o = r.state.object;
        put_all(o.position);
        put(o.orientation.w());
        put(o.orientation.x());
        put(o.orientation.y());
        put(o.orientation.z());
        put_all(o.velocity);
        put_all(o.angular_velocity);
        put(r.angles.phi);
        put(r.angles.psi);
        const Multipliers& m = r.multipliers;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        put(m.active ? m.normal[0] : nan);
        put(m.active ? m.normal[1] : nan);
        for (const auto& l : m.tangential) {
            put(m.active ? l[0] : nan);
            put(m.active ? l[1] : nan);
        }
        put(m.active ? r.force[0] : nan);
        put(m.active ? r.force[1] : nan);
        put(r.value);
        put(r.dissipation);
        put(r.gap[0]);
        put(r.gap[1]);
        put(r.rolling_residual);
        if (r.residuals) {
            const EquilibriumResiduals& e = *r.residuals;
            put(e.parallelism);
            put(e.spin_moment);
            put(std::abs(e.delta_f[0]));
            put(std::abs(e.delta_f[1]));
            put(e.delta_lambda[0].norm());
            put(e.delta_lambda[1].norm());
            put(e.delta_n[0]);
            put(e.delta_n[1]);
            put(e.beta_psi[0]);
            put(e.beta_psi[1]);
            put(e.beta_phi[0]);
            put(e.beta_phi[1]);
            put(e.force_error[0]);
            put(e.force_error[1]);
        } else {
            for (int k = 0; k < 14; ++k) {
                put(nan);
            }
        }
        put(r.max_speed);
        line_ += '\n';
        out_ << line_;
    }

    void flush()
    {
        if (out_.is_open()) {
            out_.flush();
        }
    }

private:
    void put(double v)
    {
        if (!line_.empty()) {
            line_ += ',';
        }
        if (std::isnan(v)) {
            line_ += "nan";
            return;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        line_ += buf;
    }

    template <class V>
    void put_all(const V& v)
    {
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            put(v[k]);
        }
    }

    std::ofstream out_;
    std::string line_;
};

// ---------------------------------------------------------------------------
// Run orchestration

struct RunSummary {
    Verdict verdict = Verdict::Settling;
    double settle_time = -1.0;
    std::vector<double> settle_events;  // start times of each settled stretch
    std::optional<EquilibriumResiduals> final_residuals;
    std::string log_path;

    bool aborted = false;
    std::optional<ErrorKind> abort_kind;
    std::string abort_message;
    long abort_step = -1;

    double contact_time = -1.0;  // phase switch
    SystemState final_state;
    Multipliers final_multipliers;
    std::array<double, 2> final_force{};
    double trailing_max_speed = std::numeric_limits<double>::infinity();

    // Constraint fidelity over grasping-phase steps.
    double max_gap = 0.0;
    double max_rolling_residual = 0.0;

    // Passivity over grasping-phase steps (perturbation steps excluded).
    double initial_energy = 0.0;
    double max_energy_increase = -std::numeric_limits<double>::infinity();
    long rate_checks = 0;
    long rate_matches = 0;
    double min_dissipation = std::numeric_limits<double>::infinity();

    long steps = 0;
    long grasp_steps = 0;
    double wall_seconds = 0.0;

    bool converged() const { return !aborted && verdict == Verdict::Converged; }
    double rate_match_fraction() const
    {
        return rate_checks > 0 ? static_cast<double>(rate_matches) / static_cast<double>(rate_checks) : 0.0;
    }
};

/// Per-step callback; receives every step's row regardless of decimation.
using RunObserver = std::function<void(const TrajectoryRow&)>;

namespace detail {

inline double contact_force_magnitude(const ContactFrame& f, double normal, const Vec2& tangential)
{
    return (f.nz * normal + f.tx * tangential[0] + f.ty * tangential[1]).norm();
}

inline double tactile_measure(double gap, double margin, const TactileImage& reference, const TactileConfig& tc)
{
    const double indentation_mm = std::clamp((margin - gap) * 1000.0, 0.0, tc.max_indentation);
    if (indentation_mm <= 0.0) {
        return 0.0;
    }
    return e_ssim(synth_tactile_image(indentation_mm, Vec2::Zero(), tc), reference);
}

} // namespace detail

/// Default contact threshold: three times the deformation measure of a
/// 0.05 mm indentation.
inline double default_tactile_threshold(const TactileConfig& tc = {})
{
    return 3.0 * e_ssim(synth_tactile_image(0.05, Vec2::Zero(), tc), synth_tactile_image(0.0, Vec2::Zero(), tc));
}

/// Runs the closing phase, the switch to grasping and the grasping phase
/// until the configured duration (or convergence, when requested). Dynamics
/// failures end the run with `aborted` set; the log always ends with a
/// summary row.
inline RunSummary run(const ScenarioConfig& config, const RunObserver& observer = nullptr)
{
    config.validate();
    const auto wall_start = std::chrono::steady_clock::now();
    const Scene scene = config.scene();
    const DynamicsOptions opt = config.dynamics_options();
    const ControllerParams& cp = config.controller;
    const double dt = config.simulation.dt;
    const long total_steps = std::lround(config.simulation.duration / dt);
    const double fd = cp.desired_force;

    RunSummary summary;
    summary.log_path = config.output;
    CsvLog log;
    if (!config.output.empty()) {
        log = CsvLog(config.output, scene);
    }

    SystemState s = config.initial_state();
    GraspPhase phase;
    std::array<VecX, 2> reference{s.fingers[0].q, s.fingers[1].q};
    std::array<JointState, 2> held;
    FrameSensor sensor(config.sensor);
    SettleTracker tracker(fd);
    std::vector<ConvergenceSample> samples;
    std::vector<bool> fired(config.perturbations.size(), false);

    const TactileConfig tactile;
    TactileImage tactile_reference;
    double threshold = config.detection.threshold;
    if (config.detection.mode == DetectionMode::Tactile) {
        tactile_reference = synth_tactile_image(0.0, Vec2::Zero(), tactile);
        if (threshold <= 0.0) {
            threshold = default_tactile_threshold(tactile);
        }
    }

    // Passivity bookkeeping: V and W of the last two grasping steps.
    std::array<double, 2> v_hist{0.0, 0.0};
    double w_prev = 0.0;
    std::array<bool, 2> pert_hist{false, false};
    long grasp_index = 0;
    std::array<int, 2> lost{0, 0};

    TrajectoryRow row;
    long k = 0;
    auto emit = [&](const TrajectoryRow& r, bool force) {
        if (observer) {
            observer(r);
        }
        if (force || k % config.simulation.log_every == 0) {
            log.write(r);
        }
    };
    auto abort_run = [&](ErrorKind kind, const std::string& what) {
        summary.aborted = true;
        summary.abort_kind = kind;
        summary.abort_message = what;
        summary.abort_step = k;
        summary.verdict = Verdict::Diverged;
    };

    try {
        for (; k < total_steps; ++k) {
            row = TrajectoryRow{};
            row.t = s.time;
            row.state = s;
            row.max_speed = generalized_velocity(scene, s).cwiseAbs().maxCoeff();

            if (phase.phase == Phase::Closing) {
                row.phase = "closing";
                Controls u = Controls::zeros(scene);
                for (std::size_t i = 0; i < 2; ++i) {
                    if (!phase.contact[i]) {
                        const ClosingCommand cmd = closing_command(s.fingers[i], reference[i],
                                                                   config.closing.target[i], config.closing, dt);
                        reference[i] = cmd.reference;
                        u.torque[i] = cmd.torque;
                        u.damping[i] = VecX::Constant(cmd.torque.size(), config.closing.kd);
                    }
                }
                const ObjectPose pose = pose_of(s.object);
                for (std::size_t i = 0; i < 2; ++i) {
                    row.gap[i] = surface_query(scene.shape, pose, forward_kinematics(scene.fingers[i], s.fingers[i].q).position,
                                               scene.fingers[i].tip_radius)
                                     .gap;
                }
                emit(row, false);

                SystemState next = step(scene, s, u, config.friction, dt, nullptr, opt).state;
                for (std::size_t i = 0; i < 2; ++i) {
                    if (phase.contact[i]) {
                        next.fingers[i] = held[i];
                    }
                }
                std::array<bool, 2> signal{false, false};
                const ObjectPose next_pose = pose_of(next.object);
                for (std::size_t i = 0; i < 2; ++i) {
                    if (phase.contact[i]) {
                        continue;
                    }
                    const double gap = surface_query(scene.shape, next_pose,
                                                     forward_kinematics(scene.fingers[i], next.fingers[i].q).position,
                                                     scene.fingers[i].tip_radius)
                                           .gap;
                    if (gap < -opt.penetration_limit) {
                        throw SimulationAbort(ErrorKind::PenetrationExceeded, k, next,
                                              "fingertip " + std::to_string(i + 1) + " penetrated the object");
                    }
                    if (config.detection.mode == DetectionMode::Geometric) {
                        signal[i] = gap <= 0.0;
                    } else {
                        signal[i] = detect_contact(
                            detail::tactile_measure(gap, config.detection.skin_margin, tactile_reference, tactile),
                            threshold);
                    }
                    if (signal[i]) {
                        next.fingers[i].qdot.setZero();
                        held[i] = next.fingers[i];
                    }
                }
                phase = phase_update(phase, signal);
                if (phase.phase == Phase::Grasping) {
                    project_positions(scene, next);
                    project_velocities(scene, next, contact_geometry(scene, next));
                    next.rolling = RollingState{};
                    sensor.reset();
                    summary.contact_time = next.time;
                }
                s = std::move(next);
                continue;
            }

            // Grasping phase.
            row.phase = "grasping";
            const ContactGeometry g = contact_geometry(scene, s);
            const std::array<ContactFrame, 2> truth{g.fingers[0].query.frame, g.fingers[1].query.frame};
            const std::array<ContactFrame, 2> sensed = sensor.sense(truth, s.time);
            row.angles = relative_angles(s.rolling);
            const EnergyReport energy = lyapunov(scene, s, cp, row.angles, config.friction, &g);
            row.value = energy.value;
            row.dissipation = energy.dissipation;

            GraspInputs in;
            for (std::size_t i = 0; i < 2; ++i) {
                in.qdot[i] = s.fingers[i].qdot;
                in.tip_position[i] = g.fingers[i].tip.position;
                in.jac[i] = g.fingers[i].jac;
                in.sensed[i] = sensed[i];
            }
            in.angles = row.angles;
            Controls u = Controls::zeros(scene);
            u.torque = {grasp_torque(0, in, cp), grasp_torque(1, in, cp)};
            u.damping = cp.damping;
            bool perturbed = false;
            for (std::size_t p = 0; p < config.perturbations.size(); ++p) {
                const Perturbation& pert = config.perturbations[p];
                if (fired[p] || s.time + 1e-12 < pert.time) {
                    continue;
                }
                fired[p] = true;
                perturbed = true;
                if (pert.finger != 0) {
                    u.torque[static_cast<std::size_t>(pert.finger - 1)] += pert.torque;
                } else {
                    u.object_force += pert.object_force;
                    u.object_torque += pert.object_torque;
                }
            }

            const StepResult res = step(scene, s, u, config.friction, dt, &sensed, opt);
            row.multipliers = res.multipliers;
            const VecX twist = generalized_velocity(scene, s).tail<6>();
            row.rolling_residual = 0.0;
            for (std::size_t i = 0; i < 2; ++i) {
                row.gap[i] = g.fingers[i].query.gap;
                row.force[i] = detail::contact_force_magnitude(truth[i], res.multipliers.normal[i],
                                                               res.multipliers.tangential[i]);
                const Vec3 c = g.fingers[i].blocks.residual(s.fingers[i].qdot, twist);
                row.rolling_residual = std::max(row.rolling_residual, c.tail<2>().norm());
            }
            row.residuals = equilibrium_residuals(g, res.multipliers, sensed, row.angles, cp, s.object.position);
            emit(row, false);

            summary.max_gap = std::max({summary.max_gap, std::abs(row.gap[0]), std::abs(row.gap[1])});
            summary.max_rolling_residual = std::max(summary.max_rolling_residual, row.rolling_residual);
            summary.min_dissipation = std::min(summary.min_dissipation, energy.dissipation);
            summary.final_residuals = row.residuals;
            summary.final_multipliers = res.multipliers;
            summary.final_force = row.force;

            if (grasp_index == 0) {
                summary.initial_energy = energy.value;
            }
            if (grasp_index >= 1 && !pert_hist[1]) {
                summary.max_energy_increase = std::max(summary.max_energy_increase, energy.value - v_hist[1]);
            }
            if (grasp_index >= 2 && !pert_hist[0] && !pert_hist[1]) {
                const double rate = (energy.value - v_hist[0]) / (2.0 * dt);
                ++summary.rate_checks;
                if (std::abs(rate + w_prev) <= std::max(1e-4, 0.01 * w_prev)) {
                    ++summary.rate_matches;
                }
            }
            v_hist = {v_hist[1], energy.value};
            pert_hist = {pert_hist[1], perturbed};
            w_prev = energy.dissipation;
            ++grasp_index;
            ++summary.grasp_steps;

            for (std::size_t i = 0; i < 2; ++i) {
                if (std::abs(row.gap[i]) > opt.penetration_limit) {
                    throw SimulationAbort(ErrorKind::PenetrationExceeded, k, s,
                                          "contact gap of finger " + std::to_string(i + 1) + " left tolerance");
                }
                lost[i] = res.multipliers.normal[i] <= 0.0 ? lost[i] + 1 : 0;
                if (lost[i] >= opt.grasp_lost_steps) {
                    throw SimulationAbort(ErrorKind::GraspLost, k, s,
                                          "normal force of finger " + std::to_string(i + 1) + " stayed non-positive");
                }
            }

            const ConvergenceSample sample{s.time, row.max_speed, row.force};
            samples.push_back(sample);
            if (tracker.add(sample)) {
                summary.settle_events.push_back(tracker.events().back());
            }
            s = res.state;
            const bool pending = std::find(fired.begin(), fired.end(), false) != fired.end();
            if (config.simulation.stop_on_convergence && !pending && tracker.settled()) {
                ++k;
                break;
            }
        }
    } catch (const SimulationAbort& e) {
        abort_run(e.kind(), e.what());
        summary.abort_step = e.step();
        s = e.snapshot();
    } catch (const Error& e) {
        abort_run(e.kind(), e.what());
    }

    summary.steps = k;
    summary.final_state = s;
    if (!summary.aborted) {
        const ConvergenceReport report = convergence_check(samples, fd);
        summary.verdict = report.verdict;
        summary.settle_time = report.settle_time;
    }
    if (!samples.empty()) {
        double worst = 0.0;
        const double t_end = samples.back().time;
        for (auto it = samples.rbegin(); it != samples.rend() && it->time >= t_end - 0.5 - 1e-12; ++it) {
            worst = std::max(worst, it->max_speed);
        }
        summary.trailing_max_speed = worst;
    }

    TrajectoryRow last;
    last.t = s.time;
    last.phase = summary.aborted ? "aborted" : "final";
    last.state = s;
    last.angles = relative_angles(s.rolling);
    last.multipliers = summary.final_multipliers;
    last.force = summary.final_force;
    last.residuals = summary.final_residuals;
    last.max_speed = generalized_velocity(scene, s).cwiseAbs().maxCoeff();
    log.write(last);
    log.flush();

    summary.wall_seconds
        = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return summary;
}

} // namespace pinch

#include "pinch.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

std::vector<double> split_numbers(const std::string& text, std::size_t expected, const std::string& flag)
{
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "expected " + std::to_string(expected) + " comma-separated numbers");
        }
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    if (out.size() != expected) {
        throw CLI::ValidationError(flag, "expected " + std::to_string(expected) + " comma-separated numbers");
    }
    return out;
}

pinch::ScenarioConfig resolve(const std::string& source)
{
    if (std::filesystem::exists(source) || source.ends_with(".json")) {
        return pinch::load_config(source);
    }
    return pinch::builtin_scene(source);
}

void print_summary(const pinch::RunSummary& s)
{
    std::printf("verdict: %s\n", s.aborted ? "aborted" : pinch::to_string(s.verdict));
    if (s.aborted) {
        std::printf("abort: %s at step %ld\n", s.abort_message.c_str(), s.abort_step);
    }
    std::printf("contact_time: %.6g s\n", s.contact_time);
    std::printf("settle_time: %.6g s\n", s.settle_time);
    std::printf("settle_events:");
    for (double t : s.settle_events) {
        std::printf(" %.6g", t);
    }
    std::printf("\n");
    std::printf("final_force: %.9g %.9g N\n", s.final_force[0], s.final_force[1]);
    std::printf("trailing_max_speed: %.3e\n", s.trailing_max_speed);
    if (s.final_residuals) {
        const auto& r = *s.final_residuals;
        std::printf("residuals: parallelism %.3e  max_delta %.3e  max_beta %.3e\n", r.parallelism, r.max_delta(),
                    r.max_beta());
    }
    std::printf("fidelity: max_gap %.3e m  max_rolling_residual %.3e m/s\n", s.max_gap, s.max_rolling_residual);
    std::printf("passivity: V0 %.6g J  max_dV %.3e J  dV/dt match %.4f\n", s.initial_energy, s.max_energy_increase,
                s.rate_match_fraction());
    std::printf("steps: %ld (grasping %ld)  wall: %.2f s\n", s.steps, s.grasp_steps, s.wall_seconds);
    if (!s.log_path.empty()) {
        std::printf("log: %s\n", s.log_path.c_str());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Two-finger rolling pinch-grasp simulator"};
    app.require_subcommand(1);

    auto* run_cmd = app.add_subcommand("run", "Simulate a scenario (JSON config or built-in scene name)");
    std::string source;
    std::optional<double> dt;
    std::optional<double> duration;
    std::optional<unsigned long long> seed;
    std::string out_dir;
    bool gyroscopic = false;
    bool stop_on_convergence = false;
    std::string sensor_bias;
    std::string sensor_axis;
    std::vector<std::string> perturbs;
    std::optional<int> log_every;
    run_cmd->add_option("scenario", source, "config.json or preset name")->required();
    run_cmd->add_option("--dt", dt, "time step [s]")->check(CLI::PositiveNumber);
    run_cmd->add_option("--duration", duration, "simulated time [s]")->check(CLI::PositiveNumber);
    run_cmd->add_option("--seed", seed, "sensor noise seed");
    run_cmd->add_option("--out", out_dir, "directory for the CSV log");
    run_cmd->add_flag("--include-gyroscopic", gyroscopic, "add the w x Iw term to the object dynamics");
    run_cmd->add_flag("--stop-on-convergence", stop_on_convergence, "end the run once settled");
    run_cmd->add_option("--sensor-bias", sensor_bias, "sensed-frame bias per finger in degrees: deg,deg");
    run_cmd->add_option("--sensor-axis", sensor_axis, "tangent axis the bias rotates about")
        ->check(CLI::IsMember({"t_x", "t_y"}));
    run_cmd->add_option("--perturb", perturbs, "one-step joint torque on every joint: t,finger,Nm (repeatable)");
    run_cmd->add_option("--log-every", log_every, "log every N-th step")->check(CLI::PositiveNumber);

    auto* scenes_cmd = app.add_subcommand("scenes", "List built-in scenes");
    auto* dump_cmd = app.add_subcommand("dump", "Print a scenario as JSON");
    std::string dump_source;
    dump_cmd->add_option("scenario", dump_source, "config.json or preset name")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (scenes_cmd->parsed()) {
            for (const auto& name : pinch::builtin_scene_names()) {
                std::cout << name << '\n';
            }
            return 0;
        }
        if (dump_cmd->parsed()) {
            std::cout << pinch::config_to_json(resolve(dump_source)).dump(2) << '\n';
            return 0;
        }

        pinch::ScenarioConfig config = resolve(source);
        if (dt) {
            config.simulation.dt = *dt;
        }
        if (duration) {
            config.simulation.duration = *duration;
        }
        if (seed) {
            config.simulation.seed = *seed;
            config.sensor.seed = *seed;
        }
        if (log_every) {
            config.simulation.log_every = *log_every;
        }
        config.simulation.gyroscopic = config.simulation.gyroscopic || gyroscopic;
        config.simulation.stop_on_convergence = config.simulation.stop_on_convergence || stop_on_convergence;
        if (!sensor_bias.empty()) {
            const auto deg = split_numbers(sensor_bias, 2, "--sensor-bias");
            config.sensor.fingers[0].bias = pinch::deg2rad(deg[0]);
            config.sensor.fingers[1].bias = pinch::deg2rad(deg[1]);
        }
        if (!sensor_axis.empty()) {
            for (auto& f : config.sensor.fingers) {
                f.axis = sensor_axis == "t_x" ? pinch::TangentAxis::X : pinch::TangentAxis::Y;
            }
        }
        for (const auto& p : perturbs) {
            const auto v = split_numbers(p, 3, "--perturb");
            pinch::Perturbation pert;
            pert.time = v[0];
            pert.finger = static_cast<int>(v[1]);
            if (pert.finger != v[1] || (pert.finger != 1 && pert.finger != 2)) {
                throw CLI::ValidationError("--perturb", "finger must be 1 or 2");
            }
            pert.torque = pinch::VecX::Constant(config.fingers[static_cast<std::size_t>(pert.finger - 1)].chain.dof(), v[2]);
            config.perturbations.push_back(pert);
        }
        const std::string file = config.name + "_seed" + std::to_string(config.simulation.seed) + ".csv";
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            config.output = (std::filesystem::path(out_dir) / file).string();
        } else if (config.output.empty()) {
            config.output = file;
        }
        config.validate();

        const pinch::RunSummary summary = pinch::run(config);
        print_summary(summary);
        if (summary.aborted) {
            return 3;
        }
        return summary.converged() ? 0 : 2;
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const pinch::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

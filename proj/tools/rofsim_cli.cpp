#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <iostream>
#include <string>
#include <vector>

#include "rofsim/harness.hpp"
#include "rofsim/scenario.hpp"
#include "rofsim/topology.hpp"
#include "rofsim/waveform_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::vector<nlohmann::json> split_values(const std::string& list) {
    std::vector<nlohmann::json> out;
    std::string item;
    std::stringstream in(list);
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(rofsim::parse_axis_value(item));
    return out;
}

void print_summary(const rofsim::RunReport& r) {
    std::cout << "scenario " << (r.scenario_name.empty() ? "<unnamed>" : r.scenario_name) << " digest "
              << r.scenario_digest << " topology " << r.topology << " (" << r.wss_count << " WSS, " << r.fiber_km
              << " km)\n";
    if (r.evm)
        std::printf("  ARoF EVM %.3f %% (+/- %.3f), received %.2f dBm, bit errors %zu/%zu\n", r.evm->evm_rms,
                    r.evm->evm_standard_error, r.received_power_dbm.value_or(0), r.evm->bit_errors, r.evm->bits_compared);
    else
        std::cout << "  ARoF: " << r.evm_failure << "\n";
    if (r.coherent)
        std::printf("  coherent Q %.2f dB, SNR %.2f dB, pre-FEC BER %.3g\n", r.coherent->q_factor_db, r.coherent->snr_db,
                    r.coherent->pre_fec_ber);
    else
        std::cout << "  coherent: " << r.coherent_failure << "\n";
    for (const auto& t : r.sidebands)
        if (t.tap == "rx.arof" && t.report) std::printf("  sideband asymmetry at rx.arof %.3f dB\n", t.report->asymmetry_db);
    for (const auto& w : r.warnings) std::cout << "  warning: " << w << "\n";
    std::fprintf(stderr, "  wall clock %.1f s\n", r.wall_clock_s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Radio-over-fibre and coherent channel simulator over ROADM cascades"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, axis, values;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    bool emit_spectra = false, emit_constellation = false;
    double target_evm = 4.7;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_dir, "Output directory");
        cmd->add_option("--seed", seed, "Override the scenario seed");
        cmd->add_flag("--emit-spectra", emit_spectra, "Write spectrum_<tap>.csv for every monitor tap");
        cmd->add_flag("--emit-constellation", emit_constellation, "Write constellation.csv");
    };

    CLI::App* run = app.add_subcommand("run", "Run one scenario");
    run->add_option("scenario", scenario_path, "Scenario JSON")->required();
    add_common(run);

    CLI::App* sweep = app.add_subcommand("sweep", "Run a scenario over the values of one parameter");
    sweep->add_option("scenario", scenario_path, "Scenario JSON")->required();
    sweep->add_option("--axis", axis, "Dotted parameter path, e.g. topology.preset")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required();
    sweep->add_option("--workers", workers, "Parallel sweep points")->check(CLI::PositiveNumber);
    add_common(sweep);

    CLI::App* validate = app.add_subcommand("validate", "Check a scenario file");
    validate->add_option("scenario", scenario_path, "Scenario JSON")->required();

    CLI::App* presets = app.add_subcommand("presets", "Topology presets");
    CLI::App* presets_list = presets->add_subcommand("list", "List the presets");
    presets->require_subcommand(1);

    CLI::App* calib = app.add_subcommand("calibrate", "Fit the receiver thermal noise so the scenario meets a target EVM");
    calib->add_option("scenario", scenario_path, "Scenario JSON")->required();
    calib->add_option("--target-evm", target_evm, "Target EVM in percent");
    calib->add_option("--out", out_dir, "Calibration file to write")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (presets_list->parsed()) {
            for (const char* name : {"A", "B", "C", "D"}) {
                const rofsim::TopologyChain c = rofsim::build_preset(name);
                std::cout << name << "  " << rofsim::preset_roadms(name) << " ROADM  " << c.count(rofsim::ElementKind::wss)
                          << " WSS  " << c.total_fiber_km() << " km\n";
            }
            return kExitOk;
        }

        rofsim::Scenario s;
        try {
            s = rofsim::load_scenario(scenario_path);
        } catch (const rofsim::ScenarioError& e) {
            for (const auto& d : e.diagnostics()) std::cerr << scenario_path << ": " << d.to_string() << "\n";
            return kExitValidation;
        }
        if (seed) s.seed = *seed;

        if (validate->parsed()) {
            std::cout << scenario_path << ": valid, digest " << rofsim::scenario_digest(s) << "\n";
            return kExitOk;
        }

        rofsim::RunOptions ro;
        if (!out_dir.empty()) ro.out_dir = out_dir;
        ro.emit_spectra = emit_spectra;
        ro.emit_constellation = emit_constellation;

        if (run->parsed()) {
            const rofsim::RunReport r = rofsim::run_scenario(s, ro);
            print_summary(r);
            return kExitOk;
        }
        if (sweep->parsed()) {
            rofsim::SweepOptions so;
            so.run = ro;
            so.workers = workers;
            const auto vals = split_values(values);
            // reject a bad axis before running anything
            if (!vals.empty()) (void)rofsim::with_override(s, axis, vals.front());
            const auto points = rofsim::run_sweep(s, axis, vals, so);
            std::cout << rofsim::evm_csv_header(axis);
            for (const auto& p : points)
                std::cout << rofsim::evm_csv_row(p.value.is_string() ? p.value.get<std::string>() : p.value.dump(), p);
            return kExitOk;
        }
        if (calib->parsed()) {
            rofsim::CalibrationTarget t;
            t.target_evm_percent = target_evm;
            const rofsim::CalibrationResult r = rofsim::calibrate(s, t);
            rofsim::write_file_atomically(out_dir, r.calibration_file().dump(2) + "\n");
            std::printf("thermal noise density %.6g A/sqrt(Hz), EVM %.3f %% after %d runs%s\n", r.thermal_noise_density,
                        r.achieved_evm_percent, r.iterations, r.converged ? "" : " (not converged)");
            return r.converged ? kExitOk : kExitRuntime;
        }
    } catch (const rofsim::ScenarioError& e) {
        for (const auto& d : e.diagnostics()) std::cerr << d.to_string() << "\n";
        return kExitValidation;
    } catch (const rofsim::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rofsim/analyzers.hpp"
#include "rofsim/coherent.hpp"
#include "rofsim/modem.hpp"
#include "rofsim/scenario.hpp"
#include "rofsim/topology.hpp"

namespace rofsim {

/// Adds white Gaussian noise confined to `band` (relative to the buffer
/// centre) at `snr_db` below the buffer power.
Buffer add_inband_noise(const Buffer& buf, const Band& band, double snr_db, const RngStream& rng);

struct TapSidebands {
    std::string tap;
    std::optional<SidebandReport> report;
    std::string failure;  ///< reason when report is empty
};

struct RunReport {
    std::string scenario_name;
    std::string scenario_digest;
    std::uint64_t seed = 0;
    std::string topology;  ///< preset name or "explicit"
    int wss_count = 0;
    double fiber_km = 0;

    std::optional<EvmResult> evm;
    std::string evm_failure;
    std::optional<double> received_power_dbm;  ///< ARoF power into the photodetector
    std::optional<double> rx_voa_db;

    std::optional<CoherentMetrics> coherent;
    std::string coherent_failure;
    /// Coherent launch spectrum through the receiving ARoF drop port, dBm.
    std::optional<double> coherent_leakage_dbm;

    std::vector<TapSidebands> sidebands;
    PowerTrace trace;
    std::vector<std::string> warnings;
    /// Output file name -> "ok" or "failed: <reason>".
    std::map<std::string, std::string> outputs;

    std::map<std::string, SpectrumEstimate> spectra;  ///< not serialised
    double wall_clock_s = 0;                          ///< not serialised

    /// Numeric report; deterministic for a fixed scenario.
    nlohmann::json to_json() const;
};

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;
    bool emit_spectra = false;
    bool emit_constellation = false;
};

/// Simulates one scenario end to end. Element and validation failures are
/// rethrown with the scenario name in the message; receiver failures
/// (sync loss) are recorded in the report. Outputs are written atomically
/// when `out_dir` is set.
RunReport run_scenario(const Scenario& s, const RunOptions& options = {});

struct SweepPoint {
    nlohmann::json value;
    std::optional<RunReport> report;
    std::string error;
};

struct SweepOptions {
    RunOptions run;
    int workers = 1;
};

/// One run per value of the scalar at `axis`. Point failures are recorded and
/// the sweep continues. Each point writes into out_dir/point_<i>; the
/// aggregate evm_vs_wss.csv goes to out_dir.
std::vector<SweepPoint> run_sweep(const Scenario& base, const std::string& axis,
                                  const std::vector<nlohmann::json>& values, const SweepOptions& options = {});

/// Aggregate row header and rows shared by runs and sweeps.
std::string evm_csv_header(const std::string& axis);
std::string evm_csv_row(const std::string& axis_value, const SweepPoint& point);

struct CalibrationTarget {
    double target_evm_percent = 4.7;
    double tolerance_percent = 0.05;
    int max_iterations = 12;
};

struct CalibrationResult {
    double thermal_noise_density = 0;
    double achieved_evm_percent = 0;
    double evm_standard_error = 0;
    int iterations = 0;
    bool converged = false;
    /// Merge patch a scenario can reference as its calibration.
    nlohmann::json calibration_file() const;
    Scenario calibrated;
};

/// Secant search on squared EVM against the squared photodetector
/// thermal-noise density until the scenario's EVM meets the target. Everything else in the
/// scenario (misalignment, transmitter SNR, transceiver SNR) is kept.
CalibrationResult calibrate(const Scenario& s, const CalibrationTarget& target = {});

/// Transceiver SNR ceiling that, combined with ASE at `osnr_db`, yields `snr_db`.
double transceiver_snr_for(double osnr_db, double snr_db, double baud_rate);

}  // namespace rofsim

#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rofsim/coherent.hpp"
#include "rofsim/errors.hpp"
#include "rofsim/ofdm.hpp"
#include "rofsim/optics.hpp"
#include "rofsim/topology.hpp"

namespace rofsim {

inline constexpr int kScenarioSchemaVersion = 1;

struct TransmitterConfig {
    bool enabled = true;
    LaserSpec laser;
    MzmSpec mzm;
    /// Per-channel optical power before the combining coupler.
    double launch_power_dbm = 7;
    /// In-band electrical SNR of the IF drive; unset disables transmitter noise.
    std::optional<double> tx_snr_db;
    int window_taper = 48;
};

struct CoherentConfig {
    bool enabled = true;
    CoherentSpec spec{.launch_power_dbm = 7};
};

struct TopologyConfig {
    std::string preset = "A";
    /// Explicit chain; replaces the preset when set.
    std::optional<TopologyChain> chain;
    /// Monitor tap whose kept field feeds the coherent receiver.
    std::string coherent_drop_tap = "rx.drop_in";
    double span_km = 25;
    double field_fiber_km = 9;
};

struct PowerPlan {
    double coupler_ratio = 0.5;
    /// Per-channel power every automatic EDFA restores.
    double target_launch_dbm = 4;
    double rx_preamp_output_dbm = 10;
    /// ARoF power into the photodetector set by the receive VOA; unset uses rx_voa_db.
    std::optional<double> received_power_dbm = 2.0;
    double rx_voa_db = 0;
    double rx_voa_min_db = 0;
    double rx_voa_max_db = 20;
};

struct ReceiverConfig {
    PhotodetectorSpec photodetector;
    double sync_threshold = 0.5;
};

struct OutputConfig {
    bool spectra = false;
    bool constellation = false;
    double spectrum_rbw = 10e6;
};

struct Scenario {
    int schema_version = kScenarioSchemaVersion;
    std::string name;
    std::uint64_t seed = 1;
    OfdmNumerology numerology;
    int payload_symbols = 100;
    int training_symbols = 2;
    double grid_sample_rate = 64e9;
    ChannelPlan plan;
    TransmitterConfig transmitter;
    CoherentConfig coherent;
    TopologyConfig topology;
    WssShape wss;
    MisalignmentPolicy misalignment;
    EdfaSpec edfa;
    FiberSpec fiber;  ///< length ignored
    PowerPlan power;
    ReceiverConfig receiver;
    bool noise_enabled = true;
    /// Calibration overlay as written in the file (resolved relative to it).
    std::optional<std::string> calibration;
    OutputConfig outputs;

    /// Coherent spec with its slot taken from the channel plan.
    CoherentSpec coherent_spec() const;
    PresetOptions preset_options() const;
};

struct Diagnostic {
    std::string path;  ///< dotted field path, empty for document-level problems
    std::string message;
    int line = 0;  ///< 1-based, parse errors only
    int column = 0;

    std::string to_string() const;
};

/// Scenario rejected with one diagnostic per violation.
class ScenarioError : public Error {
public:
    explicit ScenarioError(std::vector<Diagnostic> diagnostics);
    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

struct ScenarioValidation {
    std::optional<Scenario> scenario;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return scenario.has_value(); }
};

/// Parses and checks raw JSON. Relative references resolve against `base_dir`.
/// Either a scenario with no diagnostics or diagnostics and no scenario.
ScenarioValidation validate_scenario(std::string_view text, const std::filesystem::path& base_dir = {});

/// Reads and validates a scenario file; throws ScenarioError.
Scenario load_scenario(const std::filesystem::path& path);

/// Canonical JSON with every field spelled out (calibration already applied).
nlohmann::json to_json(const Scenario& s);

/// Builds a scenario from canonical JSON; throws ScenarioError.
Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// 64-bit FNV-1a of the canonical JSON, as 16 hex digits.
std::string scenario_digest(const Scenario& s);

/// Copy of `s` with the scalar at dotted `path` replaced by `value`; throws
/// ScenarioError when the path does not name a scalar field or the result is invalid.
Scenario with_override(const Scenario& s, std::string_view path, const nlohmann::json& value);

/// Parses a CLI value: JSON literal when it parses as one, else a string.
nlohmann::json parse_axis_value(std::string_view text);

}  // namespace rofsim

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rofsim/analyzers.hpp"
#include "rofsim/errors.hpp"
#include "rofsim/optics.hpp"
#include "rofsim/rng.hpp"
#include "rofsim/sample_buffer.hpp"
#include "rofsim/signal.hpp"

namespace rofsim {

enum class ElementKind { laser, mzm, fiber, edfa, voa, wss, coupler, pd, monitor };

std::string_view to_string(ElementKind kind);
ElementKind element_kind_from_string(std::string_view name);

/// Transmitter laser plus modulator: drive (electrical) -> optical field,
/// re-referenced to `grid_center` when given.
struct MzmElement {
    LaserSpec laser;
    MzmSpec mzm;
    std::optional<double> grid_center;
};

/// A CW laser added onto the current optical grid.
struct LaserElement {
    LaserSpec laser;
};

struct EdfaElement {
    EdfaSpec spec;
    /// Per-channel output power autoset aims for at this amplifier. Unset
    /// means the chain-wide target.
    std::optional<double> target_output_dbm;
    bool auto_gain = true;
};

struct VoaElement {
    double attenuation_db = 0;
    double min_db = 0;
    double max_db = 20;
    /// When set, attenuation is chosen at run time so the output power equals
    /// this value (dBm); unreachable targets fail.
    std::optional<double> target_output_dbm;
};

/// One output port of a WSS: the slots it passes.
struct WssElement {
    std::vector<WssFilterProfile> slots;
};

/// Adds the named input channel: out = sqrt(ratio) * through + sqrt(1 - ratio) * add.
struct CouplerElement {
    std::string add_input;
    double ratio = 0.5;
};

struct MonitorElement {
    std::optional<Band> osnr_band;   ///< absolute Hz
    OsnrOptions osnr;
    std::optional<Band> channel_band;  ///< absolute Hz; integrated channel power
    bool keep_field = false;
    /// Record a spectrum at `rbw`; the OSNR reading then reuses it.
    bool spectrum = false;
    double rbw = 10e6;
};

using ElementParams = std::variant<LaserElement, MzmElement, FiberSpec, EdfaElement, VoaElement, WssElement,
                                   CouplerElement, PhotodetectorSpec, MonitorElement>;

struct ElementSpec {
    std::string label;
    ElementParams params;

    ElementKind kind() const;
    /// Throws ValidationError naming the element and field.
    void validate() const;
};

struct TopologyChain {
    std::vector<ElementSpec> elements;

    std::vector<std::string> monitor_taps() const;
    int count(ElementKind kind) const;
    double total_fiber_km() const;
    ElementSpec& at(std::string_view label);
    const ElementSpec& at(std::string_view label) const;
    void validate() const;
};

struct TraceEntry {
    std::string label;
    ElementKind kind = ElementKind::monitor;
    double power_dbm = 0;        ///< total after the element
    std::optional<double> element_gain_db;  ///< applied gain (negative for loss) where it is fixed by the element
    std::optional<double> channel_power_dbm;
    std::optional<OsnrResult> osnr;
};

struct PowerTrace {
    std::vector<TraceEntry> entries;

    const TraceEntry& at(std::string_view label) const;
    /// label,kind,power_dbm,channel_power_dbm,osnr_db
    std::string to_csv() const;
};

struct Evaluation {
    Buffer output;
    PowerTrace trace;
    Warnings warnings;
    std::map<std::string, Buffer> kept_fields;
    std::map<std::string, SpectrumEstimate> spectra;
};

/// Sequential fold of the chain over `input`. `inputs` supplies named add
/// channels for couplers. Element failures are rethrown as ElementError.
Evaluation evaluate(const TopologyChain& chain, const Buffer& input, const RngStream& rng,
                    const std::map<std::string, Buffer>& inputs = {});

/// Sets automatic EDFA gains by loss-sum arithmetic from `input_power_dbm`
/// (per channel) so each amplifier restores its target. Gains below the
/// minimum are clamped; gains above the maximum raise ElementError.
TopologyChain autoset_gains(TopologyChain chain, double target_launch_dbm, std::optional<double> input_power_dbm = {});

/// Channel plan and add/drop slots.
struct ChannelPlan {
    double coherent_slot_low = 194931.25e9;
    double arof_slot_low = 194968.75e9;
    double arof_slot_high = 194975.00e9;
    double arof_carrier = 194971.875e9;
    double grid_center = 194953e9;

    WssFilterProfile coherent_slot(double misalignment = 0) const;
    WssFilterProfile arof_slot(double misalignment = 0) const;
};

struct WssShape {
    int shape_order = 4;
    double floor_rejection_db = 40;
    double insertion_loss_db = 6;
};

/// Per-WSS misalignment: explicit list (cycled if short) or uniform random.
struct MisalignmentPolicy {
    enum class Mode { explicit_list, random };
    Mode mode = Mode::explicit_list;
    std::vector<double> offsets{0.0};  ///< Hz
    double max_offset = 1e9;           ///< Hz, random mode
    std::uint64_t seed = 0;

    /// Offset for the i-th WSS of the chain.
    double offset(int index) const;
};

struct PresetOptions {
    ChannelPlan plan;
    WssShape wss;
    MisalignmentPolicy misalignment;
    EdfaSpec edfa;
    FiberSpec fiber;  ///< length ignored
    double span_km = 25;
    double field_fiber_km = 9;
    double rx_preamp_output_dbm = 10;
};

/// ROADM count of a preset: A=1 .. D=4.
int preset_roadms(std::string_view name);

/// Network chain from the first mux WSS to the ARoF drop port of the
/// receiving WSS. Taps: "tx", "<node>.out" after every booster, "rx.drop_in"
/// (kept field, before the receiving WSS) and "rx.arof" after it.
TopologyChain build_preset(std::string_view name, const PresetOptions& options = {});

}  // namespace rofsim

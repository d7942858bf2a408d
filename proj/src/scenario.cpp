#include "rofsim/scenario.hpp"

#include "rofsim/overloaded.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace rofsim {

using nlohmann::json;

namespace {

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string index_path(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

const char* type_name(const json& j) { return j.type_name(); }

/// Reads fields out of a JSON object, recording a diagnostic per problem.
class Reader {
public:
    static constexpr bool reading = true;

    Reader(const json& j, std::string path, std::vector<Diagnostic>& diags) : j_(&j), path_(std::move(path)), diags_(&diags) {
        if (!j.is_object()) {
            error(path_, std::string("expected an object, got ") + type_name(j));
            j_ = &empty();
        }
    }
    Reader(const Reader&) = delete;
    ~Reader() {
        for (const auto& [key, value] : j_->items())
            if (!seen_.count(key)) error(join(path_, key), "unknown field");
    }

    const std::string& path() const { return path_; }
    bool has(const char* key) const { return j_->contains(key); }
    void error(std::string path, std::string message) { diags_->push_back({std::move(path), std::move(message)}); }

    void operator()(const char* key, double& out) {
        if (const json* v = find(key)) {
            if (v->is_number()) out = v->get<double>();
            else mismatch(key, "a number", *v);
        }
    }
    void operator()(const char* key, int& out) {
        if (const json* v = find(key)) {
            if (v->is_number_integer() && v->get<long long>() >= std::numeric_limits<int>::min() &&
                v->get<long long>() <= std::numeric_limits<int>::max())
                out = v->get<int>();
            else mismatch(key, "an integer", *v);
        }
    }
    void operator()(const char* key, std::uint64_t& out) {
        if (const json* v = find(key)) {
            if (v->is_number_unsigned()) out = v->get<std::uint64_t>();
            else if (v->is_number_integer() && v->get<long long>() >= 0) out = static_cast<std::uint64_t>(v->get<long long>());
            else mismatch(key, "a non-negative integer", *v);
        }
    }
    void operator()(const char* key, bool& out) {
        if (const json* v = find(key)) {
            if (v->is_boolean()) out = v->get<bool>();
            else mismatch(key, "a boolean", *v);
        }
    }
    void operator()(const char* key, std::string& out) {
        if (const json* v = find(key)) {
            if (v->is_string()) out = v->get<std::string>();
            else mismatch(key, "a string", *v);
        }
    }
    void operator()(const char* key, std::vector<double>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) return mismatch(key, "an array of numbers", *v);
            std::vector<double> tmp;
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_number()) {
                    error(index_path(join(path_, key), i), std::string("expected a number, got ") + type_name((*v)[i]));
                    return;
                }
                tmp.push_back((*v)[i].get<double>());
            }
            out = std::move(tmp);
        }
    }
    /// null clears the value.
    template <typename T>
    void operator()(const char* key, std::optional<T>& out) {
        if (const json* v = find(key)) {
            if (v->is_null()) {
                out.reset();
                return;
            }
            T tmp = out.value_or(T{});
            (*this)(key, tmp);
            out = tmp;
        }
    }
    void band(const char* key, std::optional<Band>& out) {
        if (const json* v = find(key)) {
            if (v->is_null()) return out.reset();
            if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
                return mismatch(key, "[low_hz, high_hz]", *v);
            out = Band{(*v)[0].get<double>(), (*v)[1].get<double>()};
            if (!(out->high > out->low)) error(join(path_, key), "high edge must exceed the low edge");
        }
    }
    template <typename F>
    void object(const char* key, F&& body) {
        const json* v = find(key);
        Reader sub(v ? *v : empty(), join(path_, key), *diags_);
        body(sub);
    }
    /// Raw access for fields with custom handling.
    const json* raw(const char* key) { return find(key); }

private:
    const json* j_;
    std::string path_;
    std::vector<Diagnostic>* diags_;
    std::set<std::string> seen_;

    static const json& empty() {
        static const json e = json::object();
        return e;
    }
    const json* find(const char* key) {
        seen_.insert(key);
        const auto it = j_->find(key);
        return it == j_->end() ? nullptr : &*it;
    }
    void mismatch(const char* key, const char* expected, const json& got) {
        error(join(path_, key), std::string("expected ") + expected + ", got " + type_name(got));
    }
};

/// Writes fields into a JSON object.
class Writer {
public:
    static constexpr bool reading = false;

    explicit Writer(json& j) : j_(&j) { *j_ = json::object(); }

    bool has(const char*) const { return true; }
    template <typename T>
    void operator()(const char* key, const T& v) {
        (*j_)[key] = v;
    }
    template <typename T>
    void operator()(const char* key, const std::optional<T>& v) {
        if (v) (*j_)[key] = *v;
        else (*j_)[key] = nullptr;
    }
    void band(const char* key, const std::optional<Band>& b) {
        if (b) (*j_)[key] = json::array({b->low, b->high});
        else (*j_)[key] = nullptr;
    }
    template <typename F>
    void object(const char* key, F&& body) {
        Writer sub((*j_)[key]);
        body(sub);
    }
    json* target() { return j_; }

private:
    json* j_;
};

// Field bindings shared by the reader and the writer.

template <typename IO>
void bind(IO& io, OfdmNumerology& n) {
    io("n_subcarriers", n.n_subcarriers);
    io("dft_size", n.dft_size);
    io("qam_order", n.qam_order);
    io("if_frequency_hz", n.if_frequency);
    io("subcarrier_spacing_hz", n.subcarrier_spacing);
    io("cyclic_prefix_fraction", n.cyclic_prefix_fraction);
    io("subcarrier_symbol_rate_hz", n.subcarrier_symbol_rate);
    io("occupied_bandwidth_hz", n.occupied_bandwidth);
    io("raw_data_rate_bps", n.raw_data_rate);
}

template <typename IO>
void bind(IO& io, LaserSpec& l) {
    io("frequency_hz", l.frequency);
    io("power_dbm", l.power_dbm);
    io("linewidth_hz", l.linewidth);
}

template <typename IO>
void bind(IO& io, MzmSpec& m) {
    io("v_pi", m.v_pi);
    io("bias_point", m.bias_point);
    io("modulation_index", m.modulation_index);
    io("insertion_loss_db", m.insertion_loss_db);
    io("normalize_drive", m.normalize_drive);
}

template <typename IO>
void bind(IO& io, EdfaSpec& e) {
    io("gain_db", e.gain_db);
    io("noise_figure_db", e.noise_figure_db);
    io("saturation_output_power_dbm", e.saturation_output_dbm);
    io("min_gain_db", e.min_gain_db);
    io("max_gain_db", e.max_gain_db);
    io("ase_enabled", e.ase_enabled);
}

template <typename IO>
void bind(IO& io, FiberSpec& f, bool with_length) {
    if (with_length) io("length_km", f.length_km);
    io("attenuation_db_per_km", f.attenuation_db_per_km);
    io("dispersion_ps_per_nm_km", f.dispersion_ps_per_nm_km);
}

template <typename IO>
void bind(IO& io, PhotodetectorSpec& p) {
    io("responsivity_a_per_w", p.responsivity);
    io("bandwidth_hz", p.bandwidth);
    io("thermal_noise_density", p.thermal_noise_density);
    io("shot_noise", p.shot_noise);
    io("filter_order", p.filter_order);
}

template <typename IO>
void bind(IO& io, WssFilterProfile& w) {
    io("slot_low_hz", w.slot_low);
    io("slot_high_hz", w.slot_high);
    io("shape_order", w.shape_order);
    io("misalignment_hz", w.misalignment);
    io("floor_rejection_db", w.floor_rejection_db);
    io("insertion_loss_db", w.insertion_loss_db);
    io("ideal", w.ideal);
}

template <typename IO>
void bind(IO& io, WssShape& w) {
    io("shape_order", w.shape_order);
    io("floor_rejection_db", w.floor_rejection_db);
    io("insertion_loss_db", w.insertion_loss_db);
}

template <typename IO>
void bind(IO& io, ChannelPlan& p) {
    io("coherent_slot_low_hz", p.coherent_slot_low);
    io("arof_slot_low_hz", p.arof_slot_low);
    io("arof_slot_high_hz", p.arof_slot_high);
    io("arof_carrier_hz", p.arof_carrier);
    io("grid_center_hz", p.grid_center);
}

template <typename IO>
void bind(IO& io, CoherentConfig& c) {
    io("enabled", c.enabled);
    io("baud_rate", c.spec.baud_rate);
    io("center_frequency_hz", c.spec.center_frequency);
    io("rrc_rolloff", c.spec.rrc_rolloff);
    io("launch_power_dbm", c.spec.launch_power_dbm);
    // infinity is spelled null
    std::optional<double> trx;
    if (std::isfinite(c.spec.transceiver_snr_db)) trx = c.spec.transceiver_snr_db;
    io("transceiver_snr_db", trx);
    if constexpr (IO::reading) c.spec.transceiver_snr_db = trx.value_or(std::numeric_limits<double>::infinity());
}

template <typename IO>
void bind(IO& io, TransmitterConfig& t) {
    io("enabled", t.enabled);
    io.object("laser", [&](IO& s) { bind(s, t.laser); });
    io.object("mzm", [&](IO& s) { bind(s, t.mzm); });
    io("launch_power_dbm", t.launch_power_dbm);
    io("tx_snr_db", t.tx_snr_db);
    io("window_taper", t.window_taper);
}

template <typename IO>
void bind(IO& io, PowerPlan& p) {
    io("coupler_ratio", p.coupler_ratio);
    io("target_launch_dbm", p.target_launch_dbm);
    io("rx_preamp_output_dbm", p.rx_preamp_output_dbm);
    io("received_power_dbm", p.received_power_dbm);
    io("rx_voa_db", p.rx_voa_db);
    io("rx_voa_min_db", p.rx_voa_min_db);
    io("rx_voa_max_db", p.rx_voa_max_db);
}

template <typename IO>
void bind(IO& io, OutputConfig& o) {
    io("spectra", o.spectra);
    io("constellation", o.constellation);
    io("spectrum_rbw_hz", o.spectrum_rbw);
}

template <typename IO>
void bind_element(IO& io, ElementParams& params) {
    std::visit(overloaded{
                   [&](LaserElement& e) { bind(io, e.laser); },
                   [&](MzmElement& e) {
                       io.object("laser", [&](IO& s) { bind(s, e.laser); });
                       io.object("mzm", [&](IO& s) { bind(s, e.mzm); });
                       io("grid_center_hz", e.grid_center);
                   },
                   [&](FiberSpec& e) { bind(io, e, true); },
                   [&](EdfaElement& e) {
                       bind(io, e.spec);
                       io("target_output_dbm", e.target_output_dbm);
                       io("auto_gain", e.auto_gain);
                   },
                   [&](VoaElement& e) {
                       io("attenuation_db", e.attenuation_db);
                       io("min_db", e.min_db);
                       io("max_db", e.max_db);
                       io("target_output_dbm", e.target_output_dbm);
                   },
                   [&](WssElement&) {},  // slots handled by the caller
                   [&](CouplerElement& e) {
                       io("add_input", e.add_input);
                       io("ratio", e.ratio);
                   },
                   [&](PhotodetectorSpec& e) { bind(io, e); },
                   [&](MonitorElement& e) {
                       io.band("osnr_band_hz", e.osnr_band);
                       io("osnr_floor_offset_hz", e.osnr.floor_offset);
                       io("osnr_rbw_hz", e.osnr.rbw);
                       io.band("channel_band_hz", e.channel_band);
                       io("keep_field", e.keep_field);
                       io("spectrum", e.spectrum);
                       io("rbw_hz", e.rbw);
                   },
               },
               params);
}

ElementParams default_params(ElementKind kind) {
    switch (kind) {
        case ElementKind::laser: return LaserElement{};
        case ElementKind::mzm: return MzmElement{};
        case ElementKind::fiber: return FiberSpec{};
        case ElementKind::edfa: return EdfaElement{};
        case ElementKind::voa: return VoaElement{};
        case ElementKind::wss: return WssElement{};
        case ElementKind::coupler: return CouplerElement{};
        case ElementKind::pd: return PhotodetectorSpec{};
        case ElementKind::monitor: return MonitorElement{};
    }
    return MonitorElement{};
}

/// Maps a spec field name reported by validate() onto the JSON key of the section.
std::string json_key_for(const json& section, const std::string& field) {
    if (section.is_object()) {
        if (section.contains(field)) return field;
        for (const auto& [key, value] : section.items())
            if (key.rfind(field + "_", 0) == 0) return key;
    }
    return field;
}

/// Message without the "field: " prefix ValidationError adds.
std::string bare_message(const ValidationError& e) {
    const std::string what = e.what();
    const std::string prefix = e.field() + ": ";
    return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

/// Runs a spec validate() and records its violation under `path`, using the
/// canonical serialisation of the section to name the field.
template <typename F>
void check(std::vector<Diagnostic>& diags, const std::string& path, const json& section, F&& validate) {
    try {
        validate();
    } catch (const ValidationError& e) {
        diags.push_back({join(path, json_key_for(section, e.field())), bare_message(e)});
    } catch (const Error& e) {
        diags.push_back({path, e.what()});
    }
}

json section_json(auto bind_fn) {
    json j;
    Writer w(j);
    bind_fn(w);
    return j;
}

void read_chain(Reader& io, const json& elements, TopologyChain& chain, std::vector<Diagnostic>& diags) {
    const std::string base = join(io.path(), "elements");
    if (!elements.is_array()) {
        io.error(base, std::string("expected an array, got ") + type_name(elements));
        return;
    }
    std::set<std::string> labels;
    for (std::size_t i = 0; i < elements.size(); ++i) {
        const std::string path = index_path(base, i);
        const json& ej = elements[i];
        if (!ej.is_object() || !ej.contains("kind") || !ej["kind"].is_string()) {
            io.error(path, "each element needs a string 'kind'");
            continue;
        }
        ElementKind kind;
        try {
            kind = element_kind_from_string(ej["kind"].get<std::string>());
        } catch (const Error& e) {
            io.error(join(path, "kind"), e.what());
            continue;
        }
        ElementSpec spec{"", default_params(kind)};
        {
            Reader r(ej, path, diags);
            std::string kind_name;
            r("kind", kind_name);
            r("label", spec.label);
            bind_element(r, spec.params);
            if (kind == ElementKind::wss) {
                auto& w = std::get<WssElement>(spec.params);
                const json* slots = r.raw("slots");
                if (!slots || !slots->is_array() || slots->empty()) {
                    r.error(join(path, "slots"), "a WSS port needs at least one slot");
                } else {
                    for (std::size_t k = 0; k < slots->size(); ++k) {
                        WssFilterProfile p;
                        Reader sr((*slots)[k], index_path(join(path, "slots"), k), diags);
                        bind(sr, p);
                        w.slots.push_back(p);
                    }
                }
            }
        }
        if (spec.label.empty()) io.error(join(path, "label"), "must be a non-empty string");
        else if (!labels.insert(spec.label).second) io.error(join(path, "label"), "duplicate label '" + spec.label + "'");
        chain.elements.push_back(std::move(spec));
    }
}

json write_chain(const TopologyChain& chain) {
    json arr = json::array();
    for (const auto& el : chain.elements) {
        json ej;
        Writer w(ej);
        ElementParams params = el.params;
        bind_element(w, params);
        ej["kind"] = std::string(to_string(el.kind()));
        ej["label"] = el.label;
        if (const auto* wss = std::get_if<WssElement>(&el.params)) {
            json slots = json::array();
            for (WssFilterProfile p : wss->slots) slots.push_back(section_json([&](Writer& s) { bind(s, p); }));
            ej["slots"] = slots;
        }
        arr.push_back(ej);
    }
    return arr;
}

template <typename IO>
void bind_scenario(IO& io, Scenario& s) {
    io("schema_version", s.schema_version);
    io("name", s.name);
    io("seed", s.seed);
    io.object("numerology", [&](IO& x) { bind(x, s.numerology); });
    io.object("capture", [&](IO& x) {
        x("payload_symbols", s.payload_symbols);
        x("training_symbols", s.training_symbols);
        x("grid_sample_rate_hz", s.grid_sample_rate);
    });
    io.object("channel_plan", [&](IO& x) { bind(x, s.plan); });
    io.object("transmitter", [&](IO& x) { bind(x, s.transmitter); });
    io.object("coherent", [&](IO& x) { bind(x, s.coherent); });
    io.object("wss", [&](IO& x) { bind(x, s.wss); });
    io.object("edfa", [&](IO& x) { bind(x, s.edfa); });
    io.object("fiber", [&](IO& x) { bind(x, s.fiber, false); });
    io.object("power_plan", [&](IO& x) { bind(x, s.power); });
    io.object("receiver", [&](IO& x) {
        x.object("photodetector", [&](IO& y) { bind(y, s.receiver.photodetector); });
        x("sync_threshold", s.receiver.sync_threshold);
    });
    io.object("noise", [&](IO& x) { x("enabled", s.noise_enabled); });
    io.object("outputs", [&](IO& x) { bind(x, s.outputs); });
    io("calibration", s.calibration);
}

void read_misalignment(Reader& io, MisalignmentPolicy& m) {
    std::string mode = "explicit";
    io("mode", mode);
    io("offsets_hz", m.offsets);
    io("max_offset_hz", m.max_offset);
    io("seed", m.seed);
    if (mode == "explicit") {
        m.mode = MisalignmentPolicy::Mode::explicit_list;
        if (m.offsets.empty()) io.error(join(io.path(), "offsets_hz"), "explicit policy needs at least one offset");
        for (double d : m.offsets)
            if (!std::isfinite(d)) io.error(join(io.path(), "offsets_hz"), "offsets must be finite");
    } else if (mode == "random") {
        m.mode = MisalignmentPolicy::Mode::random;
        if (!io.has("seed")) io.error(join(io.path(), "seed"), "random misalignment policy requires an explicit seed");
        if (!(m.max_offset >= 0) || !std::isfinite(m.max_offset))
            io.error(join(io.path(), "max_offset_hz"), "must be finite and non-negative");
    } else {
        io.error(join(io.path(), "mode"), "expected 'explicit' or 'random', got '" + mode + "'");
    }
}

json write_misalignment(const MisalignmentPolicy& m) {
    json j;
    j["mode"] = m.mode == MisalignmentPolicy::Mode::random ? "random" : "explicit";
    j["offsets_hz"] = m.offsets;
    j["max_offset_hz"] = m.max_offset;
    j["seed"] = m.seed;
    return j;
}

void read_topology(Reader& io, TopologyConfig& t, std::vector<Diagnostic>& diags) {
    io("span_km", t.span_km);
    io("field_fiber_km", t.field_fiber_km);
    io("coherent_drop_tap", t.coherent_drop_tap);
    const json* preset = io.raw("preset");
    const json* elements = io.raw("elements");
    if (preset && elements) io.error(io.path(), "give either 'preset' or 'elements', not both");
    if (elements) {
        TopologyChain chain;
        read_chain(io, *elements, chain, diags);
        t.chain = std::move(chain);
        t.preset.clear();
    } else if (preset) {
        if (!preset->is_string()) io.error(join(io.path(), "preset"), "expected a string");
        else t.preset = preset->get<std::string>();
    }
}

json write_topology(const TopologyConfig& t) {
    json j;
    if (t.chain) j["elements"] = write_chain(*t.chain);
    else j["preset"] = t.preset;
    j["span_km"] = t.span_km;
    j["field_fiber_km"] = t.field_fiber_km;
    j["coherent_drop_tap"] = t.coherent_drop_tap;
    return j;
}

/// Semantic checks over a parsed scenario.
void check_scenario(const Scenario& s, const json& canon, std::vector<Diagnostic>& d) {
    if (s.schema_version != kScenarioSchemaVersion)
        d.push_back({"schema_version", "unsupported version " + std::to_string(s.schema_version) + ", expected " +
                                           std::to_string(kScenarioSchemaVersion)});
    check(d, "numerology", canon["numerology"], [&] { s.numerology.validate(); });
    if (s.payload_symbols < 1) d.push_back({"capture.payload_symbols", "must be positive"});
    if (s.training_symbols < 1) d.push_back({"capture.training_symbols", "at least one training symbol is required"});
    if (!(s.grid_sample_rate > 0)) d.push_back({"capture.grid_sample_rate_hz", "must be positive"});
    const ChannelPlan& p = s.plan;
    if (!(p.coherent_slot_low < p.arof_slot_low && p.arof_slot_low < p.arof_slot_high))
        d.push_back({"channel_plan", "slot edges must ascend: coherent_slot_low < arof_slot_low < arof_slot_high"});
    if (!(p.arof_carrier > p.arof_slot_low && p.arof_carrier < p.arof_slot_high))
        d.push_back({"channel_plan.arof_carrier_hz", "must lie inside the ARoF slot"});
    check(d, "transmitter.laser", canon["transmitter"]["laser"], [&] { s.transmitter.laser.validate(); });
    check(d, "transmitter.mzm", canon["transmitter"]["mzm"], [&] { s.transmitter.mzm.validate(); });
    if (s.transmitter.tx_snr_db && !std::isfinite(*s.transmitter.tx_snr_db))
        d.push_back({"transmitter.tx_snr_db", "must be finite (null disables transmitter noise)"});
    if (s.transmitter.window_taper < 0) d.push_back({"transmitter.window_taper", "must be non-negative"});
    check(d, "coherent", canon["coherent"], [&] { s.coherent_spec().validate(); });
    check(d, "wss", canon["wss"], [&] {
        WssFilterProfile w = p.arof_slot();
        w.shape_order = s.wss.shape_order;
        w.floor_rejection_db = s.wss.floor_rejection_db;
        w.insertion_loss_db = s.wss.insertion_loss_db;
        w.validate();
    });
    check(d, "edfa", canon["edfa"], [&] { s.edfa.validate(); });
    check(d, "fiber", canon["fiber"], [&] {
        FiberSpec f = s.fiber;
        f.length_km = 0;
        f.validate();
    });
    check(d, "receiver.photodetector", canon["receiver"]["photodetector"], [&] { s.receiver.photodetector.validate(); });
    if (!(s.receiver.sync_threshold > 0 && s.receiver.sync_threshold < 1))
        d.push_back({"receiver.sync_threshold", "must lie in (0, 1)"});
    const PowerPlan& pp = s.power;
    if (!(pp.coupler_ratio > 0 && pp.coupler_ratio < 1)) d.push_back({"power_plan.coupler_ratio", "must lie in (0, 1)"});
    if (!(pp.rx_voa_min_db >= 0 && pp.rx_voa_max_db <= 20 && pp.rx_voa_min_db <= pp.rx_voa_max_db))
        d.push_back({"power_plan.rx_voa_max_db", "VOA range must lie within [0, 20] dB"});
    if (!(pp.rx_voa_db >= pp.rx_voa_min_db && pp.rx_voa_db <= pp.rx_voa_max_db))
        d.push_back({"power_plan.rx_voa_db", "attenuation must lie within the configured [0, 20] dB range"});
    if (!(s.outputs.spectrum_rbw > 0)) d.push_back({"outputs.spectrum_rbw_hz", "must be positive"});
    if (s.topology.chain) {
        const auto& elements = s.topology.chain->elements;
        for (std::size_t i = 0; i < elements.size(); ++i) {
            const std::string path = index_path("topology.elements", i);
            check(d, path, canon["topology"]["elements"][i], [&] {
                try {
                    elements[i].validate();
                } catch (const ValidationError& e) {
                    // validate() prefixes the label; strip it back to the field
                    const std::string prefix = elements[i].label + ".";
                    const std::string field = e.field().rfind(prefix, 0) == 0 ? e.field().substr(prefix.size()) : e.field();
                    throw ValidationError(field, bare_message(e));
                }
            });
        }
        if (!s.topology.coherent_drop_tap.empty() && s.coherent.enabled) {
            bool found = false;
            for (const auto& el : elements)
                if (el.label == s.topology.coherent_drop_tap) {
                    const auto* m = std::get_if<MonitorElement>(&el.params);
                    found = m && m->keep_field;
                }
            if (!found)
                d.push_back({"topology.coherent_drop_tap",
                             "'" + s.topology.coherent_drop_tap + "' is not a monitor with keep_field in the chain"});
        }
    } else {
        try {
            preset_roadms(s.topology.preset);
        } catch (const ValidationError& e) {
            d.push_back({"topology.preset", bare_message(e)});
        }
        if (!(s.topology.span_km >= 0)) d.push_back({"topology.span_km", "must be non-negative"});
        if (!(s.topology.field_fiber_km >= 0)) d.push_back({"topology.field_fiber_km", "must be non-negative"});
    }
}

std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
    int line = 1, column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

Scenario parse_checked(const json& j, std::vector<Diagnostic>& diags) {
    Scenario s;
    {
        Reader r(j, "", diags);
        bind_scenario(r, s);
        r.object("topology", [&](Reader& x) { read_topology(x, s.topology, diags); });
        r.object("misalignment", [&](Reader& x) { read_misalignment(x, s.misalignment); });
    }
    // unreadable fields keep their defaults, so the semantic checks still run
    check_scenario(s, to_json(s), diags);
    return s;
}

}  // namespace

std::string Diagnostic::to_string() const {
    std::ostringstream out;
    if (line > 0) out << "line " << line << ", column " << column << ": ";
    if (!path.empty()) out << path << ": ";
    out << message;
    return out.str();
}

namespace {
std::string summarize(const std::vector<Diagnostic>& diags) {
    std::string msg = "invalid scenario";
    for (const auto& d : diags) msg += "\n  " + d.to_string();
    return msg;
}
}  // namespace

ScenarioError::ScenarioError(std::vector<Diagnostic> diagnostics)
    : Error(summarize(diagnostics)), diagnostics_(std::move(diagnostics)) {}

CoherentSpec Scenario::coherent_spec() const {
    CoherentSpec c = coherent.spec;
    c.slot_low = plan.coherent_slot_low;
    c.slot_high = plan.arof_slot_low;
    return c;
}

PresetOptions Scenario::preset_options() const {
    PresetOptions o;
    o.plan = plan;
    o.wss = wss;
    o.misalignment = misalignment;
    o.edfa = edfa;
    o.fiber = fiber;
    o.span_km = topology.span_km;
    o.field_fiber_km = topology.field_fiber_km;
    o.rx_preamp_output_dbm = power.rx_preamp_output_dbm;
    return o;
}

json to_json(const Scenario& s) {
    json j;
    Writer w(j);
    Scenario copy = s;
    bind_scenario(w, copy);
    j["topology"] = write_topology(s.topology);
    j["misalignment"] = write_misalignment(s.misalignment);
    return j;
}

Scenario scenario_from_json(const json& j, const std::filesystem::path&) {
    std::vector<Diagnostic> diags;
    Scenario s = parse_checked(j, diags);
    if (!diags.empty()) throw ScenarioError(std::move(diags));
    return s;
}

ScenarioValidation validate_scenario(std::string_view text, const std::filesystem::path& base_dir) {
    ScenarioValidation out;
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const auto [line, column] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        std::string what = e.what();
        // drop the library's "[json.exception.parse_error.101] parse error at line x, column y: " prefix
        if (const auto pos = what.find(": "); pos != std::string::npos) what = what.substr(pos + 2);
        out.diagnostics.push_back({"", what, line, column});
        return out;
    }
    if (!j.is_object()) {
        out.diagnostics.push_back({"", "scenario must be a JSON object"});
        return out;
    }
    if (j.contains("calibration") && !j["calibration"].is_null()) {
        if (!j["calibration"].is_string()) {
            out.diagnostics.push_back({"calibration", "expected a file name"});
            return out;
        }
        const std::filesystem::path ref = base_dir / j["calibration"].get<std::string>();
        std::ifstream in(ref);
        if (!in) {
            out.diagnostics.push_back({"calibration", "cannot open '" + ref.string() + "'"});
            return out;
        }
        std::stringstream buf;
        buf << in.rdbuf();
        json cal;
        try {
            cal = json::parse(buf.str());
        } catch (const json::parse_error& e) {
            out.diagnostics.push_back({"calibration", "'" + ref.string() + "' is not valid JSON: " + e.what()});
            return out;
        }
        if (!cal.is_object() || !cal.contains("patch") || !cal["patch"].is_object()) {
            out.diagnostics.push_back({"calibration", "'" + ref.string() + "' has no 'patch' object"});
            return out;
        }
        j.merge_patch(cal["patch"]);
    }
    Scenario s = parse_checked(j, out.diagnostics);
    if (out.diagnostics.empty()) out.scenario = std::move(s);
    return out;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(std::vector<Diagnostic>{{"", "cannot open scenario file '" + path.string() + "'"}});
    std::stringstream buf;
    buf << in.rdbuf();
    ScenarioValidation v = validate_scenario(buf.str(), path.parent_path());
    if (!v.ok()) throw ScenarioError(std::move(v.diagnostics));
    return std::move(*v.scenario);
}

std::string scenario_digest(const Scenario& s) {
    const std::string canon = to_json(s).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

Scenario with_override(const Scenario& s, std::string_view path, const json& value) {
    json j = to_json(s);
    const std::string spath(path);
    if (spath.empty()) throw ScenarioError(std::vector<Diagnostic>{{"", "empty parameter path"}});
    std::string pointer;
    std::stringstream parts(spath);
    for (std::string part; std::getline(parts, part, '.');) pointer += "/" + part;
    const json::json_pointer ptr(pointer);
    if (!j.contains(ptr)) throw ScenarioError(std::vector<Diagnostic>{{spath, "does not name a scenario field"}});
    const json& current = j[ptr];
    if (current.is_object() || current.is_array())
        throw ScenarioError(std::vector<Diagnostic>{{spath, "does not resolve to a scalar field"}});
    if (!value.is_primitive()) throw ScenarioError(std::vector<Diagnostic>{{spath, "sweep values must be scalars"}});
    j[ptr] = value;
    return scenario_from_json(j);
}

json parse_axis_value(std::string_view text) {
    try {
        json v = json::parse(text.begin(), text.end());
        if (v.is_primitive()) return v;
    } catch (const json::parse_error&) {
    }
    return json(std::string(text));
}

}  // namespace rofsim

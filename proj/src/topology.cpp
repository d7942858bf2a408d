#include "rofsim/topology.hpp"

#include "rofsim/overloaded.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace rofsim {

namespace {

std::string num(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

/// Re-raises a nested spec failure with the element label in the field path.
template <class F>
void with_label(const std::string& label, F&& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        const std::string msg = what.substr(std::min(what.size(), e.field().size() + 2));
        throw ValidationError(label + "." + e.field(), msg);
    }
}

constexpr std::string_view kKindNames[] = {"laser", "mzm", "fiber", "edfa", "voa", "wss", "coupler", "pd", "monitor"};

}  // namespace

std::string_view to_string(ElementKind kind) { return kKindNames[static_cast<int>(kind)]; }

ElementKind element_kind_from_string(std::string_view name) {
    for (int i = 0; i < 9; ++i)
        if (kKindNames[i] == name) return static_cast<ElementKind>(i);
    throw ValidationError("kind", "unknown element kind '" + std::string(name) + "'");
}

ElementKind ElementSpec::kind() const { return static_cast<ElementKind>(params.index()); }

void ElementSpec::validate() const {
    if (label.empty()) throw ValidationError("label", "must not be empty");
    with_label(label, [&] {
        std::visit(overloaded{
                       [](const LaserElement& e) { e.laser.validate(); },
                       [](const MzmElement& e) {
                           e.laser.validate();
                           e.mzm.validate();
                       },
                       [](const FiberSpec& e) { e.validate(); },
                       [](const EdfaElement& e) { e.spec.validate(); },
                       [](const VoaElement& e) {
                           if (!(e.min_db >= 0 && e.max_db >= e.min_db))
                               throw ValidationError("max_db", "range must satisfy 0 <= min <= max");
                           if (!(e.attenuation_db >= e.min_db && e.attenuation_db <= e.max_db))
                               throw ValidationError("attenuation_db", "must lie in [" + num(e.min_db) + ", " +
                                                                           num(e.max_db) + "] dB, got " +
                                                                           num(e.attenuation_db));
                       },
                       [](const WssElement& e) {
                           if (e.slots.empty()) throw ValidationError("slots", "a WSS port needs at least one slot");
                           for (const auto& s : e.slots) s.validate();
                           for (const auto& s : e.slots)
                               if (s.insertion_loss_db != e.slots.front().insertion_loss_db)
                                   throw ValidationError("slots", "slots of one port must share the insertion loss");
                       },
                       [](const CouplerElement& e) {
                           if (e.add_input.empty()) throw ValidationError("add_input", "must name an input channel");
                           if (!(e.ratio >= 0 && e.ratio <= 1)) throw ValidationError("ratio", "must lie in [0, 1]");
                       },
                       [](const PhotodetectorSpec& e) { e.validate(); },
                       [](const MonitorElement& e) {
                           if (!(e.rbw > 0)) throw ValidationError("rbw", "must be positive");
                       },
                   },
                   params);
    });
}

std::vector<std::string> TopologyChain::monitor_taps() const {
    std::vector<std::string> out;
    for (const auto& e : elements)
        if (e.kind() == ElementKind::monitor) out.push_back(e.label);
    return out;
}

int TopologyChain::count(ElementKind kind) const {
    return static_cast<int>(std::count_if(elements.begin(), elements.end(), [&](const ElementSpec& e) { return e.kind() == kind; }));
}

double TopologyChain::total_fiber_km() const {
    double km = 0;
    for (const auto& e : elements)
        if (const auto* f = std::get_if<FiberSpec>(&e.params)) km += f->length_km;
    return km;
}

ElementSpec& TopologyChain::at(std::string_view label) {
    for (auto& e : elements)
        if (e.label == label) return e;
    throw PreconditionError("no element labelled '" + std::string(label) + "'");
}

const ElementSpec& TopologyChain::at(std::string_view label) const {
    return const_cast<TopologyChain*>(this)->at(label);
}

void TopologyChain::validate() const {
    for (std::size_t i = 0; i < elements.size(); ++i) {
        elements[i].validate();
        for (std::size_t j = 0; j < i; ++j)
            if (elements[j].label == elements[i].label)
                throw ValidationError(elements[i].label, "duplicate element label");
    }
}

const TraceEntry& PowerTrace::at(std::string_view label) const {
    for (const auto& e : entries)
        if (e.label == label) return e;
    throw PreconditionError("no trace entry labelled '" + std::string(label) + "'");
}

std::string PowerTrace::to_csv() const {
    std::ostringstream out;
    out << "label,kind,power_dbm,channel_power_dbm,osnr_db\n" << std::setprecision(10);
    for (const auto& e : entries) {
        out << e.label << ',' << to_string(e.kind) << ',' << e.power_dbm << ',';
        if (e.channel_power_dbm) out << *e.channel_power_dbm;
        out << ',';
        if (e.osnr) {
            if (e.osnr->has_value())
                out << e.osnr->osnr_db;
            else
                out << (e.osnr->status == OsnrResult::Status::above_ceiling ? "above_ceiling" : "unmeasurable");
        }
        out << '\n';
    }
    return out.str();
}

Evaluation evaluate(const TopologyChain& chain, const Buffer& input, const RngStream& rng,
                    const std::map<std::string, Buffer>& inputs) {
    chain.validate();
    input.validate();
    Evaluation ev;
    ev.output = input;
    Buffer& buf = ev.output;
    for (std::size_t i = 0; i < chain.elements.size(); ++i) {
        const ElementSpec& el = chain.elements[i];
        const RngStream stream = rng.substream(i);
        TraceEntry entry;
        entry.label = el.label;
        entry.kind = el.kind();
        try {
            const bool needs_optical = el.kind() != ElementKind::mzm && el.kind() != ElementKind::monitor;
            if (needs_optical && !buf.is_optical()) throw PreconditionError("input must be an optical field");
            std::visit(
                overloaded{
                    [&](const LaserElement& e) {
                        const double offset = e.laser.frequency - buf.center_frequency;
                        if (std::abs(offset) >= 0.5 * buf.sample_rate)
                            throw PreconditionError("laser frequency lies outside the simulation band");
                        const Buffer cw = retune(laser_field(e.laser, buf.length(), buf.sample_rate, stream),
                                                 buf.center_frequency);
                        buf.samples.col(0) += cw.samples.col(0);
                    },
                    [&](const MzmElement& e) {
                        if (buf.is_optical()) throw PreconditionError("modulator drive must be electrical");
                        buf = mzm_modulate(e.laser, buf, e.mzm, &ev.warnings, stream);
                        if (e.grid_center) buf = retune(std::move(buf), *e.grid_center);
                    },
                    [&](const FiberSpec& e) {
                        buf = propagate_fiber(std::move(buf), e);
                        entry.element_gain_db = -e.attenuation_db_per_km * e.length_km;
                    },
                    [&](const EdfaElement& e) {
                        entry.element_gain_db =
                            saturated_gain_db(e.spec, mean_power(buf), buf.sample_rate, buf.center_frequency);
                        buf = amplify(std::move(buf), e.spec, stream, &ev.warnings);
                    },
                    [&](const VoaElement& e) {
                        double atten = e.attenuation_db;
                        if (e.target_output_dbm) {
                            atten = power_dbm(buf) - *e.target_output_dbm;
                            if (atten < e.min_db - 1e-9 || atten > e.max_db + 1e-9)
                                throw PreconditionError("output target " + num(*e.target_output_dbm) + " dBm needs " +
                                                        num(atten) + " dB, outside the [" + num(e.min_db) + ", " +
                                                        num(e.max_db) + "] dB range");
                            atten = std::clamp(atten, e.min_db, e.max_db);
                        }
                        buf = attenuate(std::move(buf), atten);
                        entry.element_gain_db = -atten;
                    },
                    [&](const WssElement& e) { buf = wss_filter(std::move(buf), std::span<const WssFilterProfile>(e.slots)); },
                    [&](const CouplerElement& e) {
                        const auto it = inputs.find(e.add_input);
                        if (it == inputs.end()) throw PreconditionError("no input channel named '" + e.add_input + "'");
                        const Eigen::Index modes = std::max(buf.modes(), it->second.modes());
                        buf = couple(with_modes(std::move(buf), modes), with_modes(it->second, modes), e.ratio);
                    },
                    [&](const PhotodetectorSpec& e) { buf = photodetect(buf, e, stream); },
                    [&](const MonitorElement& e) {
                        if (e.channel_band) entry.channel_power_dbm = watts_to_dbm(band_power(buf, *e.channel_band));
                        if (e.spectrum) {
                            SpectrumEstimate est = estimate_spectrum(buf, e.rbw);
                            if (e.osnr_band) entry.osnr = measure_osnr(est, *e.osnr_band, e.osnr);
                            ev.spectra[el.label] = std::move(est);
                        } else if (e.osnr_band) {
                            entry.osnr = measure_osnr(buf, *e.osnr_band, e.osnr);
                        }
                        if (e.keep_field) ev.kept_fields[el.label] = buf;
                    },
                },
                el.params);
        } catch (const ElementError&) {
            throw;
        } catch (const Error& e) {
            throw ElementError(el.label, e.what());
        }
        entry.power_dbm = power_dbm(buf);
        ev.trace.entries.push_back(std::move(entry));
    }
    return ev;
}

TopologyChain autoset_gains(TopologyChain chain, double target_launch_dbm, std::optional<double> input_power_dbm) {
    chain.validate();
    double p = input_power_dbm.value_or(target_launch_dbm);
    for (auto& el : chain.elements) {
        std::visit(overloaded{
                       [&](const FiberSpec& f) { p -= f.attenuation_db_per_km * f.length_km; },
                       [&](const WssElement& w) { p -= w.slots.front().insertion_loss_db; },
                       [&](const VoaElement& v) { p = v.target_output_dbm ? *v.target_output_dbm : p - v.attenuation_db; },
                       [&](const CouplerElement& c) { p += linear_to_db(c.ratio); },
                       [&](EdfaElement& e) {
                           if (!e.auto_gain) {
                               p += e.spec.gain_db;
                               return;
                           }
                           const double target = e.target_output_dbm.value_or(target_launch_dbm);
                           const double need = target - p;
                           if (need > e.spec.max_gain_db + 1e-9) {
                               std::ostringstream msg;
                               msg << "target " << target << " dBm needs " << need << " dB of gain, outside the ["
                                   << e.spec.min_gain_db << ", " << e.spec.max_gain_db << "] dB range";
                               throw ElementError(el.label, msg.str());
                           }
                           e.spec.gain_db = std::max(need, e.spec.min_gain_db);
                           p += e.spec.gain_db;
                       },
                       [](const auto&) {},
                   },
                   el.params);
    }
    return chain;
}

WssFilterProfile ChannelPlan::coherent_slot(double misalignment) const {
    WssFilterProfile p{coherent_slot_low, arof_slot_low};
    p.misalignment = misalignment;
    return p;
}

WssFilterProfile ChannelPlan::arof_slot(double misalignment) const {
    WssFilterProfile p{arof_slot_low, arof_slot_high};
    p.misalignment = misalignment;
    return p;
}

double MisalignmentPolicy::offset(int index) const {
    if (mode == Mode::random) {
        auto engine = RngStream{seed, 0}.substream(static_cast<std::uint64_t>(index)).engine();
        return std::uniform_real_distribution<double>(-max_offset, max_offset)(engine);
    }
    if (offsets.empty()) return 0.0;
    return offsets[static_cast<std::size_t>(index) % offsets.size()];
}

int preset_roadms(std::string_view name) {
    if (name.size() == 1 && name[0] >= 'A' && name[0] <= 'D') return name[0] - 'A' + 1;
    throw ValidationError("topology.preset", "unknown preset '" + std::string(name) + "', expected one of A, B, C, D");
}

TopologyChain build_preset(std::string_view name, const PresetOptions& o) {
    const int roadms = preset_roadms(name);
    TopologyChain chain;
    int wss_index = 0;
    auto shaped = [&](WssFilterProfile p) {
        p.shape_order = o.wss.shape_order;
        p.floor_rejection_db = o.wss.floor_rejection_db;
        p.insertion_loss_db = o.wss.insertion_loss_db;
        return p;
    };
    auto add_wss = [&](std::string label, bool both_slots) {
        const double delta = o.misalignment.offset(wss_index++);
        WssElement w;
        if (both_slots) w.slots.push_back(shaped(o.plan.coherent_slot(delta)));
        w.slots.push_back(shaped(o.plan.arof_slot(delta)));
        chain.elements.push_back({std::move(label), w});
    };
    auto add_edfa = [&](std::string label, std::optional<double> target = {}) {
        chain.elements.push_back({std::move(label), EdfaElement{o.edfa, target, true}});
    };
    auto add_fiber = [&](std::string label, double km) {
        FiberSpec f = o.fiber;
        f.length_km = km;
        chain.elements.push_back({std::move(label), f});
    };
    const Band arof_band{o.plan.arof_slot_low, o.plan.arof_slot_high};
    MonitorElement node_monitor;
    node_monitor.channel_band = arof_band;
    node_monitor.osnr_band = Band{o.plan.arof_carrier - 1.75e9, o.plan.arof_carrier + 1.75e9};
    node_monitor.osnr.floor_offset = 0.8e9;
    node_monitor.osnr.rbw = 10e6;

    chain.elements.push_back({"tx", node_monitor});
    for (int r = 1; r <= roadms; ++r) {
        const std::string node = "R" + std::to_string(r);
        if (r > 1) {
            add_edfa(node + ".preamp");
            add_wss(node + ".demux", true);
        }
        add_wss(node + ".mux", true);
        add_edfa(node + ".booster");
        chain.elements.push_back({node + ".out", node_monitor});
        if (r < roadms)
            add_fiber("span" + std::to_string(r), o.span_km);
        else
            add_fiber("field_fibre", o.field_fiber_km);
    }
    add_edfa("rx.preamp", o.rx_preamp_output_dbm);
    MonitorElement drop_in = node_monitor;
    drop_in.keep_field = true;
    chain.elements.push_back({"rx.drop_in", drop_in});
    add_wss("rx.demux", false);
    MonitorElement arof_out;
    arof_out.channel_band = arof_band;
    chain.elements.push_back({"rx.arof", arof_out});
    return chain;
}

}  // namespace rofsim

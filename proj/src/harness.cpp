#include "rofsim/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "rofsim/overloaded.hpp"
#include "rofsim/waveform_io.hpp"

namespace rofsim {

using nlohmann::json;

namespace {

// Per-source stream ids under the scenario seed.
enum Stream : std::uint64_t { kFrame = 1, kTxNoise, kLaser, kCoherent, kNetwork, kReceiver, kCoherentRx };

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

std::string osnr_status(const OsnrResult& r) {
    switch (r.status) {
        case OsnrResult::Status::value: return "value";
        case OsnrResult::Status::above_ceiling: return "above_ceiling";
        case OsnrResult::Status::unmeasurable: return "unmeasurable";
    }
    return "unmeasurable";
}

/// File-name-safe tap label.
std::string tap_file_name(const std::string& tap) {
    std::string out;
    for (char c : tap) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out;
}

const WssElement* first_wss_after(const TopologyChain& chain, const std::string& tap) {
    bool past = false;
    for (const auto& el : chain.elements) {
        if (el.label == tap) past = true;
        else if (past)
            if (const auto* w = std::get_if<WssElement>(&el.params)) return w;
    }
    return nullptr;
}

TopologyChain network_chain(const Scenario& s, bool noise) {
    TopologyChain chain;
    if (s.topology.chain) {
        chain = *s.topology.chain;
    } else {
        PresetOptions o = s.preset_options();
        chain = build_preset(s.topology.preset, o);
    }
    for (auto& el : chain.elements) {
        std::visit(overloaded{
                       [&](EdfaElement& e) { e.spec.ase_enabled = e.spec.ase_enabled && noise; },
                       [&](PhotodetectorSpec& p) {
                           if (!noise) {
                               p.thermal_noise_density = 0;
                               p.shot_noise = false;
                           }
                       },
                       [&](MzmElement& m) { m.laser.linewidth = noise ? m.laser.linewidth : 0.0; },
                       [&](LaserElement& l) { l.laser.linewidth = noise ? l.laser.linewidth : 0.0; },
                       [&](MonitorElement& m) {
                           m.spectrum = true;
                           m.rbw = s.outputs.spectrum_rbw;
                       },
                       [](auto&) {},
                   },
                   el.params);
    }
    chain.elements.insert(chain.elements.begin(), ElementSpec{"tx.coupler", CouplerElement{"coherent", s.power.coupler_ratio}});
    return chain;
}

std::string format_number(double v) { return number(v).dump(); }

template <typename F>
auto with_context(const Scenario& s, F&& body) -> decltype(body()) {
    const std::string where = "scenario '" + (s.name.empty() ? std::string("<unnamed>") : s.name) + "': ";
    try {
        return body();
    } catch (const ScenarioError&) {
        throw;
    } catch (const ElementError& e) {
        throw ElementError(e.label(), where + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(e.field(), where + e.what());
    } catch (const PreconditionError& e) {
        throw PreconditionError(where + e.what());
    } catch (const Error& e) {
        throw Error(where + e.what());
    }
}

}  // namespace

Buffer add_inband_noise(const Buffer& buf, const Band& band, double snr_db, const RngStream& rng) {
    buf.validate();
    if (!(band.high > band.low)) throw PreconditionError("add_inband_noise: empty band");
    const Eigen::Index n = buf.length();
    const double signal = mean_power(buf) / double(buf.modes());
    Buffer noise = add_gaussian_noise(Buffer::zeros(n, buf.modes(), buf.sample_rate, buf.center_frequency, buf.domain),
                                      1.0 / buf.sample_rate, rng);
    noise = filter_in_frequency(std::move(noise), [&](double f) { return band.contains(f) ? 1.0 : 0.0; });
    const double p = mean_power(noise) / double(buf.modes());
    if (!(p > 0)) throw PreconditionError("add_inband_noise: band holds no DFT bins");
    Buffer out = buf;
    out.samples += noise.samples * std::sqrt(signal / db_to_linear(snr_db) / p);
    return out;
}

json RunReport::to_json() const {
    json j;
    j["scenario"] = {{"name", scenario_name}, {"digest", scenario_digest}, {"seed", seed}};
    j["topology"] = {{"name", topology}, {"wss_count", wss_count}, {"fiber_km", fiber_km}};

    json arof;
    if (evm) {
        arof["status"] = "ok";
        arof["evm_percent"] = number(evm->evm_rms);
        arof["evm_standard_error_percent"] = number(evm->evm_standard_error);
        arof["snr_db"] = number(evm->snr_estimate);
        arof["bit_errors"] = evm->bit_errors;
        arof["bits_compared"] = evm->bits_compared;
        arof["timing_offset"] = evm->timing_offset;
        arof["sync_metric"] = number(evm->sync_metric);
        json sc;
        sc["index"] = evm->subcarrier_index;
        json e = json::array(), g = json::array();
        for (double v : evm->per_subcarrier_evm) e.push_back(number(v));
        for (double v : evm->channel_gain_db) g.push_back(number(v));
        sc["evm_percent"] = e;
        sc["channel_gain_db"] = g;
        arof["per_subcarrier"] = sc;
    } else {
        arof["status"] = evm_failure == "disabled" ? "disabled" : "failed";
        arof["reason"] = evm_failure;
    }
    arof["received_power_dbm"] = optional_number(received_power_dbm);
    arof["rx_voa_db"] = optional_number(rx_voa_db);
    j["arof"] = arof;

    json coh;
    if (coherent) {
        coh["status"] = "ok";
        coh["q_factor_db"] = number(coherent->q_factor_db);
        coh["snr_db"] = number(coherent->snr_db);
        coh["pre_fec_ber"] = number(coherent->pre_fec_ber);
        coh["estimated_ber"] = number(coherent->estimated_ber);
        coh["q_from_counted_ber"] = coherent->q_from_counted_ber;
        coh["bit_errors"] = coherent->bit_errors;
        coh["bits_compared"] = coherent->bits_compared;
        coh["evm_percent"] = number(coherent->evm_percent);
        coh["osnr_db"] = optional_number(coherent->osnr_db);
    } else {
        coh["status"] = coherent_failure == "disabled" ? "disabled" : "failed";
        coh["reason"] = coherent_failure;
    }
    coh["leakage_into_arof_port_dbm"] = optional_number(coherent_leakage_dbm);
    j["coherent"] = coh;

    json sb = json::array();
    for (const auto& t : sidebands) {
        json e{{"tap", t.tap}};
        if (t.report) {
            e["status"] = "ok";
            e["carrier_dbm"] = number(t.report->carrier_power_dbm);
            e["lower_sideband_dbm"] = number(t.report->lower_sideband_power_dbm);
            e["upper_sideband_dbm"] = number(t.report->upper_sideband_power_dbm);
            e["asymmetry_db"] = number(t.report->asymmetry_db);
        } else {
            e["status"] = "failed";
            e["reason"] = t.failure;
        }
        sb.push_back(e);
    }
    j["sidebands"] = sb;

    json tr = json::array();
    for (const auto& e : trace.entries) {
        json row{{"label", e.label}, {"kind", std::string(rofsim::to_string(e.kind))}, {"power_dbm", number(e.power_dbm)}};
        row["element_gain_db"] = optional_number(e.element_gain_db);
        row["channel_power_dbm"] = optional_number(e.channel_power_dbm);
        if (e.osnr) {
            row["osnr_status"] = osnr_status(*e.osnr);
            row["osnr_db"] = e.osnr->has_value() ? number(e.osnr->osnr_db) : json(nullptr);
            if (!e.osnr->reason.empty()) row["osnr_reason"] = e.osnr->reason;
        }
        tr.push_back(row);
    }
    j["power_trace"] = tr;
    j["warnings"] = warnings;
    j["outputs"] = outputs;
    return j;
}

RunReport run_scenario(const Scenario& s, const RunOptions& options) {
    return with_context(s, [&] {
        const auto start = std::chrono::steady_clock::now();
        const bool noise = s.noise_enabled;
        const OfdmNumerology& num = s.numerology;
        const double fs = s.grid_sample_rate;
        const double grid_center = s.plan.grid_center;

        RunReport rep;
        rep.scenario_name = s.name;
        rep.scenario_digest = scenario_digest(s);
        rep.seed = s.seed;
        rep.topology = s.topology.chain ? "explicit" : s.topology.preset;

        // transmitters
        const OfdmFrame frame = make_frame(num, s.payload_symbols, RngStream{s.seed, kFrame}, s.training_symbols);
        ModemOptions mo;
        mo.output_rate = fs;
        mo.window_taper = s.transmitter.window_taper;
        OfdmWaveform drive = generate_waveform(frame, num, mo);
        const Eigen::Index n = drive.signal.length();
        const double occ = num.derived_occupied_bandwidth();
        if (noise && s.transmitter.tx_snr_db)
            drive.signal = add_inband_noise(drive.signal, Band{num.if_frequency - 0.5 * occ, num.if_frequency + 0.5 * occ},
                                            *s.transmitter.tx_snr_db, RngStream{s.seed, kTxNoise});
        Warnings warnings;
        Buffer arof;
        if (s.transmitter.enabled) {
            LaserSpec laser = s.transmitter.laser;
            if (!noise) laser.linewidth = 0;
            arof = mzm_modulate(laser, drive.signal, s.transmitter.mzm, &warnings, RngStream{s.seed, kLaser});
            arof = retune(std::move(arof), grid_center);
            arof = set_power_dbm(std::move(arof), s.transmitter.launch_power_dbm);
        } else {
            arof = Buffer::zeros(n, 1, fs, grid_center, Domain::optical);
        }

        CoherentSpec cspec = s.coherent_spec();
        if (!noise) cspec.transceiver_snr_db = std::numeric_limits<double>::infinity();
        cspec.launch_power_dbm = s.coherent.spec.launch_power_dbm;
        const auto n_symbols = static_cast<Eigen::Index>(std::llround(double(n) * cspec.baud_rate / fs));
        std::optional<CoherentSignal> coherent;
        if (s.coherent.enabled)
            coherent = generate_dp_qpsk(cspec, n_symbols, fs, grid_center, RngStream{s.seed, kCoherent});
        const Buffer coherent_field =
            coherent ? coherent->field : Buffer::zeros(n, 2, fs, grid_center, Domain::optical);

        // network
        const TopologyChain network =
            autoset_gains(network_chain(s, noise), s.power.target_launch_dbm, s.transmitter.launch_power_dbm);
        rep.wss_count = network.count(ElementKind::wss);
        rep.fiber_km = network.total_fiber_km();
        Evaluation ev = evaluate(network, arof, RngStream{s.seed, kNetwork}, {{"coherent", coherent_field}});

        // ARoF receiver
        Evaluation rx_ev;
        if (s.transmitter.enabled) {
            TopologyChain rx;
            VoaElement voa{s.power.rx_voa_db, s.power.rx_voa_min_db, s.power.rx_voa_max_db, s.power.received_power_dbm};
            rx.elements.push_back({"rx.voa", voa});
            PhotodetectorSpec pd = s.receiver.photodetector;
            if (!noise) {
                pd.thermal_noise_density = 0;
                pd.shot_noise = false;
            }
            rx.elements.push_back({"rx.pd", pd});
            rx_ev = evaluate(rx, ev.output, RngStream{s.seed, kReceiver});
            rep.rx_voa_db = -*rx_ev.trace.at("rx.voa").element_gain_db;
            rep.received_power_dbm = rx_ev.trace.at("rx.voa").power_dbm;

            DemodOptions dopt;
            dopt.sync_threshold = s.receiver.sync_threshold;
            dopt.window_taper = s.transmitter.window_taper;
            DemodResult dr = demodulate(rx_ev.output, num, frame, dopt);
            if (auto* e = std::get_if<EvmResult>(&dr)) rep.evm = std::move(*e);
            else rep.evm_failure = "sync lost: " + std::get<SyncFailure>(dr).reason;
        } else {
            rep.evm_failure = "disabled";
        }

        // coherent receiver at the drop port of the receiving WSS
        if (coherent) {
            const auto kept = ev.kept_fields.find(s.topology.coherent_drop_tap);
            if (kept == ev.kept_fields.end()) {
                rep.coherent_failure = "no kept field at tap '" + s.topology.coherent_drop_tap + "'";
            } else {
                const WssElement* port = first_wss_after(network, s.topology.coherent_drop_tap);
                const double delta = port ? port->slots.front().misalignment : 0.0;
                WssFilterProfile drop = s.plan.coherent_slot(delta);
                drop.shape_order = s.wss.shape_order;
                drop.floor_rejection_db = s.wss.floor_rejection_db;
                drop.insertion_loss_db = s.wss.insertion_loss_db;
                const Buffer dropped = wss_filter(kept->second, drop);
                CoherentResult cr = coherent_receive(dropped, cspec, coherent->symbols, RngStream{s.seed, kCoherentRx});
                if (auto* m = std::get_if<CoherentMetrics>(&cr)) rep.coherent = *m;
                else rep.coherent_failure = "sync lost: " + std::get<SyncFailure>(cr).reason;
                if (port) {
                    WssFilterProfile arof_port = port->slots.back();
                    rep.coherent_leakage_dbm = leakage_into(coherent->field, arof_port);
                }
            }
        } else {
            rep.coherent_failure = "disabled";
        }

        // sideband meters at every tap
        for (const auto& tap : network.monitor_taps()) {
            TapSidebands t{tap, std::nullopt, ""};
            const auto it = ev.spectra.find(tap);
            try {
                if (it == ev.spectra.end()) throw PreconditionError("no spectrum recorded");
                t.report = measure_sidebands(it->second, s.transmitter.laser.frequency, num.if_frequency, occ);
            } catch (const Error& e) {
                t.failure = e.what();
            }
            rep.sidebands.push_back(std::move(t));
        }

        rep.trace = ev.trace;
        for (const auto& e : rx_ev.trace.entries) rep.trace.entries.push_back(e);
        for (auto* w : {&warnings, &ev.warnings})
            for (const auto& m : w->messages) rep.warnings.push_back(m);
        for (const auto& m : rx_ev.warnings.messages) rep.warnings.push_back(m);
        rep.spectra = std::move(ev.spectra);

        if (options.out_dir) {
            namespace fs = std::filesystem;
            fs::create_directories(*options.out_dir);
            auto emit = [&](const std::string& name, auto&& make) {
                try {
                    write_file_atomically(*options.out_dir / name, make());
                    rep.outputs[name] = "ok";
                } catch (const std::exception& e) {
                    rep.outputs[name] = std::string("failed: ") + e.what();
                }
            };
            emit("power_trace.csv", [&] { return rep.trace.to_csv(); });
            emit("evm_vs_wss.csv", [&] {
                SweepPoint p{json(rep.topology), rep, ""};
                return evm_csv_header("topology") + evm_csv_row(rep.topology, p);
            });
            if (options.emit_spectra || s.outputs.spectra)
                for (const auto& [tap, est] : rep.spectra) emit("spectrum_" + tap_file_name(tap) + ".csv", [&] { return est.to_csv(); });
            if (options.emit_constellation || s.outputs.constellation) {
                if (rep.evm) emit("constellation.csv", [&] { return constellation_csv(*rep.evm); });
                else rep.outputs["constellation.csv"] = "failed: " + rep.evm_failure;
            }
            rep.outputs["report.json"] = "ok";
            try {
                write_file_atomically(*options.out_dir / "report.json", rep.to_json().dump(2) + "\n");
            } catch (const std::exception& e) {
                rep.outputs["report.json"] = std::string("failed: ") + e.what();
            }
        }
        rep.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return rep;
    });
}

std::string evm_csv_header(const std::string& axis) {
    return axis +
           ",status,topology,wss_count,fiber_km,received_power_dbm,evm_percent,evm_standard_error_percent,snr_db,"
           "bit_errors,rx_asymmetry_db,coherent_q_db,coherent_snr_db,scenario_digest,error\n";
}

std::string evm_csv_row(const std::string& axis_value, const SweepPoint& point) {
    std::ostringstream out;
    auto quoted = [](std::string v) {
        for (auto& c : v)
            if (c == '\n' || c == '"') c = ' ';
        return "\"" + v + "\"";
    };
    out << quoted(axis_value) << ",";
    if (!point.report) {
        out << "error,,,,,,,,,,,,," << quoted(point.error) << "\n";
        return out.str();
    }
    const RunReport& r = *point.report;
    auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    out << (r.evm ? "ok" : "failed") << "," << r.topology << "," << r.wss_count << "," << format_number(r.fiber_km) << ","
        << opt(r.received_power_dbm) << ",";
    if (r.evm)
        out << format_number(r.evm->evm_rms) << "," << format_number(r.evm->evm_standard_error) << ","
            << format_number(r.evm->snr_estimate) << "," << r.evm->bit_errors << ",";
    else
        out << ",,,,";
    std::optional<double> asym;
    for (const auto& t : r.sidebands)
        if (t.tap == "rx.arof" && t.report) asym = t.report->asymmetry_db;
    out << opt(asym) << ",";
    if (r.coherent) out << format_number(r.coherent->q_factor_db) << "," << format_number(r.coherent->snr_db) << ",";
    else out << ",,";
    out << r.scenario_digest << "," << quoted(r.evm ? std::string() : r.evm_failure) << "\n";
    return out.str();
}

std::vector<SweepPoint> run_sweep(const Scenario& base, const std::string& axis, const std::vector<json>& values,
                                  const SweepOptions& options) {
    std::vector<SweepPoint> points(values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < values.size(); i = next++) {
            SweepPoint& p = points[i];
            p.value = values[i];
            try {
                const Scenario s = with_override(base, axis, values[i]);
                RunOptions ro = options.run;
                if (ro.out_dir) ro.out_dir = *ro.out_dir / ("point_" + std::to_string(i));
                p.report = run_scenario(s, ro);
            } catch (const std::exception& e) {
                p.error = e.what();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(values.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    if (options.run.out_dir) {
        std::filesystem::create_directories(*options.run.out_dir);
        std::string csv = evm_csv_header(axis);
        for (const auto& p : points) csv += evm_csv_row(p.value.is_string() ? p.value.get<std::string>() : p.value.dump(), p);
        write_file_atomically(*options.run.out_dir / "evm_vs_wss.csv", csv);
    }
    return points;
}

double transceiver_snr_for(double osnr_db, double snr_db, double baud_rate) {
    const double snr_ase_db = osnr_db - linear_to_db(baud_rate / kOsnrReferenceBandwidth);
    const double residual = db_to_linear(-snr_db) - db_to_linear(-snr_ase_db);
    if (!(residual > 0)) throw PreconditionError("transceiver_snr_for: ASE alone already limits the SNR below the target");
    return -linear_to_db(residual);
}

json CalibrationResult::calibration_file() const {
    json patch;
    patch["receiver"]["photodetector"]["thermal_noise_density"] = thermal_noise_density;
    patch["transmitter"]["tx_snr_db"] = optional_number(calibrated.transmitter.tx_snr_db);
    patch["misalignment"] = to_json(calibrated)["misalignment"];
    patch["coherent"]["transceiver_snr_db"] = number(calibrated.coherent.spec.transceiver_snr_db);
    json j;
    j["schema_version"] = kScenarioSchemaVersion;
    j["patch"] = patch;
    j["fit"] = {{"scenario", calibrated.name},
                {"achieved_evm_percent", achieved_evm_percent},
                {"evm_standard_error_percent", evm_standard_error},
                {"iterations", iterations},
                {"converged", converged}};
    return j;
}

CalibrationResult calibrate(const Scenario& s, const CalibrationTarget& target) {
    if (!s.noise_enabled) throw PreconditionError("calibrate: noise must be enabled");
    CalibrationResult out;
    out.calibrated = s;
    auto evm_at = [&](double density) {
        Scenario t = s;
        t.receiver.photodetector.thermal_noise_density = density;
        const RunReport r = run_scenario(t);
        if (!r.evm) throw PreconditionError("calibrate: receiver failed: " + r.evm_failure);
        ++out.iterations;
        return *r.evm;
    };
    const double goal2 = target.target_evm_percent * target.target_evm_percent;
    // EVM^2 is close to affine in the squared density; secant on (d^2, EVM^2)
    double u0 = 0, u1 = 1e-22;
    EvmResult e0 = evm_at(0.0);
    if (e0.evm_rms >= target.target_evm_percent)
        throw PreconditionError("calibrate: EVM without thermal noise is already " + format_number(e0.evm_rms) +
                                "%, above the target");
    EvmResult e1 = evm_at(std::sqrt(u1));
    double g0 = e0.evm_rms * e0.evm_rms, g1 = e1.evm_rms * e1.evm_rms;
    EvmResult best = e1;
    double best_u = u1;
    while (out.iterations < target.max_iterations) {
        if (std::abs(best.evm_rms - target.target_evm_percent) <= target.tolerance_percent) {
            out.converged = true;
            break;
        }
        double u2 = g1 != g0 ? u1 + (goal2 - g1) * (u1 - u0) / (g1 - g0) : u1 * 4;
        if (!(u2 > 0) || !std::isfinite(u2)) u2 = u1 * 4;
        u2 = std::min(u2, u1 * 1e4);
        const EvmResult e2 = evm_at(std::sqrt(u2));
        u0 = u1, g0 = g1;
        u1 = u2, g1 = e2.evm_rms * e2.evm_rms;
        if (std::abs(e2.evm_rms - target.target_evm_percent) < std::abs(best.evm_rms - target.target_evm_percent)) {
            best = e2;
            best_u = u2;
        }
    }
    if (!out.converged && std::abs(best.evm_rms - target.target_evm_percent) <= target.tolerance_percent)
        out.converged = true;
    out.thermal_noise_density = std::sqrt(best_u);
    out.achieved_evm_percent = best.evm_rms;
    out.evm_standard_error = best.evm_standard_error;
    out.calibrated.receiver.photodetector.thermal_noise_density = out.thermal_noise_density;
    return out;
}

}  // namespace rofsim

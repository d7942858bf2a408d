#include "rofsim/optics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rofsim/fft.hpp"
#include "rofsim/signal.hpp"

namespace rofsim {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

void require_optical(const Buffer& b, const char* op) {
    b.validate();
    if (!b.is_optical()) throw PreconditionError(std::string(op) + ": expected an optical buffer");
}

double super_gaussian(const WssFilterProfile& p, double f) {
    if (p.ideal) {
        const double lo = p.slot_low + p.misalignment;
        const double hi = p.slot_high + p.misalignment;
        return (f >= lo && f <= hi) ? 1.0 : 0.0;
    }
    const double x = 2.0 * (f - p.center()) / p.bandwidth();
    return std::exp(-kLn2 * std::pow(x * x, p.shape_order));
}

}  // namespace

void LaserSpec::validate() const {
    if (!(frequency > 0)) throw ValidationError("frequency", "must be positive");
    if (!(power_dbm >= -20 && power_dbm <= 17))
        throw ValidationError("power", "must be within [-20, +17] dBm, got " + fmt(power_dbm));
    if (!(linewidth >= 0)) throw ValidationError("linewidth", "must be non-negative");
}

void MzmSpec::validate() const {
    if (!(v_pi > 0)) throw ValidationError("v_pi", "must be positive");
    if (!(bias_point >= 0 && bias_point <= 1)) throw ValidationError("bias_point", "must be within [0, 1]");
    if (!(modulation_index > 0 && modulation_index <= 1))
        throw ValidationError("modulation_index", "must be within (0, 1], got " + fmt(modulation_index));
    if (!(insertion_loss_db >= 0)) throw ValidationError("insertion_loss", "must be non-negative");
}

double WssFilterProfile::edge_steepness_db_per_ghz() const {
    if (ideal) return INFINITY;
    return 40.0 * shape_order * kLn2 / (std::log(10.0) * bandwidth()) * 1e9;
}

double WssFilterProfile::power_transfer(double f) const {
    const double t = super_gaussian(*this, f);
    if (ideal) return t;
    return std::max(t, db_to_linear(-floor_rejection_db));
}

void WssFilterProfile::validate() const {
    if (!(slot_high > slot_low)) throw ValidationError("slot_high", "must exceed slot_low");
    const double granules = (slot_high - slot_low) / 6.25e9;
    if (std::abs(granules - std::round(granules)) * 6.25e9 > 1.0)
        throw ValidationError("slot_low", "slot width " + fmt(slot_high - slot_low) + " Hz is not a multiple of 6.25 GHz");
    if (shape_order < 1) throw ValidationError("shape_order", "must be >= 1");
    if (!ideal && !(floor_rejection_db >= 35))
        throw ValidationError("floor_rejection", "must be >= 35 dB, got " + fmt(floor_rejection_db));
    if (!(insertion_loss_db >= 0)) throw ValidationError("insertion_loss", "must be non-negative");
    if (!std::isfinite(misalignment)) throw ValidationError("misalignment", "must be finite");
}

double port_power_transfer(std::span<const WssFilterProfile> slots, double f) {
    double sum = 0, floor = 0;
    for (const auto& s : slots) {
        sum += super_gaussian(s, f);
        if (!s.ideal) floor = std::max(floor, db_to_linear(-s.floor_rejection_db));
    }
    return std::max(std::min(sum, 1.0), floor);
}

void EdfaSpec::validate() const {
    if (!(min_gain_db <= max_gain_db)) throw ValidationError("gain", "empty configured gain range");
    if (!(gain_db >= min_gain_db && gain_db <= max_gain_db))
        throw ValidationError("gain", "gain " + fmt(gain_db) + " dB is outside the configured range [" + fmt(min_gain_db) +
                                          ", " + fmt(max_gain_db) + "] dB");
    if (!(noise_figure_db >= 3)) throw ValidationError("noise_figure", "must be >= 3 dB, got " + fmt(noise_figure_db));
    if (!std::isfinite(saturation_output_dbm)) throw ValidationError("saturation_output_power", "must be finite");
}

void FiberSpec::validate() const {
    if (!(length_km >= 0)) throw ValidationError("length", "must be non-negative");
    if (!(attenuation_db_per_km > 0)) throw ValidationError("attenuation", "must be positive");
    if (!std::isfinite(dispersion_ps_per_nm_km)) throw ValidationError("dispersion", "must be finite");
}

void PhotodetectorSpec::validate() const {
    if (!(bandwidth > 0)) throw ValidationError("bandwidth", "must be positive");
    if (!(responsivity > 0 && responsivity <= 1.2))
        throw ValidationError("responsivity", "must be within (0, 1.2] A/W, got " + fmt(responsivity));
    if (!(thermal_noise_density >= 0)) throw ValidationError("thermal_noise_density", "must be non-negative");
    if (filter_order < 1) throw ValidationError("filter_order", "must be >= 1");
}

Buffer laser_field(const LaserSpec& laser, Eigen::Index length, double rate, const RngStream& rng) {
    laser.validate();
    Buffer out = Buffer::zeros(length, 1, rate, laser.frequency, Domain::optical);
    const double amp = std::sqrt(dbm_to_watts(laser.power_dbm));
    if (laser.linewidth == 0) {
        out.samples.setConstant(amp);
        return out;
    }
    auto engine = rng.engine();
    std::normal_distribution<double> step(0.0, std::sqrt(2 * kPi * laser.linewidth / rate));
    double phase = 0;
    for (Eigen::Index i = 0; i < length; ++i) {
        out.samples(i, 0) = std::polar(amp, phase);
        phase += step(engine);
    }
    return out;
}

Buffer mzm_modulate(const LaserSpec& carrier, const Buffer& drive, const MzmSpec& spec, Warnings* warnings,
                    const RngStream& rng) {
    spec.validate();
    drive.validate();
    if (drive.is_optical()) throw PreconditionError("mzm_modulate: drive must be an electrical buffer");
    if (drive.center_frequency != 0) throw PreconditionError("mzm_modulate: drive must be referenced to 0 Hz");
    Eigen::VectorXd v = drive.samples.col(0).real();
    const double peak = v.cwiseAbs().maxCoeff();
    if (spec.normalize_drive && peak > 0) v *= spec.modulation_index * spec.v_pi / peak;
    if (warnings && v.cwiseAbs().maxCoeff() > spec.v_pi) {
        std::ostringstream msg;
        msg << "MZM over-modulated: peak drive " << v.cwiseAbs().maxCoeff() << " V exceeds V_pi " << spec.v_pi << " V";
        warnings->add(msg.str());
    }
    Buffer out = laser_field(carrier, drive.length(), drive.sample_rate, rng);
    const double loss = std::pow(10.0, -spec.insertion_loss_db / 20.0);
    for (Eigen::Index i = 0; i < out.length(); ++i)
        out.samples(i, 0) *= loss * std::cos(0.5 * kPi * (spec.bias_point + v(i) / spec.v_pi));
    return out;
}

Buffer propagate_fiber(Buffer field, const FiberSpec& spec) {
    spec.validate();
    require_optical(field, "propagate_fiber");
    if (spec.length_km == 0) return field;
    const double length_m = spec.length_km * 1e3;
    const double lambda = kSpeedOfLight / field.center_frequency;
    const double d_si = spec.dispersion_ps_per_nm_km * 1e-6;  // s/m^2
    const double beta2 = -d_si * lambda * lambda / (2 * kPi * kSpeedOfLight);
    const double amp = std::pow(10.0, -spec.attenuation_db_per_km * spec.length_km / 20.0);
    if (beta2 == 0) {
        field.samples *= amp;
        return field;
    }
    return filter_in_frequency(std::move(field), [&](double f) {
        const double w = 2 * kPi * f;
        return std::polar(amp, -0.5 * beta2 * w * w * length_m);
    });
}

double ase_psd_per_polarization(double gain_db, double noise_figure_db, double frequency) {
    const double g = db_to_linear(gain_db);
    return std::max(0.0, g - 1) * kPlanck * frequency * db_to_linear(noise_figure_db) / 2;
}

double saturated_gain_db(const EdfaSpec& spec, double input_power_w, double sample_rate, double frequency) {
    const double g = db_to_linear(spec.gain_db);
    const double a = spec.ase_enabled ? kPlanck * frequency * db_to_linear(spec.noise_figure_db) * sample_rate : 0.0;
    const double p_sat = dbm_to_watts(spec.saturation_output_dbm);
    const double p_out = g * input_power_w + (g - 1) * a;
    if (p_out <= p_sat) return spec.gain_db;
    return linear_to_db((p_sat + a) / (input_power_w + a));
}

Buffer amplify(Buffer field, const EdfaSpec& spec, const RngStream& rng, Warnings* warnings) {
    spec.validate();
    require_optical(field, "amplify");
    field = with_modes(std::move(field), 2);
    const double gain_db = saturated_gain_db(spec, mean_power(field), field.sample_rate, field.center_frequency);
    if (gain_db < spec.gain_db && warnings) {
        std::ostringstream msg;
        msg << "EDFA gain compressed from " << spec.gain_db << " dB to " << gain_db << " dB at saturation output "
            << spec.saturation_output_dbm << " dBm";
        warnings->add(msg.str());
    }
    field.samples *= std::pow(10.0, gain_db / 20.0);
    if (spec.ase_enabled)
        field = add_gaussian_noise(std::move(field),
                                   ase_psd_per_polarization(gain_db, spec.noise_figure_db, field.center_frequency), rng);
    return field;
}

Buffer wss_filter(Buffer field, const WssFilterProfile& profile) {
    return wss_filter(std::move(field), std::span<const WssFilterProfile>(&profile, 1));
}

Buffer wss_filter(Buffer field, std::span<const WssFilterProfile> slots) {
    require_optical(field, "wss_filter");
    if (slots.empty()) throw PreconditionError("wss_filter: no slots routed");
    const double lo_edge = field.center_frequency - 0.5 * field.sample_rate;
    const double hi_edge = field.center_frequency + 0.5 * field.sample_rate;
    for (const auto& s : slots) {
        s.validate();
        if (s.insertion_loss_db != slots[0].insertion_loss_db)
            throw PreconditionError("wss_filter: slots of one device must share the insertion loss");
        if (s.slot_low + s.misalignment < lo_edge || s.slot_high + s.misalignment > hi_edge) {
            std::ostringstream msg;
            msg << "wss_filter: slot [" << s.slot_low + s.misalignment << ", " << s.slot_high + s.misalignment
                << "] Hz lies outside the buffer band [" << lo_edge << ", " << hi_edge << "] Hz";
            throw PreconditionError(msg.str());
        }
    }
    const double il = std::pow(10.0, -slots[0].insertion_loss_db / 20.0);
    const double fc = field.center_frequency;
    return filter_in_frequency(std::move(field),
                               [&](double f) { return il * std::sqrt(port_power_transfer(slots, fc + f)); });
}

Buffer attenuate(Buffer field, double atten_db) {
    field.validate();
    if (!(atten_db >= 0)) throw PreconditionError("attenuate: attenuation must be non-negative, got " + fmt(atten_db));
    if (atten_db == 0) return field;
    field.samples *= std::pow(10.0, -atten_db / 20.0);
    return field;
}

Buffer couple(const Buffer& a, const Buffer& b, double ratio) {
    require_optical(a, "couple");
    require_optical(b, "couple");
    if (!same_grid(a, b)) throw PreconditionError("couple: inputs are not on the same grid");
    if (!(ratio >= 0 && ratio <= 1)) throw PreconditionError("couple: ratio must be within [0, 1]");
    const Eigen::Index modes = std::max(a.modes(), b.modes());
    Buffer out = with_modes(a, modes);
    out.samples *= std::sqrt(ratio);
    out.samples.leftCols(b.modes()) += std::sqrt(1 - ratio) * b.samples;
    return out;
}

double photodetector_response(const PhotodetectorSpec& spec, double f) {
    const double x = f / spec.bandwidth;
    return std::exp(-kLn2 * std::pow(x * x, spec.filter_order));
}

Buffer photodetect(const Buffer& field, const PhotodetectorSpec& spec, const RngStream& rng) {
    spec.validate();
    require_optical(field, "photodetect");
    const Eigen::Index n = field.length();
    const double fs = field.sample_rate;
    Eigen::VectorXd current = spec.responsivity * field.samples.cwiseAbs2().rowwise().sum();

    const double mean_current = current.mean();
    double variance = spec.thermal_noise_density * spec.thermal_noise_density * fs / 2;
    if (spec.shot_noise) variance += kElectronCharge * std::abs(mean_current) * fs;
    if (variance > 0) {
        auto engine = rng.engine();
        std::normal_distribution<double> normal(0.0, std::sqrt(variance));
        for (Eigen::Index i = 0; i < n; ++i) current(i) += normal(engine);
    }

    // electrical low-pass and conversion to the analytic signal in one pass
    ComplexVector<double> spectrum = fft(current.cast<std::complex<double>>());
    for (Eigen::Index k = 0; k < n; ++k) {
        const double f = bin_frequency(k, n, fs);
        double w = std::sqrt(photodetector_response(spec, f));
        if (f > 0)
            w *= 2;
        else if (f < 0 || (k > 0 && 2 * k == n))
            w = 0;
        spectrum(k) *= w;
    }
    Buffer out = Buffer::zeros(n, 1, fs, 0.0, Domain::electrical);
    out.samples.col(0) = ifft(spectrum);
    return out;
}

}  // namespace rofsim

#include "rofsim/analyzers.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "rofsim/errors.hpp"
#include "rofsim/fft.hpp"

namespace rofsim {

namespace {

constexpr double kBh[4] = {0.35875, 0.48829, 0.14128, 0.01168};

Eigen::VectorXd blackman_harris(Eigen::Index n) {
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = 2 * kPi * double(i) / double(n);
        w(i) = kBh[0] - kBh[1] * std::cos(x) + kBh[2] * std::cos(2 * x) - kBh[3] * std::cos(3 * x);
    }
    return w;
}

}  // namespace

double blackman_harris_enbw() {
    const Eigen::VectorXd w = blackman_harris(4096);
    return 4096.0 * w.squaredNorm() / (w.sum() * w.sum());
}

double SpectrumEstimate::integrated_power(double low, double high) const {
    double s = 0;
    for (Eigen::Index k = 0; k < frequency.size(); ++k)
        if (frequency(k) >= low && frequency(k) <= high) s += psd(k);
    return s * bin_width;
}

double SpectrumEstimate::mean_psd(double low, double high) const {
    double s = 0;
    int c = 0;
    for (Eigen::Index k = 0; k < frequency.size(); ++k)
        if (frequency(k) >= low && frequency(k) <= high) {
            s += psd(k);
            ++c;
        }
    if (c == 0) throw PreconditionError("mean_psd: no bins inside the requested range");
    return s / c;
}

std::string SpectrumEstimate::to_csv() const {
    std::ostringstream out;
    out << "frequency_hz,psd_dbm_per_hz\n";
    for (Eigen::Index k = 0; k < frequency.size(); ++k)
        out << std::setprecision(15) << frequency(k) << ',' << std::setprecision(8) << psd_dbm_per_hz(k) << '\n';
    return out.str();
}

SpectrumEstimate estimate_spectrum(const Buffer& buf, double rbw) {
    buf.validate();
    const Eigen::Index n = buf.length();
    const double fs = buf.sample_rate;
    if (!(rbw >= fs / double(n))) {
        std::ostringstream msg;
        msg << "estimate_spectrum: rbw " << rbw << " Hz is finer than sample_rate/length = " << fs / double(n) << " Hz";
        throw PreconditionError(msg.str());
    }
    const double enbw = blackman_harris_enbw();
    Eigen::Index seg = static_cast<Eigen::Index>(std::ceil(enbw * fs / rbw));
    seg += seg % 2;
    seg = std::min(seg, n);
    const Eigen::VectorXd w = blackman_harris(seg);
    const Eigen::Index hop = std::max<Eigen::Index>(1, seg / 2);
    const Eigen::Index count = std::max<Eigen::Index>(1, n / hop);

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(seg);
    ComplexVector<double> x(seg);
    for (Eigen::Index m = 0; m < buf.modes(); ++m)
        for (Eigen::Index s = 0; s < count; ++s) {
            const Eigen::Index start = s * hop;
            for (Eigen::Index i = 0; i < seg; ++i) x(i) = buf.samples((start + i) % n, m) * w(i);
            acc += fft(x).cwiseAbs2();
        }
    acc /= double(count) * fs * w.squaredNorm();

    SpectrumEstimate est;
    est.bin_width = fs / double(seg);
    est.resolution_bandwidth = enbw * est.bin_width;
    est.averages = static_cast<int>(count);
    est.frequency.resize(seg);
    est.psd.resize(seg);
    const Eigen::Index half = (seg + 1) / 2;
    for (Eigen::Index j = 0; j < seg; ++j) {
        const Eigen::Index k = (j + half) % seg;  // ascending frequency
        est.frequency(j) = buf.center_frequency + bin_frequency(k, seg, fs);
        est.psd(j) = acc(k);
    }
    return est;
}

double occupied_bandwidth(const SpectrumEstimate& est, double fraction) {
    if (!(fraction > 0 && fraction < 1)) throw PreconditionError("occupied_bandwidth: fraction must lie in (0, 1)");
    const double total = est.psd.sum();
    if (!(total > 0)) throw PreconditionError("occupied_bandwidth: spectrum carries no power");
    const double tail = 0.5 * (1 - fraction) * total;
    const Eigen::Index n = est.psd.size();
    // linear interpolation inside the bin where each cumulative tail is crossed
    auto edge = [&](bool from_low) {
        double acc = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index k = from_low ? j : n - 1 - j;
            if (acc + est.psd(k) >= tail) {
                const double part = (tail - acc) / est.psd(k);
                const double f0 = est.frequency(k) + (from_low ? -0.5 : 0.5) * est.bin_width;
                return from_low ? f0 + part * est.bin_width : f0 - part * est.bin_width;
            }
            acc += est.psd(k);
        }
        return est.frequency(from_low ? n - 1 : 0);
    };
    return edge(false) - edge(true);
}

OsnrResult measure_osnr(const Buffer& buf, const Band& signal_band, const OsnrOptions& options) {
    const double lo_edge = buf.center_frequency - 0.5 * buf.sample_rate;
    const double hi_edge = buf.center_frequency + 0.5 * buf.sample_rate;
    const double half_window = 0.1 * options.floor_offset;
    if (signal_band.low - options.floor_offset - half_window < lo_edge ||
        signal_band.high + options.floor_offset + half_window > hi_edge)
        throw PreconditionError("measure_osnr: noise floor sample points fall outside the buffer band");
    return measure_osnr(estimate_spectrum(buf, options.rbw), signal_band, options);
}

OsnrResult measure_osnr(const SpectrumEstimate& est, const Band& signal_band, const OsnrOptions& options) {
    const double half_window = 0.1 * options.floor_offset;
    const double lo_edge = est.frequency(0) - 0.5 * est.bin_width;
    const double hi_edge = est.frequency(est.frequency.size() - 1) + 0.5 * est.bin_width;
    if (signal_band.low - options.floor_offset - half_window < lo_edge ||
        signal_band.high + options.floor_offset + half_window > hi_edge)
        throw PreconditionError("measure_osnr: noise floor sample points fall outside the spectrum");

    auto density = [&](double f) { return est.mean_psd(f - half_window, f + half_window); };
    const double x_l = signal_band.low - options.floor_offset;
    const double x_r = signal_band.high + options.floor_offset;
    const double far_l = density(x_l), far_r = density(x_r);
    const double near_l = density(signal_band.low - 0.5 * options.floor_offset);
    const double near_r = density(signal_band.high + 0.5 * options.floor_offset);

    const double in_band = est.integrated_power(signal_band.low, signal_band.high);
    // interpolated floor, integrated over the band: value at the band centre times width
    const double t = (signal_band.center() - x_l) / (x_r - x_l);
    const double floor_density = far_l + t * (far_r - far_l);
    const double noise_in_band = floor_density * signal_band.width();
    const double signal = in_band - noise_in_band;

    OsnrResult r;
    const double ceiling = db_to_linear(options.ceiling_db);
    if (std::max(near_l, near_r) * options.reference_bandwidth * ceiling < in_band) {
        r.status = OsnrResult::Status::above_ceiling;
        r.reason = "no noise floor within " + std::to_string(options.ceiling_db) + " dB of the signal";
        return r;
    }
    if (far_l < 0.5 * near_l || far_r < 0.5 * near_r) {
        r.status = OsnrResult::Status::unmeasurable;
        r.reason = "noise floor falls by more than 3 dB between the near and far sample points (filtered away)";
        return r;
    }
    if (!(signal > 0) || !(floor_density > 0)) {
        r.status = OsnrResult::Status::unmeasurable;
        r.reason = "no signal above the interpolated floor";
        return r;
    }
    const double osnr = linear_to_db(signal / (floor_density * options.reference_bandwidth));
    if (osnr > options.ceiling_db) {
        r.status = OsnrResult::Status::above_ceiling;
        r.reason = "OSNR above reporting ceiling";
        return r;
    }
    r.status = OsnrResult::Status::value;
    r.osnr_db = osnr;
    return r;
}

SidebandReport measure_sidebands(const Buffer& buf, double carrier, double if_freq, double bw, double rbw) {
    constexpr double carrier_half = 50e6;
    if (!(bw > 0) || !(if_freq > 0)) throw PreconditionError("measure_sidebands: if_freq and bw must be positive");
    if (if_freq - 0.5 * bw <= carrier_half)
        throw PreconditionError("measure_sidebands: sideband bands overlap the carrier window");
    const double lo_edge = buf.center_frequency - 0.5 * buf.sample_rate;
    const double hi_edge = buf.center_frequency + 0.5 * buf.sample_rate;
    if (carrier - if_freq - 0.5 * bw < lo_edge || carrier + if_freq + 0.5 * bw > hi_edge)
        throw PreconditionError("measure_sidebands: bands fall outside the buffer");
    return measure_sidebands(estimate_spectrum(buf, rbw), carrier, if_freq, bw);
}

SidebandReport measure_sidebands(const SpectrumEstimate& est, double carrier, double if_freq, double bw) {
    constexpr double carrier_half = 50e6;
    if (!(bw > 0) || !(if_freq > 0)) throw PreconditionError("measure_sidebands: if_freq and bw must be positive");
    if (if_freq - 0.5 * bw <= carrier_half)
        throw PreconditionError("measure_sidebands: sideband bands overlap the carrier window");
    if (carrier - if_freq - 0.5 * bw < est.frequency(0) || carrier + if_freq + 0.5 * bw > est.frequency(est.frequency.size() - 1))
        throw PreconditionError("measure_sidebands: bands fall outside the spectrum");
    SidebandReport r;
    r.carrier_power_dbm = watts_to_dbm(est.integrated_power(carrier - carrier_half, carrier + carrier_half));
    r.lower_sideband_power_dbm =
        watts_to_dbm(est.integrated_power(carrier - if_freq - 0.5 * bw, carrier - if_freq + 0.5 * bw));
    r.upper_sideband_power_dbm =
        watts_to_dbm(est.integrated_power(carrier + if_freq - 0.5 * bw, carrier + if_freq + 0.5 * bw));
    r.asymmetry_db = r.upper_sideband_power_dbm - r.lower_sideband_power_dbm;
    return r;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * double(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw PreconditionError("spearman: need two equal-length samples of size >= 2");
    const std::vector<double> rx = ranks(x), ry = ranks(y);
    const double n = double(x.size());
    const double mean = 0.5 * (n + 1);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mean) * (ry[i] - mean);
        sxx += (rx[i] - mean) * (rx[i] - mean);
        syy += (ry[i] - mean) * (ry[i] - mean);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double band_power(const Buffer& buf, const Band& absolute) {
    buf.validate();
    const Eigen::Index n = buf.length();
    double p = 0;
    for (Eigen::Index m = 0; m < buf.modes(); ++m) {
        const ComplexVector<double> s = fft(buf.samples.col(m));
        for (Eigen::Index k = 0; k < n; ++k) {
            const double f = buf.center_frequency + bin_frequency(k, n, buf.sample_rate);
            if (f >= absolute.low && f <= absolute.high) p += std::norm(s(k));
        }
    }
    return p / (double(n) * double(n));
}

}  // namespace rofsim

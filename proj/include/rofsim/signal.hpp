#pragma once

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "rofsim/errors.hpp"
#include "rofsim/fft.hpp"
#include "rofsim/rng.hpp"
#include "rofsim/sample_buffer.hpp"

namespace rofsim {

/// Closed frequency interval [low, high] in Hz.
struct Band {
    double low = 0;
    double high = 0;

    double width() const { return high - low; }
    double center() const { return 0.5 * (low + high); }
    bool contains(double f) const { return f >= low && f <= high; }
    Band shifted(double df) const { return {low + df, high + df}; }
};

/// Frequency range (relative to the buffer centre) holding all but a
/// `rejection_db` fraction of the buffer power.
template <typename Scalar>
Band occupied_band(const SampleBuffer<Scalar>& buf, Scalar rejection_db = Scalar(60)) {
    buf.validate();
    const Eigen::Index n = buf.length();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bins = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
    for (Eigen::Index m = 0; m < buf.modes(); ++m) bins += fft(buf.samples.col(m)).cwiseAbs2();
    // reorder to ascending frequency
    const Eigen::Index half = (n + 1) / 2;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ordered(n);
    ordered.head(n - half) = bins.tail(n - half);
    ordered.tail(half) = bins.head(half);
    const Scalar total = ordered.sum();
    if (total <= Scalar(0)) return {0.0, 0.0};
    const Scalar budget = total * std::pow(Scalar(10), -rejection_db / Scalar(10)) / Scalar(2);
    Eigen::Index lo = 0, hi = n - 1;
    Scalar acc = 0;
    while (lo < hi && acc + ordered(lo) <= budget) acc += ordered(lo++);
    acc = 0;
    while (hi > lo && acc + ordered(hi) <= budget) acc += ordered(hi--);
    const Scalar df = buf.bin_spacing();
    const auto first_bin = static_cast<Scalar>(-(n - half));
    return {double((first_bin + Scalar(lo)) * df), double((first_bin + Scalar(hi)) * df)};
}

/// Translates the spectrum by `delta_f`, given the occupied band (relative
/// to the buffer centre). Rejects shifts that would alias the band.
template <typename Scalar>
SampleBuffer<Scalar> frequency_shift(SampleBuffer<Scalar> buf, Scalar delta_f, const Band& occupied) {
    buf.validate();
    if (delta_f == Scalar(0)) return buf;
    const double nyquist = 0.5 * double(buf.sample_rate);
    const Band moved = occupied.shifted(double(delta_f));
    if (moved.low <= -nyquist || moved.high >= nyquist) {
        std::ostringstream msg;
        msg << "frequency_shift: shifting by " << delta_f << " Hz aliases the occupied bandwidth of "
            << occupied.width() << " Hz [" << occupied.low << ", " << occupied.high
            << "] at sample rate " << buf.sample_rate << " Hz";
        throw PreconditionError(msg.str());
    }
    const Scalar cycles_per_sample = delta_f / buf.sample_rate;
    const Scalar two_pi = Scalar(2 * kPi);
    for (Eigen::Index i = 0; i < buf.length(); ++i) {
        Scalar cycles = cycles_per_sample * Scalar(i);
        cycles -= std::floor(cycles);
        buf.samples.row(i) *= std::polar(Scalar(1), two_pi * cycles);
    }
    return buf;
}

template <typename Scalar>
SampleBuffer<Scalar> frequency_shift(SampleBuffer<Scalar> buf, Scalar delta_f) {
    if (delta_f == Scalar(0)) return buf;
    const Band occ = occupied_band(buf);
    return frequency_shift(std::move(buf), delta_f, occ);
}

/// Re-references the buffer to a new centre frequency without moving its
/// absolute spectrum.
template <typename Scalar>
SampleBuffer<Scalar> retune(SampleBuffer<Scalar> buf, Scalar new_center) {
    const Scalar shift = buf.center_frequency - new_center;
    buf = frequency_shift(std::move(buf), shift);
    buf.center_frequency = new_center;
    return buf;
}

namespace detail {
/// Raised-cosine guard taper over the outer 5% of the band [-f_edge, f_edge].
template <typename Scalar>
Scalar guard_taper(Scalar f, Scalar f_edge) {
    const Scalar a = std::abs(f);
    const Scalar start = Scalar(0.95) * f_edge;
    if (a <= start) return Scalar(1);
    if (a >= f_edge) return Scalar(0);
    return Scalar(0.5) * (Scalar(1) + std::cos(Scalar(kPi) * (a - start) / (f_edge - start)));
}
}  // namespace detail

/// Frequency-domain resampling of a periodic buffer. The output length is
/// length * new_rate / sample_rate and must be an integer. `keep` is the band
/// (relative to centre) that must survive; content outside the new Nyquist
/// band is removed by the guard taper.
template <typename Scalar>
SampleBuffer<Scalar> resample(const SampleBuffer<Scalar>& buf, Scalar new_rate, const Band& keep) {
    buf.validate();
    if (!(new_rate > 0)) throw PreconditionError("resample: new_rate must be positive");
    if (new_rate == buf.sample_rate) return buf;
    const double exact_len = double(buf.length()) * double(new_rate) / double(buf.sample_rate);
    const auto n_out = static_cast<Eigen::Index>(std::llround(exact_len));
    if (std::abs(exact_len - double(n_out)) > 1e-6 || n_out < 1) {
        std::ostringstream msg;
        msg << "resample: length " << buf.length() << " at " << buf.sample_rate << " Hz does not map to "
            << "an integer length at " << new_rate << " Hz";
        throw PreconditionError(msg.str());
    }
    if (double(new_rate) < keep.width() || keep.low <= -0.5 * double(new_rate) ||
        keep.high >= 0.5 * double(new_rate)) {
        std::ostringstream msg;
        msg << "resample: new rate " << new_rate << " Hz cannot hold the occupied bandwidth of "
            << keep.width() << " Hz [" << keep.low << ", " << keep.high << "]";
        throw PreconditionError(msg.str());
    }

    const Eigen::Index n_in = buf.length();
    const Scalar f_edge = Scalar(0.5) * std::min(buf.sample_rate, new_rate);
    const Eigen::Index half_bins = std::min(n_in, n_out) / 2;
    const Scalar scale = Scalar(n_out) / Scalar(n_in);
    const Scalar df = buf.bin_spacing();

    SampleBuffer<Scalar> out = SampleBuffer<Scalar>::zeros(n_out, buf.modes(), new_rate,
                                                           buf.center_frequency, buf.domain);
    for (Eigen::Index m = 0; m < buf.modes(); ++m) {
        const ComplexVector<Scalar> spectrum = fft(buf.samples.col(m));
        ComplexVector<Scalar> target = ComplexVector<Scalar>::Zero(n_out);
        for (Eigen::Index j = -half_bins; j <= half_bins; ++j) {
            const Scalar w = detail::guard_taper(Scalar(j) * df, f_edge);
            if (w == Scalar(0)) continue;
            const Eigen::Index src = (j % n_in + n_in) % n_in;
            const Eigen::Index dst = (j % n_out + n_out) % n_out;
            target(dst) += w * spectrum(src);
        }
        out.samples.col(m) = ifft(target) * scale;
    }
    return out;
}

template <typename Scalar>
SampleBuffer<Scalar> resample(const SampleBuffer<Scalar>& buf, Scalar new_rate) {
    if (new_rate == buf.sample_rate) return buf;
    return resample(buf, new_rate, occupied_band(buf));
}

/// Adds circular complex white Gaussian noise of two-sided PSD `psd` (W/Hz)
/// to every mode; total noise power per mode is psd * sample_rate.
template <typename Scalar>
SampleBuffer<Scalar> add_gaussian_noise(SampleBuffer<Scalar> buf, Scalar psd, const RngStream& rng) {
    buf.validate();
    if (psd < Scalar(0)) throw PreconditionError("add_gaussian_noise: psd must be non-negative");
    if (psd == Scalar(0)) return buf;
    auto engine = rng.engine();
    std::normal_distribution<Scalar> normal(Scalar(0), std::sqrt(psd * buf.sample_rate / Scalar(2)));
    for (Eigen::Index m = 0; m < buf.modes(); ++m)
        for (Eigen::Index i = 0; i < buf.length(); ++i) {
            const Scalar re = normal(engine);
            const Scalar im = normal(engine);
            buf.samples(i, m) += std::complex<Scalar>(re, im);
        }
    return buf;
}

/// Multiplies every mode by a frequency response evaluated at each bin's
/// frequency relative to the buffer centre.
template <typename Scalar, typename Response>
SampleBuffer<Scalar> filter_in_frequency(SampleBuffer<Scalar> buf, Response&& response) {
    buf.validate();
    const Eigen::Index n = buf.length();
    ComplexVector<Scalar> h(n);
    for (Eigen::Index k = 0; k < n; ++k)
        h(k) = std::complex<Scalar>(response(bin_frequency(k, n, buf.sample_rate)));
    for (Eigen::Index m = 0; m < buf.modes(); ++m) {
        ComplexVector<Scalar> spectrum = fft(buf.samples.col(m));
        spectrum.array() *= h.array();
        buf.samples.col(m) = ifft(spectrum);
    }
    return buf;
}

}  // namespace rofsim

#pragma once

#include <Eigen/Core>

#include <complex>
#include <string_view>

#include "rofsim/errors.hpp"
#include "rofsim/units.hpp"

namespace rofsim {

enum class Domain { optical, electrical };

inline std::string_view to_string(Domain d) {
    return d == Domain::optical ? "optical" : "electrical";
}

/// Uniformly sampled complex field or waveform.
///
/// Rows are time samples, columns are modes: one column for electrical
/// waveforms and single-polarisation light, two for dual-polarisation light.
/// Optical samples are in sqrt(W) so |a|^2 is instantaneous power; electrical
/// samples are analytic signals whose real part is the physical waveform.
template <typename Scalar_ = double>
struct SampleBuffer {
    using Scalar = Scalar_;
    using Complex = std::complex<Scalar>;
    using Field = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

    Field samples;
    Scalar sample_rate = 0;
    Scalar center_frequency = 0;
    Domain domain = Domain::electrical;

    SampleBuffer() = default;
    SampleBuffer(Field s, Scalar rate, Scalar center, Domain tag)
        : samples(std::move(s)), sample_rate(rate), center_frequency(center), domain(tag) {}

    static SampleBuffer zeros(Eigen::Index length, Eigen::Index modes, Scalar rate,
                              Scalar center, Domain tag) {
        return SampleBuffer(Field::Zero(length, modes), rate, center, tag);
    }

    Eigen::Index length() const { return samples.rows(); }
    Eigen::Index modes() const { return samples.cols(); }
    Scalar duration() const { return Scalar(length()) / sample_rate; }
    /// Spacing of the DFT bins of the whole buffer.
    Scalar bin_spacing() const { return sample_rate / Scalar(length()); }
    bool is_optical() const { return domain == Domain::optical; }

    void validate() const {
        if (!(sample_rate > 0)) throw ValidationError("sample_rate", "must be positive");
        if (length() == 0 || modes() == 0) throw ValidationError("samples", "buffer is empty");
    }
};

using Buffer = SampleBuffer<double>;

/// Mean power summed over modes (W for optical buffers).
template <typename Scalar>
Scalar mean_power(const SampleBuffer<Scalar>& buf) {
    if (buf.length() == 0) return Scalar(0);
    return buf.samples.cwiseAbs2().sum() / Scalar(buf.length());
}

template <typename Scalar>
Scalar power_dbm(const SampleBuffer<Scalar>& buf) {
    return watts_to_dbm(mean_power(buf));
}

/// Scales the buffer so its mean power equals `dbm`.
template <typename Scalar>
SampleBuffer<Scalar> set_power_dbm(SampleBuffer<Scalar> buf, Scalar dbm) {
    const Scalar p = mean_power(buf);
    if (p <= Scalar(0)) throw PreconditionError("set_power_dbm: buffer carries no power");
    buf.samples *= std::sqrt(dbm_to_watts(dbm) / p);
    return buf;
}

/// Pads with zero-valued modes up to `modes` columns.
template <typename Scalar>
SampleBuffer<Scalar> with_modes(SampleBuffer<Scalar> buf, Eigen::Index modes) {
    if (buf.modes() >= modes) return buf;
    typename SampleBuffer<Scalar>::Field out =
        SampleBuffer<Scalar>::Field::Zero(buf.length(), modes);
    out.leftCols(buf.modes()) = buf.samples;
    buf.samples = std::move(out);
    return buf;
}

template <typename Scalar>
bool same_grid(const SampleBuffer<Scalar>& a, const SampleBuffer<Scalar>& b) {
    return a.length() == b.length() && a.sample_rate == b.sample_rate &&
           a.center_frequency == b.center_frequency && a.domain == b.domain;
}

/// Root-mean-square difference between two buffers of equal shape.
template <typename Scalar>
Scalar rms_difference(const SampleBuffer<Scalar>& a, const SampleBuffer<Scalar>& b) {
    if (a.length() != b.length() || a.modes() != b.modes())
        throw PreconditionError("rms_difference: shape mismatch");
    return std::sqrt((a.samples - b.samples).cwiseAbs2().sum() / Scalar(a.length()));
}

}  // namespace rofsim

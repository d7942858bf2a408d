#pragma once

#include "rofsim/analyzers.hpp"
#include "rofsim/modem.hpp"
#include "rofsim/optics.hpp"
#include "rofsim/signal.hpp"

namespace testing {

using namespace rofsim;

inline constexpr double kGridCenter = 194953e9;
inline constexpr double kGridRate = 128e9;
inline constexpr double kArofCarrier = 194971.875e9;
inline const WssFilterProfile kArofSlot{194968.75e9, 194975.00e9};

inline Buffer tone(Eigen::Index n, double fs, double f, double amplitude = 1.0, double center = 0.0,
                   Domain domain = Domain::electrical) {
    Buffer b = Buffer::zeros(n, 1, fs, center, domain);
    for (Eigen::Index i = 0; i < n; ++i) b.samples(i, 0) = std::polar(amplitude, 2 * kPi * f * double(i) / fs);
    return b;
}

/// ARoF DSB field on the optical grid, for `payload` OFDM symbols.
struct ArofSignal {
    OfdmNumerology num;
    OfdmFrame frame;
    Buffer field;
};

inline ArofSignal arof_on_grid(int payload, double carrier = kArofCarrier, std::uint64_t seed = 1,
                               double power_dbm = 15.0) {
    ArofSignal s;
    s.frame = make_frame(s.num, payload, RngStream{seed, 0});
    ModemOptions mo;
    mo.output_rate = kGridRate;
    const auto drive = generate_waveform(s.frame, s.num, mo);
    const Buffer field = mzm_modulate(LaserSpec{carrier, power_dbm}, drive.signal, MzmSpec{});
    s.field = retune(field, kGridCenter);
    return s;
}

inline double db_ratio(double a, double b) { return 10 * std::log10(a / b); }

}  // namespace testing

#include "rofsim/ofdm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <sstream>

#include "rofsim/errors.hpp"

namespace rofsim {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

}  // namespace

int OfdmNumerology::cyclic_prefix_length() const {
    return static_cast<int>(std::lround(cyclic_prefix_fraction * dft_size));
}

int OfdmNumerology::bits_per_symbol() const {
    return is_power_of_two(qam_order) ? std::countr_zero(static_cast<unsigned>(qam_order)) : 0;
}

double OfdmNumerology::gross_data_rate() const {
    return n_subcarriers * double(bits_per_symbol()) * subcarrier_spacing;
}

double OfdmNumerology::net_data_rate() const {
    return gross_data_rate() * double(dft_size) / double(symbol_length());
}

void OfdmNumerology::validate() const {
    if (dft_size < 8 || !is_power_of_two(dft_size))
        throw ValidationError("dft_size", "must be a power of two >= 8, got " + std::to_string(dft_size));
    if (n_subcarriers < 2 || n_subcarriers % 2 != 0 || n_subcarriers >= dft_size)
        throw ValidationError("n_subcarriers", "must be even and in [2, dft_size), got " + std::to_string(n_subcarriers));
    if (!is_power_of_two(qam_order))
        throw ValidationError("qam_order", "must be a power of two, got " + std::to_string(qam_order));
    if (qam_order < 4 || bits_per_symbol() % 2 != 0)
        throw ValidationError("qam_order", "only square constellations (4, 16, 64, 256, ...) are supported, got " +
                                               std::to_string(qam_order));
    if (!(subcarrier_spacing > 0)) throw ValidationError("subcarrier_spacing", "must be positive");
    if (!(cyclic_prefix_fraction >= 0 && cyclic_prefix_fraction < 1))
        throw ValidationError("cyclic_prefix_fraction", "must be in [0, 1)");
    if (std::abs(cyclic_prefix_fraction * dft_size - cyclic_prefix_length()) > 1e-9)
        throw ValidationError("cyclic_prefix_fraction", "fraction * dft_size must be an integer sample count");
    if (!(subcarrier_symbol_rate > 0) ||
        std::abs(subcarrier_spacing - subcarrier_symbol_rate) / subcarrier_spacing >= 0.01)
        throw ValidationError("subcarrier_symbol_rate", "differs from the subcarrier spacing " +
                                                            fmt(subcarrier_spacing) + " Hz by 1% or more");
    // the nominal bandwidth is a rounded figure; accept rounding to the nearest 10 kHz
    if (std::abs(occupied_bandwidth - derived_occupied_bandwidth()) > 5e3)
        throw ValidationError("occupied_bandwidth", "nominal " + fmt(occupied_bandwidth) +
                                                        " Hz disagrees with n_subcarriers * spacing = " +
                                                        fmt(derived_occupied_bandwidth()) + " Hz");
    const bool gross_ok = std::abs(gross_data_rate() - raw_data_rate) <= 0.005 * raw_data_rate;
    const bool net_ok = std::abs(net_data_rate() - raw_data_rate) <= 0.07 * raw_data_rate;
    if (!(raw_data_rate > 0) || !(gross_ok || net_ok))
        throw ValidationError("raw_data_rate", "nominal " + fmt(raw_data_rate) + " b/s matches neither the gross " +
                                                   fmt(gross_data_rate()) + " nor the net " + fmt(net_data_rate()) +
                                                   " b/s rate");
    if (!(if_frequency > 0.5 * derived_occupied_bandwidth()))
        throw ValidationError("if_frequency", "must exceed half the occupied bandwidth");
}

int subcarrier_offset(const OfdmNumerology& num, int i) {
    const int half = num.n_subcarriers / 2;
    return i < half ? i - half : i - half + 1;
}

int subcarrier_bin(const OfdmNumerology& num, int i) {
    const int k = subcarrier_offset(num, i);
    return k < 0 ? k + num.dft_size : k;
}

QamConstellation::QamConstellation(int order) : order_(order) {
    if (!is_power_of_two(order) || order < 4 || std::countr_zero(static_cast<unsigned>(order)) % 2 != 0)
        throw PreconditionError("QamConstellation: order must be a square power of two, got " + std::to_string(order));
    bits_ = std::countr_zero(static_cast<unsigned>(order));
    side_ = 1 << (bits_ / 2);
    scale_ = std::sqrt(3.0 / (2.0 * (order - 1)));
    points_.resize(static_cast<std::size_t>(order));
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(bits_));
    for (int v = 0; v < order; ++v) {
        for (int b = 0; b < bits_; ++b) bits[static_cast<std::size_t>(b)] = (v >> (bits_ - 1 - b)) & 1;
        points_[static_cast<std::size_t>(v)] = map(bits.data());
    }
}

int QamConstellation::axis_level(int gray_bits) const {
    int idx = gray_bits;
    for (int shift = 1; shift < bits_ / 2; shift <<= 1) idx ^= idx >> shift;
    return 2 * idx - (side_ - 1);
}

int QamConstellation::axis_bits(double coordinate) const {
    int idx = static_cast<int>(std::lround((coordinate / scale_ + (side_ - 1)) / 2.0));
    idx = std::clamp(idx, 0, side_ - 1);
    return idx ^ (idx >> 1);
}

std::complex<double> QamConstellation::map(const std::uint8_t* bits) const {
    const int half = bits_ / 2;
    int gi = 0, gq = 0;
    for (int b = 0; b < half; ++b) {
        gi = (gi << 1) | (bits[b] & 1);
        gq = (gq << 1) | (bits[half + b] & 1);
    }
    return scale_ * std::complex<double>(axis_level(gi), axis_level(gq));
}

void QamConstellation::demap(std::complex<double> symbol, std::uint8_t* bits) const {
    const int half = bits_ / 2;
    const int gi = axis_bits(symbol.real());
    const int gq = axis_bits(symbol.imag());
    for (int b = 0; b < half; ++b) {
        bits[b] = static_cast<std::uint8_t>((gi >> (half - 1 - b)) & 1);
        bits[half + b] = static_cast<std::uint8_t>((gq >> (half - 1 - b)) & 1);
    }
}

std::complex<double> QamConstellation::nearest(std::complex<double> symbol) const {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(bits_));
    demap(symbol, bits.data());
    return map(bits.data());
}

Prbs31::Prbs31(std::uint32_t seed) : state_(seed & 0x7fffffffu) {
    if (state_ == 0) state_ = 1;
}

std::uint8_t Prbs31::next() {
    const std::uint32_t bit = ((state_ >> 30) ^ (state_ >> 27)) & 1u;
    state_ = ((state_ << 1) | bit) & 0x7fffffffu;
    return static_cast<std::uint8_t>(bit);
}

int OfdmFrame::data_subcarriers(const OfdmNumerology& num) const {
    return num.n_subcarriers - static_cast<int>(pilot_layout.size());
}

std::size_t OfdmFrame::expected_bits(const OfdmNumerology& num) const {
    return static_cast<std::size_t>(payload_symbols) * static_cast<std::size_t>(data_subcarriers(num)) *
           static_cast<std::size_t>(num.bits_per_symbol());
}

void OfdmFrame::validate(const OfdmNumerology& num) const {
    if (training_symbols < 1) throw ValidationError("training_symbols", "at least one training symbol is required");
    if (payload_symbols < 1) throw ValidationError("payload_symbols", "must be positive");
    std::set<int> seen;
    for (int p : pilot_layout) {
        if (p < 0 || p >= num.n_subcarriers)
            throw ValidationError("pilot_layout", "subcarrier " + std::to_string(p) + " out of range");
        if (!seen.insert(p).second)
            throw ValidationError("pilot_layout", "duplicate subcarrier " + std::to_string(p));
    }
    if (data_subcarriers(num) < 1) throw ValidationError("pilot_layout", "no data subcarriers left");
    if (data_bits.size() != expected_bits(num))
        throw ValidationError("data_bits", "length " + std::to_string(data_bits.size()) + " does not match frame geometry (" +
                                               std::to_string(expected_bits(num)) + " bits)");
}

OfdmFrame make_frame(const OfdmNumerology& num, int payload_symbols, const RngStream& rng, int training_symbols,
                     std::vector<int> pilot_layout) {
    num.validate();
    OfdmFrame frame;
    frame.training_symbols = training_symbols;
    frame.payload_symbols = payload_symbols;
    frame.pilot_layout = std::move(pilot_layout);
    std::sort(frame.pilot_layout.begin(), frame.pilot_layout.end());
    if (payload_symbols < 1) throw ValidationError("payload_symbols", "must be positive");
    auto engine = rng.engine();
    Prbs31 prbs(static_cast<std::uint32_t>(engine()));
    frame.data_bits.resize(frame.expected_bits(num));
    for (auto& b : frame.data_bits) b = prbs.next();
    frame.validate(num);
    return frame;
}

std::vector<std::complex<double>> training_symbol(const OfdmNumerology& num, int index) {
    Prbs31 prbs(0x2545f491u + 0x9e3779b9u * static_cast<std::uint32_t>(index));
    const double a = 1.0 / std::sqrt(2.0);
    std::vector<std::complex<double>> out(static_cast<std::size_t>(num.n_subcarriers));
    for (auto& x : out) {
        const double re = prbs.next() ? -a : a;
        const double im = prbs.next() ? -a : a;
        x = {re, im};
    }
    return out;
}

}  // namespace rofsim

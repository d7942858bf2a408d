#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "rofsim/rng.hpp"

namespace rofsim {

/// IF-OFDM parameter set. `subcarrier_spacing` is the primary quantity; the
/// nominal values (`subcarrier_symbol_rate`, `occupied_bandwidth`,
/// `raw_data_rate`) are rounded figures checked against it by validate().
struct OfdmNumerology {
    int n_subcarriers = 250;
    int dft_size = 1024;
    int qam_order = 64;
    double if_frequency = 1.5e9;
    double subcarrier_spacing = 1.953125e6;
    double cyclic_prefix_fraction = 0.0625;

    double subcarrier_symbol_rate = 1.95e6;
    double occupied_bandwidth = 488.28e6;
    double raw_data_rate = 2.93e9;

    double sample_rate() const { return dft_size * subcarrier_spacing; }
    double derived_occupied_bandwidth() const { return n_subcarriers * subcarrier_spacing; }
    int cyclic_prefix_length() const;
    int symbol_length() const { return dft_size + cyclic_prefix_length(); }
    int bits_per_symbol() const;
    /// n_subcarriers * log2(M) * spacing; ignores the cyclic-prefix overhead.
    double gross_data_rate() const;
    /// Gross rate derated by the cyclic-prefix overhead.
    double net_data_rate() const;

    /// Throws ValidationError naming the first violated field.
    void validate() const;
};

/// Logical subcarrier i in [0, n_subcarriers) -> DFT bin. Subcarriers sit
/// symmetrically around DC; the DC bin is unused.
int subcarrier_bin(const OfdmNumerology& num, int i);

/// Signed baseband bin number (-n/2..n/2, skipping 0) of logical subcarrier i.
int subcarrier_offset(const OfdmNumerology& num, int i);

/// Gray-mapped square M-QAM scaled to unit average power.
class QamConstellation {
public:
    explicit QamConstellation(int order);

    int order() const { return order_; }
    int bits_per_symbol() const { return bits_; }
    std::complex<double> map(const std::uint8_t* bits) const;
    void demap(std::complex<double> symbol, std::uint8_t* bits) const;
    std::complex<double> nearest(std::complex<double> symbol) const;
    const std::vector<std::complex<double>>& points() const { return points_; }

private:
    int order_;
    int bits_;
    int side_;
    double scale_;
    std::vector<std::complex<double>> points_;

    int axis_level(int gray_bits) const;
    int axis_bits(double coordinate) const;
};

/// PRBS-31 (x^31 + x^28 + 1) bit source.
class Prbs31 {
public:
    explicit Prbs31(std::uint32_t seed);
    std::uint8_t next();

private:
    std::uint32_t state_;
};

struct OfdmFrame {
    int training_symbols = 2;
    int payload_symbols = 100;
    std::vector<std::uint8_t> data_bits;
    /// Logical subcarriers carrying a known pilot in every payload symbol.
    std::vector<int> pilot_layout;

    int total_symbols() const { return training_symbols + payload_symbols; }
    int data_subcarriers(const OfdmNumerology& num) const;
    std::size_t expected_bits(const OfdmNumerology& num) const;
    void validate(const OfdmNumerology& num) const;
};

/// Frame with PRBS payload bits seeded from `rng`.
OfdmFrame make_frame(const OfdmNumerology& num, int payload_symbols, const RngStream& rng,
                     int training_symbols = 2, std::vector<int> pilot_layout = {});

/// Known QPSK training symbol `index` (one value per logical subcarrier).
std::vector<std::complex<double>> training_symbol(const OfdmNumerology& num, int index);

inline constexpr std::complex<double> kPilotSymbol{1.0, 0.0};

}  // namespace rofsim

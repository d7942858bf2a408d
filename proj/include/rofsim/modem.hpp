#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "rofsim/ofdm.hpp"
#include "rofsim/sample_buffer.hpp"

namespace rofsim {

using SymbolGrid = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

struct ModemOptions {
    /// Rate of the generated IF waveform (AWG grid). Must be an integer
    /// multiple of the modem rate times a divisor of the frame length.
    double output_rate = 8e9;
    /// Raised-cosine WOLA taper length in modem-rate samples (< CP length).
    int window_taper = 48;
};

struct OfdmWaveform {
    Buffer signal;  ///< analytic, electrical, centred at 0 Hz with content at +IF
    double papr_db = 0;
};

/// Transmitted symbol on every (symbol, logical subcarrier): training rows
/// first, then payload rows carrying data and pilots.
SymbolGrid reference_grid(const OfdmFrame& frame, const OfdmNumerology& num);

/// One frame of OFDM at the modem rate, centred on DC, unit mean power in the
/// useful part of each symbol.
Buffer modulate_baseband(const SymbolGrid& grid, const OfdmNumerology& num, int window_taper);

/// Frame -> IF waveform at options.output_rate.
OfdmWaveform generate_waveform(const OfdmFrame& frame, const OfdmNumerology& num, const ModemOptions& options = {});

/// Envelope peak-to-average power ratio of mode 0.
double papr_db(const Buffer& buf);

struct DemodOptions {
    /// Normalised training correlation below which timing is declared lost.
    double sync_threshold = 0.5;
    int window_taper = 48;
};

struct EvmResult {
    double evm_rms = 0;             ///< percent of reference RMS amplitude
    double evm_standard_error = 0;  ///< percent, from per-symbol error variance
    std::vector<int> subcarrier_index;       ///< signed baseband bin of each data subcarrier
    std::vector<double> per_subcarrier_evm;  ///< percent
    std::vector<double> mean_power_db;       ///< received power per data subcarrier before equalisation
    std::vector<double> channel_gain_db;     ///< |H| estimate per data subcarrier
    double snr_estimate = 0;                 ///< dB
    std::vector<std::complex<double>> constellation;  ///< equalised payload symbols, symbol-major
    std::size_t bit_errors = 0;
    std::size_t bits_compared = 0;
    int timing_offset = 0;  ///< modem-rate samples
    double sync_metric = 0;
};

struct SyncFailure {
    double sync_metric = 0;
    std::string reason;
};

using DemodResult = std::variant<EvmResult, SyncFailure>;

/// IF down-conversion, timing recovery on the training symbols, one-tap
/// equalisation and EVM. `rx` must span exactly one frame period.
DemodResult demodulate(const Buffer& rx, const OfdmNumerology& num, const OfdmFrame& reference,
                       const DemodOptions& options = {});

/// -20 log10(evm / 100).
double evm_to_snr(double evm_percent);

/// subcarrier_index,evm_percent,mean_power_db
std::string per_subcarrier_csv(const EvmResult& result);

/// symbol,subcarrier_index,i,q
std::string constellation_csv(const EvmResult& result);

}  // namespace rofsim

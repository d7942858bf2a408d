#pragma once

#include <Eigen/Core>

#include <complex>
#include <limits>
#include <optional>
#include <variant>

#include "rofsim/modem.hpp"
#include "rofsim/optics.hpp"
#include "rofsim/rng.hpp"
#include "rofsim/sample_buffer.hpp"

namespace rofsim {

struct CoherentSpec {
    double baud_rate = 31.5e9;
    double center_frequency = 194950.0e9;
    double rrc_rolloff = 0.15;
    double launch_power_dbm = 0.0;  ///< total over both polarisations
    double slot_low = 194931.25e9;
    double slot_high = 194968.75e9;
    /// Transponder implementation SNR ceiling (dB), combined with the channel
    /// noise in the receiver. Infinity disables it.
    double transceiver_snr_db = std::numeric_limits<double>::infinity();

    double occupied_bandwidth() const { return baud_rate * (1 + rrc_rolloff); }
    void validate() const;
};

using SymbolMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

struct CoherentSignal {
    Buffer field;           ///< two-mode optical field
    SymbolMatrix symbols;   ///< n_symbols x 2, unit-power QPSK
};

/// RRC-shaped DP-QPSK on a periodic grid of `n_symbols * sample_rate / baud`
/// samples centred on `grid_center`. Each polarisation is driven by its own
/// PRBS seeded from `rng`.
CoherentSignal generate_dp_qpsk(const CoherentSpec& spec, Eigen::Index n_symbols, double sample_rate,
                                double grid_center, const RngStream& rng);

/// |H|^2 of the raised-cosine spectrum (square of the RRC response), peak 1.
double raised_cosine_power(double f, double baud_rate, double rolloff);

struct CoherentMetrics {
    double snr_db = 0;             ///< per-symbol SNR from the error-vector variance
    double q_factor_db = 0;        ///< 20 log10(sqrt(2) erfcinv(2 BER))
    double pre_fec_ber = 0;        ///< counted
    double estimated_ber = 0;      ///< Gaussian estimate from the SNR
    bool q_from_counted_ber = false;  ///< true when >= 100 errors were counted
    std::size_t bit_errors = 0;
    std::size_t bits_compared = 0;
    double evm_percent = 0;
    std::optional<double> osnr_db;  ///< filled by callers that can observe the floor
};

using CoherentResult = std::variant<CoherentMetrics, SyncFailure>;

/// Ideal-LO homodyne, matched RRC filter, data-aided one-tap frequency-domain
/// equaliser per polarisation, then SNR/BER/Q against `reference`.
CoherentResult coherent_receive(const Buffer& field, const CoherentSpec& spec, const SymbolMatrix& reference,
                                const RngStream& rng = {});

/// Q (dB) for a bit error ratio under the Gaussian model.
double q_factor_from_ber(double ber);
/// BER of Gray QPSK at per-symbol SNR (linear).
double qpsk_ber(double snr_linear);

inline constexpr double kLeakageFloorDbm = -80.0;

/// Coherent power passed by `slot` (including insertion loss), clamped to the
/// -80 dBm reporting floor.
double leakage_into(const Buffer& field, const WssFilterProfile& slot);

}  // namespace rofsim

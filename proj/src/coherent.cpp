#include "rofsim/coherent.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <sstream>

#include "rofsim/errors.hpp"
#include "rofsim/fft.hpp"
#include "rofsim/ofdm.hpp"
#include "rofsim/signal.hpp"

namespace rofsim {

namespace {

constexpr Eigen::Index kMinSymbols = 4096;
constexpr Eigen::Index kEqualizerHalfWidth = 128;  // bins each side in the channel average
constexpr double kSyncThreshold = 0.2;              // fraction of received power explained by the channel

double rrc_amplitude(double f, double rs, double beta) { return std::sqrt(raised_cosine_power(f, rs, beta)); }

Eigen::Index checked_ratio(double num, double den, const char* what) {
    const double r = num / den;
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-6 * std::max(1.0, r) || k < 1) {
        std::ostringstream msg;
        msg << what << ": " << num << " / " << den << " is not an integer";
        throw PreconditionError(msg.str());
    }
    return static_cast<Eigen::Index>(k);
}

/// Signed whole-bin distance of `offset`; the grids stay periodic only when it is integral.
Eigen::Index bin_offset(double offset, double df, const char* what) {
    const double r = offset / df;
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-6 * std::max(1.0, std::abs(r))) {
        std::ostringstream msg;
        msg << what << ": carrier offset " << offset << " Hz is not a whole number of " << df << " Hz bins";
        throw PreconditionError(msg.str());
    }
    return static_cast<Eigen::Index>(k);
}

Eigen::Index positive_mod(Eigen::Index a, Eigen::Index n) {
    a %= n;
    return a < 0 ? a + n : a;
}

}  // namespace

void CoherentSpec::validate() const {
    if (!(baud_rate > 0)) throw ValidationError("baud_rate", "must be positive");
    if (!(rrc_rolloff >= 0 && rrc_rolloff <= 1)) throw ValidationError("rrc_rolloff", "must lie in [0, 1]");
    if (!(slot_high > slot_low)) throw ValidationError("slot_high", "must exceed slot_low");
    if (center_frequency - 0.5 * occupied_bandwidth() < slot_low - 1.0 ||
        center_frequency + 0.5 * occupied_bandwidth() > slot_high + 1.0) {
        std::ostringstream msg;
        msg << "occupied bandwidth " << occupied_bandwidth() / 1e9 << " GHz around " << center_frequency / 1e9
            << " GHz overflows the " << (slot_high - slot_low) / 1e9 << " GHz slot";
        throw ValidationError("rrc_rolloff", msg.str());
    }
    if (!(transceiver_snr_db > 0)) throw ValidationError("transceiver_snr_db", "must be positive");
}

double raised_cosine_power(double f, double rs, double beta) {
    const double a = std::abs(f);
    const double lo = 0.5 * rs * (1 - beta);
    const double hi = 0.5 * rs * (1 + beta);
    if (a <= lo) return 1.0;
    if (a >= hi) return 0.0;
    return 0.5 * (1 + std::cos(kPi / (beta * rs) * (a - lo)));
}

CoherentSignal generate_dp_qpsk(const CoherentSpec& spec, Eigen::Index n_symbols, double sample_rate,
                                double grid_center, const RngStream& rng) {
    spec.validate();
    if (n_symbols < kMinSymbols) throw PreconditionError("generate_dp_qpsk: n_symbols must be at least 4096");
    const Eigen::Index n = checked_ratio(double(n_symbols) * sample_rate, spec.baud_rate, "generate_dp_qpsk: grid length");
    const double df = sample_rate / double(n);
    const double offset = spec.center_frequency - grid_center;
    const Eigen::Index shift = bin_offset(offset, df, "generate_dp_qpsk");
    if (std::abs(offset) + 0.5 * spec.occupied_bandwidth() >= 0.5 * sample_rate)
        throw PreconditionError("generate_dp_qpsk: channel does not fit inside the grid bandwidth");

    CoherentSignal out;
    out.symbols.resize(n_symbols, 2);
    auto engine = rng.engine();
    const double a = 1.0 / std::sqrt(2.0);
    for (int pol = 0; pol < 2; ++pol) {
        Prbs31 prbs(static_cast<std::uint32_t>(engine() & 0x7fffffffu) | 1u);
        for (Eigen::Index i = 0; i < n_symbols; ++i) {
            const double re = prbs.next() ? -a : a;
            const double im = prbs.next() ? -a : a;
            out.symbols(i, pol) = {re, im};
        }
    }

    Buffer::Field field = Buffer::Field::Zero(n, 2);
    const Eigen::Index half_span = static_cast<Eigen::Index>(std::ceil(0.5 * spec.occupied_bandwidth() / df));
    for (int pol = 0; pol < 2; ++pol) {
        const ComplexVector<double> x = fft(out.symbols.col(pol));
        ComplexVector<double> spectrum = ComplexVector<double>::Zero(n);
        for (Eigen::Index k = -half_span; k <= half_span; ++k) {
            const double h = rrc_amplitude(double(k) * df, spec.baud_rate, spec.rrc_rolloff);
            if (h == 0) continue;
            spectrum(positive_mod(k + shift, n)) = x(positive_mod(k, n_symbols)) * h;
        }
        field.col(pol) = ifft(spectrum);
    }
    out.field = Buffer(std::move(field), sample_rate, grid_center, Domain::optical);
    out.field = set_power_dbm(std::move(out.field), spec.launch_power_dbm);
    return out;
}

double qpsk_ber(double snr_linear) { return 0.5 * std::erfc(std::sqrt(0.5 * snr_linear)); }

double q_factor_from_ber(double ber) {
    if (!(ber > 0)) return std::numeric_limits<double>::infinity();
    if (ber >= 0.5) return -std::numeric_limits<double>::infinity();
    return 20 * std::log10(std::sqrt(2.0) * boost::math::erfc_inv(2 * ber));
}

CoherentResult coherent_receive(const Buffer& field, const CoherentSpec& spec, const SymbolMatrix& reference,
                                const RngStream& rng) {
    spec.validate();
    field.validate();
    if (!field.is_optical()) throw PreconditionError("coherent_receive: field must be optical");
    const Eigen::Index ns = reference.rows();
    if (reference.cols() != 2 || ns < kMinSymbols)
        throw PreconditionError("coherent_receive: reference must hold two polarisations of >= 4096 symbols");
    const Eigen::Index n = field.length();
    if (checked_ratio(double(ns) * field.sample_rate, spec.baud_rate, "coherent_receive: grid length") != n)
        throw PreconditionError("coherent_receive: reference length does not match the buffer duration");
    const double df = field.bin_spacing();
    const double offset = spec.center_frequency - field.center_frequency;
    if (std::abs(offset) + 0.5 * spec.occupied_bandwidth() >= 0.5 * field.sample_rate)
        throw PreconditionError("coherent_receive: channel slot lies outside the buffer band");
    const Eigen::Index shift = bin_offset(offset, df, "coherent_receive");
    const Buffer rx = with_modes(field, 2);

    const Eigen::Index half_span = static_cast<Eigen::Index>(std::ceil(0.5 * spec.occupied_bandwidth() / df));
    SymbolMatrix equalized(ns, 2);
    double explained = 0, received = 0;
    for (int pol = 0; pol < 2; ++pol) {
        const ComplexVector<double> r = fft(rx.samples.col(pol));
        // matched filter and fold onto the symbol-rate grid
        ComplexVector<double> y = ComplexVector<double>::Zero(ns);
        for (Eigen::Index k = -half_span; k <= half_span; ++k) {
            const double h = rrc_amplitude(double(k) * df, spec.baud_rate, spec.rrc_rolloff);
            if (h == 0) continue;
            y(positive_mod(k, ns)) += r(positive_mod(k + shift, n)) * h;
        }
        const ComplexVector<double> x = fft(reference.col(pol));
        // sliding-window least-squares channel estimate
        ComplexVector<double> cross(ns);
        Eigen::VectorXd energy(ns);
        for (Eigen::Index k = 0; k < ns; ++k) {
            cross(k) = y(k) * std::conj(x(k));
            energy(k) = std::norm(x(k));
        }
        std::complex<double> csum = 0;
        double esum = 0;
        for (Eigen::Index j = -kEqualizerHalfWidth; j <= kEqualizerHalfWidth; ++j) {
            csum += cross(positive_mod(j, ns));
            esum += energy(positive_mod(j, ns));
        }
        ComplexVector<double> z(ns);
        for (Eigen::Index k = 0; k < ns; ++k) {
            const std::complex<double> h = csum / esum;
            explained += std::norm(h) * energy(k);
            received += std::norm(y(k));
            z(k) = std::abs(h) > 0 ? y(k) / h : std::complex<double>(0);
            const Eigen::Index out_idx = positive_mod(k - kEqualizerHalfWidth, ns);
            const Eigen::Index in_idx = positive_mod(k + kEqualizerHalfWidth + 1, ns);
            csum += cross(in_idx) - cross(out_idx);
            esum += energy(in_idx) - energy(out_idx);
        }
        equalized.col(pol) = ifft(z);
    }
    const double sync_metric = received > 0 ? explained / received : 0.0;
    if (!(sync_metric >= kSyncThreshold)) {
        std::ostringstream msg;
        msg << "channel estimate explains only " << sync_metric * 100 << "% of the received power in the slot";
        return SyncFailure{sync_metric, msg.str()};
    }

    const double ref_power = reference.cwiseAbs2().mean();
    if (std::isfinite(spec.transceiver_snr_db)) {
        auto engine = rng.engine();
        std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * ref_power / db_to_linear(spec.transceiver_snr_db)));
        for (Eigen::Index i = 0; i < equalized.size(); ++i) equalized(i) += std::complex<double>(normal(engine), normal(engine));
    }

    CoherentMetrics m;
    const double error_power = (equalized - reference).cwiseAbs2().mean();
    const double snr = ref_power / error_power;
    m.snr_db = linear_to_db(snr);
    m.evm_percent = 100 * std::sqrt(error_power / ref_power);
    for (Eigen::Index i = 0; i < equalized.size(); ++i) {
        const auto y = equalized(i), x = reference(i);
        m.bit_errors += (std::signbit(y.real()) != std::signbit(x.real())) + (std::signbit(y.imag()) != std::signbit(x.imag()));
    }
    m.bits_compared = 2 * std::size_t(equalized.size());
    m.pre_fec_ber = double(m.bit_errors) / double(m.bits_compared);
    m.estimated_ber = qpsk_ber(snr);
    m.q_from_counted_ber = m.bit_errors >= 100;
    m.q_factor_db = q_factor_from_ber(m.q_from_counted_ber ? m.pre_fec_ber : m.estimated_ber);
    return m;
}

double leakage_into(const Buffer& field, const WssFilterProfile& slot) {
    field.validate();
    if (!field.is_optical()) throw PreconditionError("leakage_into: field must be optical");
    const Eigen::Index n = field.length();
    const double il = db_to_linear(-slot.insertion_loss_db);
    double p = 0;
    for (Eigen::Index m = 0; m < field.modes(); ++m) {
        const ComplexVector<double> s = fft(field.samples.col(m));
        for (Eigen::Index k = 0; k < n; ++k) {
            const double h = slot.power_transfer(field.center_frequency + bin_frequency(k, n, field.sample_rate));
            if (h > 0) p += std::norm(s(k)) * h;
        }
    }
    p *= il / (double(n) * double(n));
    return std::max(watts_to_dbm(p), kLeakageFloorDbm);
}

}  // namespace rofsim

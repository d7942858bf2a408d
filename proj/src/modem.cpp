#include "rofsim/modem.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "rofsim/errors.hpp"
#include "rofsim/fft.hpp"
#include "rofsim/signal.hpp"

namespace rofsim {

namespace {

double rise(int j, int taper) { return 0.5 * (1.0 - std::cos(kPi * (j + 0.5) / taper)); }

void check_taper(const OfdmNumerology& num, int taper) {
    if (taper < 0 || taper >= num.cyclic_prefix_length())
        throw PreconditionError("window_taper must be in [0, cyclic prefix length), got " + std::to_string(taper));
}

std::vector<bool> pilot_mask(const OfdmFrame& frame, const OfdmNumerology& num) {
    std::vector<bool> mask(static_cast<std::size_t>(num.n_subcarriers), false);
    for (int p : frame.pilot_layout) mask[static_cast<std::size_t>(p)] = true;
    return mask;
}

}  // namespace

SymbolGrid reference_grid(const OfdmFrame& frame, const OfdmNumerology& num) {
    frame.validate(num);
    const QamConstellation qam(num.qam_order);
    const int k = num.bits_per_symbol();
    const auto pilots = pilot_mask(frame, num);
    SymbolGrid grid(frame.total_symbols(), num.n_subcarriers);
    for (int t = 0; t < frame.training_symbols; ++t) {
        const auto tr = training_symbol(num, t);
        for (int i = 0; i < num.n_subcarriers; ++i) grid(t, i) = tr[static_cast<std::size_t>(i)];
    }
    const std::uint8_t* bits = frame.data_bits.data();
    for (int p = 0; p < frame.payload_symbols; ++p)
        for (int i = 0; i < num.n_subcarriers; ++i) {
            if (pilots[static_cast<std::size_t>(i)]) {
                grid(frame.training_symbols + p, i) = kPilotSymbol;
            } else {
                grid(frame.training_symbols + p, i) = qam.map(bits);
                bits += k;
            }
        }
    return grid;
}

Buffer modulate_baseband(const SymbolGrid& grid, const OfdmNumerology& num, int window_taper) {
    num.validate();
    check_taper(num, window_taper);
    const int n = num.dft_size;
    const int cp = num.cyclic_prefix_length();
    const int sym = num.symbol_length();
    const Eigen::Index len = grid.rows() * sym;
    Buffer out = Buffer::zeros(len, 1, num.sample_rate(), 0.0, Domain::electrical);
    auto y = out.samples.col(0);
    const double scale = n / std::sqrt(double(num.n_subcarriers));

    ComplexVector<double> x(n);
    for (Eigen::Index s = 0; s < grid.rows(); ++s) {
        x.setZero();
        for (int i = 0; i < num.n_subcarriers; ++i) x(subcarrier_bin(num, i)) = grid(s, i);
        const ComplexVector<double> body = ifft(x) * scale;
        const Eigen::Index base = s * sym;
        for (int j = 0; j < cp; ++j) {
            auto v = body(n - cp + j);
            if (j < window_taper) v *= rise(j, window_taper);
            y(base + j) += v;
        }
        y.segment(base + cp, n) += body;
        for (int j = 0; j < window_taper; ++j) y((base + sym + j) % len) += body(j) * (1.0 - rise(j, window_taper));
    }
    return out;
}

double papr_db(const Buffer& buf) {
    const auto p = buf.samples.col(0).cwiseAbs2();
    const double mean = p.mean();
    if (mean <= 0) throw PreconditionError("papr_db: buffer carries no power");
    return linear_to_db(p.maxCoeff() / mean);
}

OfdmWaveform generate_waveform(const OfdmFrame& frame, const OfdmNumerology& num, const ModemOptions& options) {
    num.validate();
    frame.validate(num);
    const double fs = num.sample_rate();
    const Buffer bb = modulate_baseband(reference_grid(frame, num), num, options.window_taper);
    const double half_occ = 0.5 * num.derived_occupied_bandwidth();
    Buffer up = resample(bb, options.output_rate, Band{-half_occ, half_occ});
    up = frequency_shift(std::move(up), num.if_frequency, Band{-0.5 * fs, 0.5 * fs});
    OfdmWaveform w;
    w.papr_db = papr_db(up);
    w.signal = std::move(up);
    return w;
}

DemodResult demodulate(const Buffer& rx, const OfdmNumerology& num, const OfdmFrame& reference,
                       const DemodOptions& options) {
    num.validate();
    reference.validate(num);
    rx.validate();
    check_taper(num, options.window_taper);
    if (rx.modes() != 1) throw PreconditionError("demodulate: expected a single-mode electrical waveform");
    const double occ = num.derived_occupied_bandwidth();
    if (rx.sample_rate < 2.0 * (num.if_frequency + 0.5 * occ)) {
        std::ostringstream msg;
        msg << "demodulate: sample rate " << rx.sample_rate << " Hz is below 2*(IF + B/2) = "
            << 2.0 * (num.if_frequency + 0.5 * occ) << " Hz";
        throw PreconditionError(msg.str());
    }
    const double fs = num.sample_rate();
    const int n = num.dft_size;
    const int cp = num.cyclic_prefix_length();
    const int sym = num.symbol_length();
    const Eigen::Index frame_len = Eigen::Index(reference.total_symbols()) * sym;
    const double mapped = double(rx.length()) * fs / rx.sample_rate;
    if (std::abs(mapped - double(frame_len)) > 1e-6) {
        std::ostringstream msg;
        msg << "demodulate: capture of " << rx.length() << " samples at " << rx.sample_rate
            << " Hz does not span exactly one frame (" << frame_len << " samples at " << fs << " Hz)";
        throw PreconditionError(msg.str());
    }

    // IF down-conversion onto the modem grid
    const double if_rel = num.if_frequency - rx.center_frequency;
    Buffer bb = frequency_shift(rx, -if_rel, Band{if_rel - 0.5 * occ, if_rel + 0.5 * occ});
    bb = resample(bb, fs, Band{-0.5 * occ, 0.5 * occ});
    const ComplexVector<double> y = bb.samples.col(0);

    // timing from circular correlation against the training section
    SymbolGrid train_grid = reference_grid(reference, num);
    train_grid.bottomRows(reference.payload_symbols).setZero();
    const ComplexVector<double> tr = modulate_baseband(train_grid, num, options.window_taper).samples.col(0);
    ComplexVector<double> spec = fft(y);
    spec.array() *= fft(tr).conjugate().array();
    const ComplexVector<double> corr = ifft(spec);
    Eigen::Index tau = 0;
    corr.cwiseAbs().maxCoeff(&tau);
    const Eigen::Index support = std::min<Eigen::Index>(frame_len, Eigen::Index(reference.training_symbols) * sym +
                                                                       options.window_taper);
    double rx_energy = 0;
    for (Eigen::Index i = 0; i < support; ++i) rx_energy += std::norm(y((i + tau) % frame_len));
    const double tr_energy = tr.head(support).squaredNorm();
    const double metric = (rx_energy > 0 && tr_energy > 0) ? std::abs(corr(tau)) / std::sqrt(rx_energy * tr_energy) : 0.0;
    if (!(metric >= options.sync_threshold)) {
        std::ostringstream msg;
        msg << "training correlation " << metric << " below threshold " << options.sync_threshold;
        return SyncFailure{metric, msg.str()};
    }

    // FFT window centred in the ISI-free part of the cyclic prefix
    const int start = (options.window_taper + cp) / 2;
    const int n_sym = reference.total_symbols();
    SymbolGrid rx_grid(n_sym, num.n_subcarriers);
    ComplexVector<double> window(n);
    for (int s = 0; s < n_sym; ++s) {
        const Eigen::Index base = tau + Eigen::Index(s) * sym + start;
        for (int j = 0; j < n; ++j) window(j) = y(((base + j) % frame_len + frame_len) % frame_len);
        const ComplexVector<double> bins = fft(window);
        for (int i = 0; i < num.n_subcarriers; ++i) rx_grid(s, i) = bins(subcarrier_bin(num, i));
    }

    // data-aided least-squares one-tap channel estimate over the whole frame
    const SymbolGrid tx_grid = reference_grid(reference, num);
    const Eigen::VectorXcd h = (rx_grid.cwiseProduct(tx_grid.conjugate())).colwise().sum().transpose().cwiseQuotient(
        tx_grid.cwiseAbs2().colwise().sum().transpose().cast<std::complex<double>>());

    const QamConstellation qam(num.qam_order);
    double ref_power = 0;
    for (const auto& p : qam.points()) ref_power += std::norm(p);
    ref_power /= double(qam.points().size());

    const auto pilots = pilot_mask(reference, num);
    const int k = num.bits_per_symbol();
    EvmResult res;
    res.timing_offset = static_cast<int>(tau);
    res.sync_metric = metric;
    std::vector<double> err_power;
    err_power.reserve(std::size_t(reference.payload_symbols) * num.n_subcarriers);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(k));
    std::vector<double> sc_err(static_cast<std::size_t>(num.n_subcarriers), 0.0);
    std::vector<double> sc_pow(static_cast<std::size_t>(num.n_subcarriers), 0.0);
    res.constellation.reserve(err_power.capacity());
    const std::uint8_t* ref_bits = reference.data_bits.data();
    for (int p = 0; p < reference.payload_symbols; ++p) {
        const int s = reference.training_symbols + p;
        for (int i = 0; i < num.n_subcarriers; ++i) {
            if (pilots[static_cast<std::size_t>(i)]) continue;
            const auto z = rx_grid(s, i) / h(i);
            const double e = std::norm(z - tx_grid(s, i));
            err_power.push_back(e);
            sc_err[static_cast<std::size_t>(i)] += e;
            sc_pow[static_cast<std::size_t>(i)] += std::norm(rx_grid(s, i));
            res.constellation.push_back(z);
            qam.demap(z, bits.data());
            for (int b = 0; b < k; ++b) res.bit_errors += (bits[static_cast<std::size_t>(b)] != ref_bits[b]);
            ref_bits += k;
            res.bits_compared += static_cast<std::size_t>(k);
        }
    }
    for (int i = 0; i < num.n_subcarriers; ++i) {
        if (pilots[static_cast<std::size_t>(i)]) continue;
        res.subcarrier_index.push_back(subcarrier_offset(num, i));
        res.per_subcarrier_evm.push_back(100.0 * std::sqrt(sc_err[std::size_t(i)] / reference.payload_symbols / ref_power));
        res.mean_power_db.push_back(linear_to_db(sc_pow[std::size_t(i)] / reference.payload_symbols));
        res.channel_gain_db.push_back(20.0 * std::log10(std::abs(h(i))));
    }

    const double count = double(err_power.size());
    double mean = 0;
    for (double e : err_power) mean += e;
    mean /= count;
    double var = 0;
    for (double e : err_power) var += (e - mean) * (e - mean);
    var /= std::max(1.0, count - 1);
    res.evm_rms = 100.0 * std::sqrt(mean / ref_power);
    // delta method: se(sqrt(m)) = se(m) / (2 sqrt(m))
    res.evm_standard_error =
        mean > 0 ? 100.0 * std::sqrt(var / count) / ref_power / (2.0 * std::sqrt(mean / ref_power)) : 0.0;
    res.snr_estimate = res.evm_rms > 0 ? evm_to_snr(std::min(res.evm_rms, 100.0)) : INFINITY;
    return res;
}

double evm_to_snr(double evm_percent) {
    if (!(evm_percent > 0 && evm_percent <= 100))
        throw PreconditionError("evm_to_snr: EVM must be in (0, 100] percent");
    return -20.0 * std::log10(evm_percent / 100.0);
}

std::string per_subcarrier_csv(const EvmResult& result) {
    std::ostringstream out;
    out << std::setprecision(10);
    out << "subcarrier_index,evm_percent,mean_power_db\n";
    for (std::size_t i = 0; i < result.subcarrier_index.size(); ++i)
        out << result.subcarrier_index[i] << ',' << result.per_subcarrier_evm[i] << ',' << result.mean_power_db[i]
            << '\n';
    return out.str();
}

std::string constellation_csv(const EvmResult& result) {
    std::ostringstream out;
    out << std::setprecision(10);
    out << "symbol,subcarrier_index,i,q\n";
    const std::size_t per_symbol = result.subcarrier_index.size();
    for (std::size_t j = 0; j < result.constellation.size(); ++j)
        out << j / per_symbol << ',' << result.subcarrier_index[j % per_symbol] << ','
            << result.constellation[j].real() << ',' << result.constellation[j].imag() << '\n';
    return out.str();
}

}  // namespace rofsim

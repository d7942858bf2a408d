#include <doctest.h>

#include "rofsim/coherent.hpp"
#include "support.hpp"

using namespace rofsim;
using namespace testing;

namespace {

// 16128 symbols at 31.5 GBd span exactly 65536 samples at 128 GSa/s
constexpr Eigen::Index kSymbols = 16128;

CoherentSignal make_signal(const CoherentSpec& spec = {}, std::uint64_t seed = 7) {
    return generate_dp_qpsk(spec, kSymbols, kGridRate, kGridCenter, RngStream{seed, 0});
}

CoherentMetrics expect_metrics(const CoherentResult& r) {
    REQUIRE(std::holds_alternative<CoherentMetrics>(r));
    return std::get<CoherentMetrics>(r);
}

// independent raised-cosine PSD
double rc(double f, double rs, double beta) {
    const double a = std::abs(f), f1 = rs * (1 - beta) / 2, f2 = rs * (1 + beta) / 2;
    if (a <= f1) return 1;
    if (a >= f2) return 0;
    return 0.5 * (1 + std::cos(kPi * (a - f1) / (rs * beta)));
}

/// Symmetric bandwidth holding 99% of the RC power, by fine numerical integration.
double rc_99(double rs, double beta) {
    const int n = 200000;
    const double fmax = rs * (1 + beta) / 2, step = fmax / n;
    std::vector<double> cum(n + 1, 0.0);
    for (int i = 0; i < n; ++i) cum[i + 1] = cum[i] + rc((i + 0.5) * step, rs, beta) * step;
    for (int i = 0; i <= n; ++i)
        if (cum[i] >= 0.99 * cum[n]) return 2 * i * step;
    return 2 * fmax;
}

Buffer load_ase(const Buffer& field, double osnr_db, std::uint64_t stream) {
    const double total_psd = mean_power(field) / (db_to_linear(osnr_db) * kOsnrReferenceBandwidth);
    return add_gaussian_noise(field, total_psd / 2, RngStream{99, stream});
}

}  // namespace

TEST_CASE("CoherentSpec validation") {
    CoherentSpec s;
    CHECK_NOTHROW(s.validate());
    CHECK(s.occupied_bandwidth() == doctest::Approx(36.225e9));
    s.rrc_rolloff = 0.2;  // 37.8 GHz
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = CoherentSpec{};
    s.center_frequency += 2e9;
    CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("generate_dp_qpsk") {
    SUBCASE("launch power and modes") {
        CoherentSpec spec;
        spec.launch_power_dbm = -3;
        const CoherentSignal s = make_signal(spec);
        CHECK(s.field.modes() == 2);
        CHECK(s.field.length() == 65536);
        CHECK(power_dbm(s.field) == doctest::Approx(-3).epsilon(0.05 / 3));
        CHECK(s.symbols.rows() == kSymbols);
    }
    SUBCASE("determinism") {
        const CoherentSignal a = make_signal(), b = make_signal(), c = make_signal({}, 8);
        CHECK(a.field.samples == b.field.samples);
        CHECK(a.symbols != c.symbols);
    }
    SUBCASE("99% bandwidth follows the raised-cosine oracle") {
        const CoherentSignal s = make_signal();
        const SpectrumEstimate est = estimate_spectrum(s.field, 20e6);
        const double bw = occupied_bandwidth(est);
        const double oracle = rc_99(31.5e9, 0.15);
        CHECK(bw == doctest::Approx(oracle).epsilon(0.01));
        CHECK(bw < 31.5e9 * 1.15);
        CHECK(est.integrated_power(194931.25e9, 194968.75e9) / est.total_power() > 0.9999);
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(generate_dp_qpsk({}, 1000, kGridRate, kGridCenter, {}), PreconditionError);
        CHECK_THROWS_AS(generate_dp_qpsk({}, kSymbols + 1, kGridRate, kGridCenter, {}), PreconditionError);
        CHECK_THROWS_AS(generate_dp_qpsk({}, kSymbols, kGridRate, kGridCenter + 0.3e6, {}), PreconditionError);
    }
}

TEST_CASE("coherent_receive") {
    const CoherentSpec spec;
    const CoherentSignal s = make_signal(spec);

    SUBCASE("noiseless loopback") {
        const CoherentMetrics m = expect_metrics(coherent_receive(s.field, spec, s.symbols));
        CHECK(m.bit_errors == 0);
        CHECK(m.pre_fec_ber == 0);
        CHECK(m.q_factor_db > 25);
        CHECK(m.snr_db > 60);
    }
    SUBCASE("fibre dispersion and WSS shaping are equalised") {
        Buffer f = propagate_fiber(s.field, FiberSpec{84});
        for (int i = 0; i < 8; ++i) f = wss_filter(std::move(f), WssFilterProfile{194931.25e9, 194968.75e9});
        const CoherentMetrics m = expect_metrics(coherent_receive(f, spec, s.symbols));
        CHECK(m.bit_errors == 0);
        CHECK(m.snr_db > 20);
    }
    SUBCASE("ASE at 28.5 dB OSNR") {
        const double oracle = 28.5 - 10 * std::log10(31.5e9 / 12.5e9);
        const CoherentMetrics m = expect_metrics(coherent_receive(load_ase(s.field, 28.5, 1), spec, s.symbols));
        CHECK(m.snr_db == doctest::Approx(oracle).epsilon(0.3 / oracle));
        CHECK(m.osnr_db == std::nullopt);

        CoherentSpec with_trx = spec;
        with_trx.transceiver_snr_db = 19.76;
        const double combined = -10 * std::log10(db_to_linear(-oracle) + db_to_linear(-19.76));
        const CoherentMetrics t =
            expect_metrics(coherent_receive(load_ase(s.field, 28.5, 1), with_trx, s.symbols, RngStream{5, 5}));
        CHECK(t.snr_db == doctest::Approx(combined).epsilon(0.3 / combined));
        CHECK(std::abs(t.snr_db - 18.5) < 1.0);
    }
    SUBCASE("counted BER agrees with the Gaussian Q") {
        const CoherentMetrics m = expect_metrics(coherent_receive(load_ase(s.field, 12, 2), spec, s.symbols));
        REQUIRE(m.q_from_counted_ber);
        CHECK(m.bit_errors >= 100);
        CHECK(m.pre_fec_ber == doctest::Approx(m.estimated_ber).epsilon(0.1));
        CHECK(0.5 * std::erfc(db_to_linear(m.q_factor_db / 2) / std::sqrt(2.0)) ==
              doctest::Approx(m.pre_fec_ber).epsilon(1e-6));
    }
    SUBCASE("Q decreases as ASE grows") {
        double last = std::numeric_limits<double>::infinity();
        for (double osnr : {30.0, 24.0, 18.0, 14.0}) {
            const double q = expect_metrics(coherent_receive(load_ase(s.field, osnr, 3), spec, s.symbols)).q_factor_db;
            CHECK(q < last);
            last = q;
        }
    }
    SUBCASE("an adjacent carrier in the ARoF slot leaves Q unchanged") {
        const Buffer noisy = load_ase(s.field, 20, 4);
        Buffer adj = tone(noisy.length(), kGridRate, kArofCarrier - kGridCenter, std::sqrt(mean_power(s.field)),
                          kGridCenter, Domain::optical);
        const double q0 = expect_metrics(coherent_receive(noisy, spec, s.symbols)).q_factor_db;
        const double q1 = expect_metrics(coherent_receive(couple(noisy, with_modes(adj, 2), 0.5), spec, s.symbols)).q_factor_db;
        CHECK(std::abs(q1 - q0) < 0.5);
    }
    SUBCASE("no signal is a sync failure") {
        const Buffer noise = add_gaussian_noise(Buffer::zeros(65536, 2, kGridRate, kGridCenter, Domain::optical), 1e-15,
                                                RngStream{3, 3});
        const CoherentResult r = coherent_receive(noise, spec, s.symbols);
        REQUIRE(std::holds_alternative<SyncFailure>(r));
        CHECK_FALSE(std::get<SyncFailure>(r).reason.empty());
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(coherent_receive(tone(65536, kGridRate, 0), spec, s.symbols), PreconditionError);
        CHECK_THROWS_AS(coherent_receive(s.field, spec, s.symbols.topRows(8192)), PreconditionError);
    }
}

TEST_CASE("Q and BER conversions") {
    CHECK(q_factor_from_ber(0.5 * std::erfc(6.0 / std::sqrt(2.0))) == doctest::Approx(20 * std::log10(6.0)));
    CHECK(std::isinf(q_factor_from_ber(0)));
    // Gray QPSK: BER = Q(sqrt(SNR))
    CHECK(qpsk_ber(db_to_linear(10.0)) == doctest::Approx(0.5 * std::erfc(std::sqrt(10.0 / 2))));
}

TEST_CASE("leakage_into") {
    CoherentSpec spec;
    const CoherentSignal s = make_signal(spec);
    SUBCASE("ideal filter reports the floor") {
        WssFilterProfile slot = kArofSlot;
        slot.ideal = true;
        CHECK(leakage_into(s.field, slot) == kLeakageFloorDbm);
    }
    SUBCASE("40 dB floor matches the integrated |H|^2 PSD") {
        const WssFilterProfile slot = kArofSlot;
        // oracle: RC PSD (0 dBm total) weighted by an independent super-Gaussian with floor
        const double rs = 31.5e9, beta = 0.15, fc = 194950e9;
        auto h2 = [&](double f) {
            const double x = 2 * (f - slot.center()) / slot.bandwidth();
            return std::max(std::exp(-std::log(2.0) * std::pow(x, 8)), 1e-4);
        };
        double num = 0, den = 0;
        const double step = 1e6;
        for (double f = fc - 20e9; f <= fc + 20e9; f += step) {
            num += rc(f - fc, rs, beta) * h2(f);
            den += rc(f - fc, rs, beta);
        }
        const double oracle = 10 * std::log10(num / den) - slot.insertion_loss_db;
        const double got = leakage_into(s.field, slot);
        CHECK(got == doctest::Approx(oracle).epsilon(0.2 / std::abs(oracle)));
        CHECK(got > -40 - 6);
    }
    SUBCASE("leakage grows as the slot approaches the coherent channel") {
        double last = -1e9;
        for (double pull : {0.0, 0.5e9, 1.0e9, 2.0e9}) {
            WssFilterProfile slot{kArofSlot.slot_low - pull, kArofSlot.slot_high - pull};
            const double l = leakage_into(s.field, slot);
            CHECK(l > last);
            last = l;
        }
    }
}

#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace rofsim;
using namespace testing;

namespace {

// Power in the DFT bin nearest to `f` (relative), normalised to mean power.
double line_power(const Buffer& b, double f, Eigen::Index mode = 0) {
    const double n = double(b.length());
    const auto X = fft(b.samples.col(mode));
    return std::norm(X(bin_index(f, b.length(), b.sample_rate))) / (n * n);
}

Buffer cw(double dbm, Eigen::Index n = 1 << 16) {
    return tone(n, kGridRate, 0.0, std::sqrt(dbm_to_watts(dbm)), kGridCenter, Domain::optical);
}

Buffer noisy_optical(Eigen::Index n, std::uint64_t seed) {
    return add_gaussian_noise(Buffer::zeros(n, 2, kGridRate, kGridCenter, Domain::optical), 1e-15, RngStream{seed, 0});
}

double composite_3db_bandwidth(const WssFilterProfile& p, int n) {
    auto t = [&](double f) { return std::pow(p.power_transfer(f), n); };
    auto edge = [&](double inside, double outside) {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (inside + outside);
            (t(mid) >= 0.5 ? inside : outside) = mid;
        }
        return 0.5 * (inside + outside);
    };
    const double c = p.center();
    return edge(c, c + p.bandwidth()) - edge(c, c - p.bandwidth());
}

}  // namespace

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(LaserSpec({1e14, 18}).validate(), ValidationError);
    CHECK_THROWS_AS(MzmSpec({3.5, 0.5, 1.5}).validate(), ValidationError);
    CHECK_THROWS_AS(MzmSpec({3.5, 1.2, 0.2}).validate(), ValidationError);
    WssFilterProfile w = kArofSlot;
    CHECK_NOTHROW(w.validate());
    w.slot_high = w.slot_low + 7e9;
    CHECK_THROWS_AS(w.validate(), ValidationError);
    w = kArofSlot;
    w.floor_rejection_db = 30;
    CHECK_THROWS_AS(w.validate(), ValidationError);
    w = kArofSlot;
    w.slot_high = w.slot_low;
    CHECK_THROWS_AS(w.validate(), ValidationError);
    EdfaSpec e;
    e.gain_db = 30;
    try {
        e.validate();
        FAIL("accepted 30 dB");
    } catch (const ValidationError& err) {
        CHECK(err.field() == "gain");
        CHECK(std::string(err.what()).find("[5, 25]") != std::string::npos);
    }
    e = {};
    e.noise_figure_db = 2;
    CHECK_THROWS_AS(e.validate(), ValidationError);
    CHECK_THROWS_AS(FiberSpec({-1}).validate(), ValidationError);
    CHECK_THROWS_AS(PhotodetectorSpec({1.5}).validate(), ValidationError);
}

TEST_CASE("mzm_modulate") {
    const LaserSpec laser{194971.875e9, 10.0};
    SUBCASE("zero drive at quadrature leaves the carrier at P - IL - 3 dB") {
        const Buffer drive = Buffer::zeros(4096, 1, 16e9, 0, Domain::electrical);
        const Buffer out = mzm_modulate(laser, drive, MzmSpec{});
        CHECK(power_dbm(out) == doctest::Approx(10.0 - 5.0 - 10 * std::log10(2.0)).epsilon(1e-12));
        CHECK(out.center_frequency == laser.frequency);
        CHECK(out.is_optical());
    }
    SUBCASE("single tone follows the Bessel series") {
        const double fs = 16e9;
        const Buffer drive = tone(16000, fs, 1.5e9);
        for (double m : {0.05, 0.1, 0.2}) {
            MzmSpec spec;
            spec.modulation_index = m;
            const Buffer out = mzm_modulate(laser, drive, spec);
            const double beta = 0.5 * kPi * m;
            const double p_total = dbm_to_watts(10.0 - 5.0);
            // field lines: carrier J0/sqrt2, +-k*w lines J_k/sqrt2 (quadrature bias)
            const double j0 = std::cyl_bessel_j(0.0, beta), j1 = std::cyl_bessel_j(1.0, beta),
                         j2 = std::cyl_bessel_j(2.0, beta);
            CHECK(line_power(out, 0) == doctest::Approx(p_total * j0 * j0 / 2).epsilon(1e-6));
            for (double sgn : {-1.0, 1.0}) {
                CHECK(line_power(out, sgn * 1.5e9) == doctest::Approx(p_total * j1 * j1 / 2).epsilon(1e-6));
                CHECK(line_power(out, sgn * 3.0e9) == doctest::Approx(p_total * j2 * j2 / 2).epsilon(1e-6));
            }
            const double h2_db = db_ratio(line_power(out, 3e9), line_power(out, 1.5e9));
            CHECK(h2_db == doctest::Approx(20 * std::log10(j2 / j1)).epsilon(1e-6));
        }
        // at m = 0.2 the second harmonic sits about 22 dB under the first
        MzmSpec spec;
        const Buffer out = mzm_modulate(laser, drive, spec);
        CHECK(db_ratio(line_power(out, 3e9), line_power(out, 1.5e9)) == doctest::Approx(-22.1).epsilon(0.01));
    }
    SUBCASE("sideband pair power tracks m^2") {
        const Buffer drive = tone(16000, 16e9, 1.5e9);
        auto pair = [&](double m) {
            MzmSpec spec;
            spec.modulation_index = m;
            const Buffer out = mzm_modulate(laser, drive, spec);
            return line_power(out, 1.5e9) + line_power(out, -1.5e9);
        };
        CHECK(pair(0.1) / pair(0.05) == doctest::Approx(4.0).epsilon(0.05));
        CHECK(pair(0.2) / pair(0.1) == doctest::Approx(4.0).epsilon(0.05));
    }
    SUBCASE("over-modulation warning") {
        Buffer drive = tone(1000, 16e9, 1e9, 5.0);
        MzmSpec spec;
        spec.normalize_drive = false;
        Warnings w;
        (void)mzm_modulate(laser, drive, spec, &w);
        CHECK_FALSE(w.empty());
        Warnings none;
        (void)mzm_modulate(laser, drive, MzmSpec{}, &none);
        CHECK(none.empty());
    }
    SUBCASE("reference OFDM drive occupies 3.488 GHz") {
        const ArofSignal s = arof_on_grid(40);
        const SpectrumEstimate est = estimate_spectrum(s.field, 5e6);
        const double sideband_psd = est.mean_psd(kArofCarrier + 1.3e9, kArofCarrier + 1.7e9);
        double lo = INFINITY, hi = -INFINITY;
        for (Eigen::Index k = 0; k < est.psd.size(); ++k)
            if (est.psd(k) > 1e-2 * sideband_psd) {  // second-order products sit near -30 dB
                lo = std::min(lo, est.frequency(k));
                hi = std::max(hi, est.frequency(k));
            }
        CHECK((hi - lo) == doctest::Approx(3.488e9).epsilon(0.01));
        CHECK(std::abs(0.5 * (hi + lo) - kArofCarrier) < 20e6);
    }
}

TEST_CASE("propagate_fiber") {
    const Buffer in = noisy_optical(1 << 14, 3);
    SUBCASE("zero length is the identity") {
        CHECK(propagate_fiber(in, FiberSpec{0}).samples == in.samples);
    }
    SUBCASE("25 km at 0.2 dB/km is -5 dB") {
        CHECK(power_dbm(propagate_fiber(in, FiberSpec{25})) - power_dbm(in) == doctest::Approx(-5.0).epsilon(1e-12));
    }
    SUBCASE("two 12.5 km spans equal one 25 km span") {
        const Buffer a = propagate_fiber(propagate_fiber(in, FiberSpec{12.5}), FiberSpec{12.5});
        const Buffer b = propagate_fiber(in, FiberSpec{25});
        CHECK(std::abs(power_dbm(a) - power_dbm(b)) < 1e-9);
        CHECK(rms_difference(a, b) < 1e-10 * std::sqrt(mean_power(b)));
    }
    SUBCASE("quadratic dispersion phase") {
        const double f = 10e9;
        const Buffer t = tone(1 << 14, kGridRate, 10e9 - std::fmod(10e9, kGridRate / (1 << 14)), 1e-2, kGridCenter,
                              Domain::optical);
        const double f_bin = bin_frequency(bin_index(f, t.length(), kGridRate), t.length(), kGridRate);
        const Buffer out = propagate_fiber(t, FiberSpec{10, 0.2, 17});
        const double lambda = kSpeedOfLight / kGridCenter;
        const double beta2 = -17e-6 * lambda * lambda / (2 * kPi * kSpeedOfLight);
        const double expected = -0.5 * beta2 * std::pow(2 * kPi * f_bin, 2) * 1e4;
        const std::complex<double> ratio = out.samples(0, 0) / t.samples(0, 0);
        CHECK(std::arg(ratio * std::polar(1.0, -expected)) == doctest::Approx(0).epsilon(1e-9));
        CHECK(beta2 * 1e27 == doctest::Approx(-21.34).epsilon(0.01));  // ps^2/km at 1537.8 nm
    }
}

TEST_CASE("amplify") {
    SUBCASE("0 dB gain at minimum noise figure is the identity") {
        EdfaSpec e{0, 3, 23, 0, 25};
        const Buffer in = cw(-10);
        const Buffer out = amplify(in, e, RngStream{1, 1});
        REQUIRE(out.modes() == 2);
        CHECK(out.samples.col(0) == in.samples.col(0));
        CHECK(out.samples.col(1).squaredNorm() == 0);
    }
    SUBCASE("ASE PSD per polarisation is (G-1) h nu NF / 2") {
        EdfaSpec e{20, 5};
        const Buffer out = amplify(Buffer::zeros(1 << 20, 1, kGridRate, kGridCenter, Domain::optical), e, RngStream{2, 2});
        const double expected = 99 * kPlanck * kGridCenter * db_to_linear(5.0) / 2;
        for (int m = 0; m < 2; ++m) {
            const double psd = out.samples.col(m).squaredNorm() / double(out.length()) / kGridRate;
            CHECK(psd == doctest::Approx(expected).epsilon(0.02));
        }
    }
    SUBCASE("OSNR after one amplifier follows P_in - NF + 58 dB") {
        // 0.1 nm at 1537.6 nm: 10 log10(h nu * 12.5 GHz / 1 mW) = -57.96 dB
        const double p_in = -30, nf = 5;
        const Buffer out = amplify(cw(p_in, 1 << 20), EdfaSpec{20, nf}, RngStream{3, 3});
        const OsnrResult r = measure_osnr(out, Band{kGridCenter - 100e6, kGridCenter + 100e6});
        REQUIRE(r.has_value());
        const double oracle = p_in - nf - 10 * std::log10(kPlanck * kGridCenter * 12.5e9 / 1e-3) +
                              10 * std::log10(100.0 / 99.0);
        CHECK(oracle == doctest::Approx(23.0).epsilon(0.005));
        CHECK(r.osnr_db == doctest::Approx(oracle).epsilon(0.3 / 23));
    }
    SUBCASE("a cascade with an interstage span is noisier than one amplifier with the same net gain") {
        const Buffer in = cw(-20, 1 << 20);
        const Buffer single = amplify(in, EdfaSpec{20, 5}, RngStream{4, 1});
        const Buffer cascade =
            amplify(attenuate(amplify(in, EdfaSpec{10, 5}, RngStream{4, 2}), 10), EdfaSpec{20, 5}, RngStream{4, 3});
        const Band band{kGridCenter - 100e6, kGridCenter + 100e6};
        const OsnrResult a = measure_osnr(single, band), b = measure_osnr(cascade, band);
        REQUIRE(a.has_value());
        REQUIRE(b.has_value());
        CHECK(b.osnr_db < a.osnr_db);
        // ASE in units of h nu NF B: 9 after stage one, 0.9 after the pad, 0.9*100 + 99 at the output
        CHECK(a.osnr_db - b.osnr_db == doctest::Approx(10 * std::log10(189.0 / 99.0)).epsilon(0.1));
    }
    SUBCASE("saturation clamps output power and warns") {
        Warnings w;
        const Buffer out = amplify(cw(10), EdfaSpec{20, 5, 23}, RngStream{5, 5}, &w);
        CHECK(power_dbm(out) == doctest::Approx(23).epsilon(1e-3));
        CHECK_FALSE(w.empty());
    }
}

TEST_CASE("wss_filter") {
    WssFilterProfile p = kArofSlot;
    p.insertion_loss_db = 0;
    const double fc = 0.5 * (p.slot_low + p.slot_high);
    auto through = [&](double f_abs, const WssFilterProfile& prof) {
        const Buffer t = tone(1 << 16, kGridRate, f_abs - kGridCenter, 1e-2, kGridCenter, Domain::optical);
        return db_ratio(mean_power(wss_filter(t, prof)), mean_power(t));
    };
    SUBCASE("passband centre") { CHECK(std::abs(through(fc, p)) < 0.1); }
    SUBCASE("slot edge is the half-power point") {
        const double df = kGridRate / (1 << 16);
        const double edge = kGridCenter + std::round((p.slot_high - kGridCenter) / df) * df;
        CHECK(through(edge, p) == doctest::Approx(-3.0).epsilon(0.1));
        CHECK(10 * std::log10(p.power_transfer(p.slot_high)) == doctest::Approx(-3.0103).epsilon(1e-4));
        CHECK(10 * std::log10(p.power_transfer(p.slot_low)) == doctest::Approx(-3.0103).epsilon(1e-4));
    }
    SUBCASE("in-band ripple and floor") {
        double lo = 1, hi = 0;
        for (double f = fc - 0.25 * p.bandwidth(); f <= fc + 0.25 * p.bandwidth(); f += 1e7) {
            lo = std::min(lo, p.power_transfer(f));
            hi = std::max(hi, p.power_transfer(f));
        }
        CHECK(10 * std::log10(hi / lo) < 0.2);
        CHECK(10 * std::log10(p.power_transfer(fc + 30e9)) == doctest::Approx(-40));
        WssFilterProfile ideal = p;
        ideal.ideal = true;
        CHECK(ideal.power_transfer(fc + 30e9) == 0);
    }
    SUBCASE("insertion loss") {
        WssFilterProfile q = kArofSlot;
        CHECK(through(fc, q) == doctest::Approx(-6.0).epsilon(0.02));
    }
    SUBCASE("cascade narrowing B * N^(-1/(2n))") {
        for (int n : {1, 2, 4, 8}) {
            const double bw = composite_3db_bandwidth(p, n);
            CHECK(bw == doctest::Approx(p.bandwidth() * std::pow(n, -1.0 / 8)).epsilon(0.01));
        }
    }
    SUBCASE("common misalignment shifts the composite centre") {
        for (double delta : {-1e9, 0.5e9, 1e9})
            for (int n : {1, 3, 8}) {
                WssFilterProfile q = p;
                q.misalignment = delta;
                double m0 = 0, m1 = 0;
                for (double f = fc - 2 * p.bandwidth(); f <= fc + 2 * p.bandwidth(); f += 1e6) {
                    const double t = std::pow(q.power_transfer(f), n);
                    m0 += t;
                    m1 += t * f;
                }
                CHECK(std::abs(m1 / m0 - fc - delta) < 50e6);
            }
    }
    SUBCASE("positive misalignment moves the passband up") {
        WssFilterProfile q = p;
        q.misalignment = 1e9;
        CHECK(q.power_transfer(p.slot_high + 0.5e9) > p.power_transfer(p.slot_high + 0.5e9));
        CHECK(q.power_transfer(p.slot_low + 0.5e9) < p.power_transfer(p.slot_low + 0.5e9));
    }
    SUBCASE("multi-slot port") {
        WssFilterProfile coh{194931.25e9, 194968.75e9};
        const WssFilterProfile both[] = {coh, p};
        // flat across the shared boundary: neighbouring slots sum to ~1
        CHECK(port_power_transfer(both, 194968.75e9) > 0.9);
        CHECK(port_power_transfer(both, 194950e9) == doctest::Approx(1.0));
        CHECK(port_power_transfer(both, 194990e9) == doctest::Approx(1e-4));
    }
    SUBCASE("slot outside the buffer band is rejected") {
        WssFilterProfile far{195100e9, 195106.25e9};
        CHECK_THROWS_AS(wss_filter(noisy_optical(1024, 1), far), PreconditionError);
    }
}

TEST_CASE("attenuate") {
    const Buffer in = cw(0, 4096);
    CHECK(attenuate(in, 0).samples == in.samples);
    CHECK(power_dbm(attenuate(in, 10)) == doctest::Approx(-10).epsilon(1e-12));
    CHECK(rms_difference(attenuate(attenuate(in, 5), 5), attenuate(in, 10)) < 1e-15);
    CHECK_THROWS_AS(attenuate(in, -1), PreconditionError);
}

TEST_CASE("couple") {
    const Buffer a = cw(0, 4096);
    const Buffer silence = Buffer::zeros(4096, 1, kGridRate, kGridCenter, Domain::optical);
    CHECK(couple(a, silence, 1.0).samples == a.samples);
    CHECK(power_dbm(couple(a, silence, 0.5)) == doctest::Approx(-10 * std::log10(2.0)).epsilon(1e-12));
    SUBCASE("two channels each appear 3 dB down") {
        const Buffer x = tone(1 << 16, kGridRate, -10e9, 1e-2, kGridCenter, Domain::optical);
        const Buffer y = tone(1 << 16, kGridRate, 10e9, 1e-2, kGridCenter, Domain::optical);
        const SpectrumEstimate est = estimate_spectrum(couple(x, y, 0.5), 100e6);
        const double px = est.integrated_power(kGridCenter - 10.5e9, kGridCenter - 9.5e9);
        const double py = est.integrated_power(kGridCenter + 9.5e9, kGridCenter + 10.5e9);
        CHECK(db_ratio(px, 1e-4) == doctest::Approx(-3.0103).epsilon(0.01));
        CHECK(db_ratio(py, 1e-4) == doctest::Approx(-3.0103).epsilon(0.01));
    }
    SUBCASE("grid mismatch is rejected") {
        Buffer shifted = silence;
        shifted.center_frequency += 1e9;
        CHECK_THROWS_AS(couple(a, shifted, 0.5), PreconditionError);
    }
}

TEST_CASE("photodetect") {
    PhotodetectorSpec pd;
    pd.shot_noise = false;
    SUBCASE("CW carrier gives DC current R P") {
        const Buffer i = photodetect(cw(0, 8192), pd, RngStream{});
        CHECK(i.samples.col(0).real().mean() == doctest::Approx(0.8e-3).epsilon(1e-12));
        const double ripple = (i.samples.col(0).real().array() - 0.8e-3).abs().maxCoeff();
        CHECK(ripple < 1e-15);
    }
    SUBCASE("carrier plus tone beats to 4 R^2 Pc Ps") {
        const double pc = 1e-3, ps = 1e-5;
        Buffer f = cw(0, 8192);
        f.samples.col(0) += tone(8192, kGridRate, 1.5e9, std::sqrt(ps)).samples.col(0);
        const Buffer i = photodetect(f, pd, RngStream{});
        CHECK(line_power(i, 1.5e9) == doctest::Approx(4 * 0.64 * pc * ps).epsilon(1e-6));
    }
    SUBCASE("beats beyond the bandwidth are suppressed by at least 40 dB") {
        const double pc = 1e-3, ps = 1e-5;
        Buffer f = cw(0, 8192);
        f.samples.col(0) += tone(8192, kGridRate, 25e9, std::sqrt(ps)).samples.col(0);
        const Buffer i = photodetect(f, pd, RngStream{});
        CHECK(db_ratio(line_power(i, 25e9) + 1e-300, 4 * 0.64 * pc * ps) < -40);
        CHECK(10 * std::log10(photodetector_response(pd, 20e9)) == doctest::Approx(-3.0103).epsilon(1e-4));
    }
    SUBCASE("shot and thermal noise variance") {
        PhotodetectorSpec noisy;
        noisy.thermal_noise_density = 20e-12;
        const Buffer i = photodetect(cw(0, 1 << 20), noisy, RngStream{6, 6});
        const Eigen::VectorXd ac = i.samples.col(0).real().array() - i.samples.col(0).real().mean();
        // real noise of one-sided PSD S, filtered to the super-Gaussian response
        double enb = 0;
        for (double f = 0; f < 64e9; f += 1e6) enb += photodetector_response(noisy, f) * 1e6;
        const double s = 2 * kElectronCharge * 0.8e-3 + 20e-12 * 20e-12;
        CHECK(ac.squaredNorm() / double(ac.size()) == doctest::Approx(s * enb).epsilon(0.02));
    }
}

TEST_CASE("passive elements never add power and linear elements scale") {
    const Buffer in = noisy_optical(1 << 14, 8);
    WssFilterProfile w{194940e9, 194946.25e9};
    const auto passives = {
        +[](const Buffer& b) { return propagate_fiber(b, FiberSpec{25}); },
        +[](const Buffer& b) { return attenuate(b, 3); },
    };
    for (auto op : passives) {
        CHECK(power_dbm(op(in)) <= power_dbm(in) + 1e-9);
        for (double alpha : {0.5, 2.0}) {
            Buffer scaled = in;
            scaled.samples *= alpha;
            const Buffer a = op(scaled);
            Buffer b = op(in);
            b.samples *= alpha;
            CHECK(rms_difference(a, b) <= 1e-10 * std::sqrt(mean_power(b)));
        }
    }
    CHECK(power_dbm(wss_filter(in, w)) <= power_dbm(in) + 1e-9);
    const Buffer other = noisy_optical(1 << 14, 9);
    for (double r : {0.0, 0.3, 0.5, 1.0}) {
        CHECK(mean_power(couple(in, other, r)) <= (mean_power(in) + mean_power(other)) * (1 + 1e-9));
        CHECK(mean_power(couple(in, in, r)) <= 2 * mean_power(in) * (1 + 1e-9));
    }
    Buffer scaled = in;
    scaled.samples *= 2.0;
    Buffer ref = wss_filter(in, w);
    ref.samples *= 2.0;
    CHECK(rms_difference(wss_filter(scaled, w), ref) <= 1e-10 * std::sqrt(mean_power(ref)));
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nvsep/separate.hpp"

using namespace nvsep;

namespace {

Spectrum lorentz(double center, double hwhm, double amp, double offset,
                 double lo, double hi, double step) {
    Spectrum s;
    for (double lam = lo; lam <= hi + 0.5 * step; lam += step) {
        s.wavelength_nm.push_back(lam);
        const double d = lam - center;
        s.counts.push_back(offset + amp * hwhm * hwhm / (d * d + hwhm * hwhm));
    }
    return s;
}

}  // namespace

TEST_CASE("unmix inverts the mixing model exactly") {
    const double eps = 0.18, del = -0.04, c = 85.0;
    SpectrumPair p;
    std::vector<double> minus, zero;
    for (int i = 0; i < 20; ++i) {
        const double lam = 630.0 + i;
        const double v = 300.0 / (1.0 + 0.3 * (i - 9.0) * (i - 9.0));
        const double z = 40.0 + 3.0 * i;
        minus.push_back(v);
        zero.push_back(z);
        p.off.wavelength_nm.push_back(lam);
        p.on.wavelength_nm.push_back(lam);
        p.off.counts.push_back(c + v + z);
        p.on.counts.push_back(c + (1.0 - eps) * v + (1.0 - del) * z);
    }
    const auto s = unmix(p, eps, del, c);
    REQUIRE(s.epsilon_used == eps);
    REQUIRE(s.delta_used == del);
    REQUIRE(s.c_used == c);
    REQUIRE(s.i_minus.size() == 20);
    for (int i = 0; i < 20; ++i) {
        REQUIRE(s.i_minus.counts[i] == Catch::Approx(minus[i]).margin(1e-9));
        REQUIRE(s.i_zero.counts[i] == Catch::Approx(zero[i]).margin(1e-9));
        REQUIRE(s.i_minus.wavelength_nm[i] == p.off.wavelength_nm[i]);
    }
}

TEST_CASE("unmix refuses ill-conditioned separations") {
    SpectrumPair p;
    for (int i = 0; i < 5; ++i) {
        p.off.wavelength_nm.push_back(600.0 + i);
        p.on.wavelength_nm.push_back(600.0 + i);
        p.off.counts.push_back(10.0 + i);
        p.on.counts.push_back(9.0 + i);
    }
    REQUIRE_THROWS_AS(unmix(p, 0.0101, 0.01, 0.0), ModelError);
    REQUIRE_NOTHROW(unmix(p, 0.0101, 0.01, 0.0, 1e-5));
    REQUIRE_THROWS_AS(unmix(p, 0.2, -0.03, 0.0, 0.0), ValidationError);
    REQUIRE_THROWS_AS(unmix(p, 0.2, -0.03, 0.0, -1.0), ValidationError);
}

TEST_CASE("peak leakage flags central structure") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Spectrum s;
    for (int i = 0; i <= 20; ++i) {
        s.wavelength_nm.push_back(600.0 + i);
        s.counts.push_back(5.0 + 0.3 * i + gauss(rng));
    }
    const Interval window{599.5, 620.5};
    const double quiet = peak_leakage(s, window);
    REQUIRE(quiet < 8.0);

    Spectrum spiked = s;
    spiked.counts[10] += 40.0;
    REQUIRE(peak_leakage(spiked, window) > 15.0);
    REQUIRE(peak_leakage(spiked, window) > 3.0 * quiet);

    SECTION("exactly linear data is fit to roundoff") {
        // The baseline residuals collapse to floating point dust, so the
        // ratio lands on the tiny fallback scale rather than exactly zero.
        Spectrum lin;
        for (int i = 0; i <= 20; ++i) {
            lin.wavelength_nm.push_back(600.0 + i);
            lin.counts.push_back(5.0 + 0.3 * i);
        }
        REQUIRE(peak_leakage(lin, window) < 0.5);
    }
    SECTION("window must hold at least nine points") {
        REQUIRE_THROWS_AS(peak_leakage(s, Interval{599.5, 607.5}), ValidationError);
    }
}

TEST_CASE("linewidth transform identifies stretch, shift, and scale") {
    const Interval window{635.5, 638.5};

    SECTION("pure width change") {
        const double alpha_true = -0.02, g0 = 0.125;
        SpectrumPair p;
        p.off = lorentz(637.0, g0, 1000.0, 0.0, 634.0, 640.0, 0.01);
        p.on = lorentz(637.0, (1.0 + alpha_true) * g0, 1000.0, 0.0, 634.0, 640.0, 0.01);
        const auto fit = linewidth_contrast(p, window, 7);
        REQUIRE(fit.alpha == Catch::Approx(alpha_true).margin(1e-3));
        REQUIRE(fit.shift == Catch::Approx(0.0).margin(1e-3));
        REQUIRE(fit.vscale == Catch::Approx(1.0).margin(1e-3));
        REQUIRE(fit.residual_rms < 1.0);
    }
    SECTION("pure center shift") {
        SpectrumPair p;
        p.off = lorentz(637.0, 0.125, 1000.0, 0.0, 634.0, 640.0, 0.01);
        p.on = lorentz(637.05, 0.125, 1000.0, 0.0, 634.0, 640.0, 0.01);
        const auto fit = linewidth_contrast(p, window, 7);
        REQUIRE(fit.alpha == Catch::Approx(0.0).margin(2e-3));
        // red displacement of the on feature fits as a negative grid shift
        REQUIRE(fit.shift == Catch::Approx(-0.05).margin(2e-3));
        REQUIRE(fit.vscale == Catch::Approx(1.0).margin(2e-3));
    }
    SECTION("pure amplitude ratio") {
        SpectrumPair p;
        p.off = lorentz(637.0, 0.125, 1000.0, 0.0, 634.0, 640.0, 0.01);
        p.on = lorentz(637.0, 0.125, 1300.0, 0.0, 634.0, 640.0, 0.01);
        const auto fit = linewidth_contrast(p, window, 7);
        REQUIRE(fit.alpha == Catch::Approx(0.0).margin(2e-3));
        REQUIRE(fit.vscale == Catch::Approx(1.3).margin(2e-3));
    }
}

TEST_CASE("linewidth window validation") {
    SpectrumPair flat;
    for (int i = 0; i < 30; ++i) {
        flat.off.wavelength_nm.push_back(634.0 + 0.25 * i);
        flat.on.wavelength_nm.push_back(634.0 + 0.25 * i);
        flat.off.counts.push_back(50.0);
        flat.on.counts.push_back(50.0);
    }
    REQUIRE_THROWS_AS(linewidth_contrast(flat, {634.5, 640.5}, 1), ModelError);
    REQUIRE_THROWS_AS(linewidth_contrast(flat, {634.5, 635.6}, 1), ValidationError);

    SpectrumPair dark = flat;
    for (auto& v : dark.off.counts) v = -10.0;
    dark.off.counts[10] = -5.0;  // non-flat but summing negative
    REQUIRE_THROWS_AS(linewidth_contrast(dark, {634.5, 640.5}, 1), ModelError);
}

TEST_CASE("alpha uncertainty reflects the noise level") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss(0.0, 5.0);
    SpectrumPair p;
    p.off = lorentz(637.0, 0.125, 1000.0, 0.0, 634.0, 640.0, 0.01);
    p.on = lorentz(637.0, 0.98 * 0.125, 1000.0, 0.0, 634.0, 640.0, 0.01);
    for (auto& v : p.off.counts) v += gauss(rng);
    for (auto& v : p.on.counts) v += gauss(rng);

    const Interval window{635.5, 638.5};
    const auto fit = linewidth_contrast(p, window, 11);
    const double sd = linewidth_alpha_sd(p, window, fit);
    REQUIRE(std::isfinite(sd));
    REQUIRE(sd > 0.0);
    REQUIRE(sd < 0.01);
    REQUIRE(std::abs(fit.alpha + 0.02) < 5.0 * sd);
}

TEST_CASE("lorentzian fit recovers exact parameters") {
    const auto s = lorentz(637.2, 0.15, 800.0, 25.0, 635.0, 639.0, 0.01);
    const auto fit = lorentzian_fit(s, {635.5, 638.5});
    REQUIRE(fit.center == Catch::Approx(637.2).margin(1e-3));
    REQUIRE(fit.fwhm == Catch::Approx(0.3).margin(2e-3));
    REQUIRE(fit.amplitude == Catch::Approx(800.0).margin(1.0));
    REQUIRE(fit.offset == Catch::Approx(25.0).margin(0.5));
    REQUIRE(fit.residual_rms < 0.1);

    Spectrum tiny;
    for (int i = 0; i < 6; ++i) {
        tiny.wavelength_nm.push_back(637.0 + i);
        tiny.counts.push_back(1.0 + i);
    }
    REQUIRE_THROWS_AS(lorentzian_fit(tiny, {636.5, 643.5}), ValidationError);
}

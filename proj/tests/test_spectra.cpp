#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nvsep/spectra.hpp"

using namespace nvsep;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    return fs::temp_directory_path() / (std::string("nvsep_spectra_") + name);
}

Spectrum ramp(std::size_t n, double start = 600.0, double step = 0.5) {
    Spectrum s;
    for (std::size_t i = 0; i < n; ++i) {
        s.wavelength_nm.push_back(start + step * static_cast<double>(i));
        s.counts.push_back(10.0 + 3.0 * static_cast<double>(i));
    }
    return s;
}

}  // namespace

TEST_CASE("csv round trip preserves values bit for bit") {
    Spectrum s = ramp(17);
    s.counts[3] = 1.0 / 3.0;
    s.counts[4] = 1e-17;
    s.counts[5] = -42.25;
    const auto path = temp_file("roundtrip.csv");
    save_spectrum(path, s);
    const Spectrum r = load_spectrum(path);
    REQUIRE(r.size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        REQUIRE(r.wavelength_nm[i] == s.wavelength_nm[i]);
        REQUIRE(r.counts[i] == s.counts[i]);
    }
    fs::remove(path);
}

TEST_CASE("loader rejects malformed files with the offending row named") {
    const auto path = temp_file("bad.csv");

    SECTION("wrong header") {
        std::ofstream(path) << "lambda,counts\n600,1\n601,2\n";
        REQUIRE_THROWS_AS(load_spectrum(path), ParseError);
    }
    SECTION("non numeric field") {
        std::ofstream(path) << "wavelength_nm,counts\n600,1\n601,two\n";
        try {
            load_spectrum(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            REQUIRE(std::string(e.what()).find("row 2") != std::string::npos);
        }
    }
    SECTION("wrong field count") {
        std::ofstream(path) << "wavelength_nm,counts\n600,1,7\n";
        REQUIRE_THROWS_AS(load_spectrum(path), ParseError);
    }
    SECTION("trailing junk on a number") {
        std::ofstream(path) << "wavelength_nm,counts\n600,1x\n";
        REQUIRE_THROWS_AS(load_spectrum(path), ParseError);
    }
    SECTION("non increasing wavelengths") {
        std::ofstream(path) << "wavelength_nm,counts\n600,1\n600,2\n";
        REQUIRE_THROWS_AS(load_spectrum(path), ValidationError);
    }
    SECTION("single point") {
        std::ofstream(path) << "wavelength_nm,counts\n600,1\n";
        REQUIRE_THROWS_AS(load_spectrum(path), ValidationError);
    }
    fs::remove(path);
}

TEST_CASE("pair validation requires identical grids") {
    SpectrumPair p;
    p.off = ramp(10);
    p.on = ramp(10);
    REQUIRE_NOTHROW(validate_pair(p));
    p.on.wavelength_nm[4] += 1e-12;
    REQUIRE_THROWS_AS(validate_pair(p), ValidationError);
    p.on = ramp(9);
    REQUIRE_THROWS_AS(validate_pair(p), ValidationError);
}

TEST_CASE("zone bookkeeping") {
    const Spectrum s = ramp(21);  // 600 .. 610
    const auto idx = zone_indices(s, {602.0, 604.0});
    REQUIRE(idx.size() == 5);  // 602, 602.5, ..., 604 inclusive
    REQUIRE(s.wavelength_nm[idx.front()] == 602.0);
    REQUIRE(s.wavelength_nm[idx.back()] == 604.0);

    ZoneSet z{{600.0, 602.0}, {603.0, 605.0}, {606.0, 608.0}};
    REQUIRE_NOTHROW(validate_zones(z, s));

    ZoneSet overlapping{{600.0, 603.5}, {603.0, 605.0}, {606.0, 608.0}};
    REQUIRE_THROWS_AS(validate_zones(overlapping, s), ValidationError);

    ZoneSet outside{{600.0, 602.0}, {603.0, 605.0}, {606.0, 615.0}};
    REQUIRE_THROWS_AS(validate_zones(outside, s), ValidationError);

    ZoneSet sparse{{600.0, 600.5}, {603.0, 605.0}, {606.0, 608.0}};
    REQUIRE_THROWS_AS(validate_zones(sparse, s), ValidationError);
}

TEST_CASE("trapezoid integration is exact for linear data") {
    const Spectrum s = ramp(21);  // counts = 10 + 3 i, wavelength 600 + 0.5 i
    // counts(lambda) = 10 + 6 (lambda - 600); integral over [lo, hi] analytic.
    const auto analytic = [](double lo, double hi) {
        auto F = [](double x) {
            const double u = x - 600.0;
            return 10.0 * u + 3.0 * u * u;
        };
        return F(hi) - F(lo);
    };
    REQUIRE(integrate_intensity(s, {600.0, 610.0}) ==
            Catch::Approx(analytic(600.0, 610.0)).epsilon(1e-14));
    // partial cells on both ends
    REQUIRE(integrate_intensity(s, {600.2, 609.3}) ==
            Catch::Approx(analytic(600.2, 609.3)).epsilon(1e-12));
    // interval sticking out of the grid is clipped
    REQUIRE(integrate_intensity(s, {590.0, 605.0}) ==
            Catch::Approx(analytic(600.0, 605.0)).epsilon(1e-12));
    REQUIRE_THROWS_AS(integrate_intensity(s, {620.0, 630.0}), ValidationError);
    REQUIRE_THROWS_AS(integrate_intensity(s, {605.0, 605.0}), ValidationError);
}

TEST_CASE("pair loader attaches metadata") {
    const auto off_p = temp_file("pair_off.csv");
    const auto on_p = temp_file("pair_on.csv");
    save_spectrum(off_p, ramp(12));
    save_spectrum(on_p, ramp(12));
    AcquisitionMeta meta;
    meta.temperature_K = 4.0;
    meta.wavelength_nm = 515.0;
    meta.power_uW = 20.0;
    const auto pair = load_spectrum_pair(off_p, on_p, 250.0, meta);
    REQUIRE(pair.field_mT == 250.0);
    REQUIRE(pair.meta.temperature_K == 4.0);
    REQUIRE(pair.meta.wavelength_nm == 515.0);
    REQUIRE(pair.meta.power_uW == 20.0);
    fs::remove(off_p);
    fs::remove(on_p);
}

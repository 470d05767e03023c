#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nvsep/common.hpp"

namespace nvsep {

// One measured emission spectrum on a strictly increasing wavelength grid.
struct Spectrum {
    std::vector<double> wavelength_nm;
    std::vector<double> counts;

    std::size_t size() const { return wavelength_nm.size(); }
};

inline void validate_spectrum(const Spectrum& s, const std::string& label = "spectrum") {
    if (s.wavelength_nm.size() != s.counts.size())
        throw ValidationError(label + ": wavelength/count length mismatch");
    if (s.size() < 2)
        throw ValidationError(label + ": need at least 2 samples");
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!std::isfinite(s.wavelength_nm[i]) || !std::isfinite(s.counts[i]))
            throw ValidationError(label + ": non-finite value at sample " +
                                  std::to_string(i));
        if (i > 0 && !(s.wavelength_nm[i] > s.wavelength_nm[i - 1]))
            throw ValidationError(label + ": wavelengths not strictly increasing at sample " +
                                  std::to_string(i));
    }
}

struct AcquisitionMeta {
    double temperature_K = 295.0;
    double wavelength_nm = 532.0;  // excitation
    double power_uW = 10.0;
};

// Field-off / field-on pair sharing one wavelength grid bit for bit.
struct SpectrumPair {
    Spectrum off;
    Spectrum on;
    double field_mT = 0.0;
    AcquisitionMeta meta;
};

inline void validate_pair(const SpectrumPair& p) {
    validate_spectrum(p.off, "off spectrum");
    validate_spectrum(p.on, "on spectrum");
    if (p.off.size() != p.on.size())
        throw ValidationError("spectrum pair: grid sizes differ (" +
                              std::to_string(p.off.size()) + " vs " +
                              std::to_string(p.on.size()) + ")");
    for (std::size_t i = 0; i < p.off.size(); ++i)
        if (p.off.wavelength_nm[i] != p.on.wavelength_nm[i])
            throw ValidationError("spectrum pair: grids differ at sample " +
                                  std::to_string(i));
    if (p.field_mT < 0.0)
        throw ValidationError("spectrum pair: field_mT must be >= 0");
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

// Analysis zones. bg sees only background, zpl0 brackets the NV0 zero-phonon
// line, zpl_minus brackets the NV- one.
struct ZoneSet {
    Interval bg;
    Interval zpl0;
    Interval zpl_minus;
};

inline std::vector<std::size_t> zone_indices(const Spectrum& s, const Interval& zone) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (zone.contains(s.wavelength_nm[i])) idx.push_back(i);
    return idx;
}

inline void validate_zones(const ZoneSet& z, const Spectrum& s) {
    struct Named {
        const char* name;
        const Interval* iv;
    };
    const Named zones[] = {{"bg", &z.bg}, {"zpl0", &z.zpl0}, {"zpl_minus", &z.zpl_minus}};
    for (const auto& a : zones) {
        if (!(a.iv->hi > a.iv->lo))
            throw ValidationError(std::string("zone ") + a.name + ": empty interval");
        if (a.iv->lo < s.wavelength_nm.front() || a.iv->hi > s.wavelength_nm.back())
            throw ValidationError(std::string("zone ") + a.name +
                                  ": outside the spectrum span");
        if (zone_indices(s, *a.iv).size() < 5)
            throw ValidationError(std::string("zone ") + a.name +
                                  ": fewer than 5 grid points");
    }
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j)
            if (zones[i].iv->lo < zones[j].iv->hi && zones[j].iv->lo < zones[i].iv->hi)
                throw ValidationError(std::string("zones ") + zones[i].name + " and " +
                                      zones[j].name + " overlap");
}

// Shortest text that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// CSV layout: header line "wavelength_nm,counts", one sample per row.
inline Spectrum load_spectrum(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("load_spectrum: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "wavelength_nm,counts")
        throw ParseError(path.string() + ": expected header 'wavelength_nm,counts', got '" +
                         line + "'");

    Spectrum s;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
            throw ParseError(path.string() + ": row " + std::to_string(row) +
                             ": expected exactly 2 fields");
        try {
            std::size_t used = 0;
            const double w = std::stod(line.substr(0, comma), &used);
            if (used != comma) throw std::invalid_argument("trailing junk");
            const std::string cfield = line.substr(comma + 1);
            const double c = std::stod(cfield, &used);
            if (used != cfield.size()) throw std::invalid_argument("trailing junk");
            if (!std::isfinite(w) || !std::isfinite(c))
                throw std::invalid_argument("non-finite");
            s.wavelength_nm.push_back(w);
            s.counts.push_back(c);
        } catch (const std::exception&) {
            throw ParseError(path.string() + ": row " + std::to_string(row) +
                             ": invalid numeric value");
        }
    }
    validate_spectrum(s, path.string());
    return s;
}

inline void save_spectrum(const std::filesystem::path& path, const Spectrum& s) {
    validate_spectrum(s, "save_spectrum");
    std::ofstream out(path);
    if (!out)
        throw Error("save_spectrum: cannot open " + path.string() + " for writing");
    out << "wavelength_nm,counts\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        out << format_double(s.wavelength_nm[i]) << ',' << format_double(s.counts[i])
            << '\n';
    if (!out)
        throw Error("save_spectrum: write failed for " + path.string());
}

inline SpectrumPair load_spectrum_pair(const std::filesystem::path& off_path,
                                       const std::filesystem::path& on_path,
                                       double field_mT,
                                       const AcquisitionMeta& meta = {}) {
    SpectrumPair p;
    p.off = load_spectrum(off_path);
    p.on = load_spectrum(on_path);
    p.field_mT = field_mT;
    p.meta = meta;
    validate_pair(p);
    return p;
}

// Trapezoidal integral of counts over `iv`, treating the spectrum as
// piecewise linear. Partial edge cells are clipped by interpolation.
inline double integrate_intensity(const Spectrum& s, const Interval& iv) {
    validate_spectrum(s, "integrate_intensity");
    if (!(iv.hi > iv.lo))
        throw ValidationError("integrate_intensity: empty interval");
    const double lo = std::max(iv.lo, s.wavelength_nm.front());
    const double hi = std::min(iv.hi, s.wavelength_nm.back());
    if (!(hi > lo))
        throw ValidationError("integrate_intensity: interval does not overlap the spectrum");

    auto value_at = [&](std::size_t cell, double x) {
        const double x0 = s.wavelength_nm[cell], x1 = s.wavelength_nm[cell + 1];
        const double t = (x - x0) / (x1 - x0);
        return s.counts[cell] * (1.0 - t) + s.counts[cell + 1] * t;
    };

    double total = 0.0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double a = std::max(lo, s.wavelength_nm[i]);
        const double b = std::min(hi, s.wavelength_nm[i + 1]);
        if (b <= a) continue;
        total += 0.5 * (value_at(i, a) + value_at(i, b)) * (b - a);
    }
    return total;
}

}  // namespace nvsep

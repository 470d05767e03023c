#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "nvsep/common.hpp"
#include "nvsep/spectra.hpp"

namespace nvsep {

struct GaussianBand {
    double center_nm = 0.0;
    double sigma_nm = 1.0;
    double amplitude = 0.0;
};

// Lorentzian zero-phonon line plus Gaussian phonon sidebands.
struct ComponentModel {
    double zpl_center_nm = 0.0;
    double zpl_fwhm_nm = 1.0;
    double zpl_amplitude = 0.0;
    std::vector<GaussianBand> sidebands;

    double evaluate(double lambda_nm, double width_scale = 1.0) const {
        const double g = 0.5 * zpl_fwhm_nm * width_scale;
        const double d = lambda_nm - zpl_center_nm;
        double v = zpl_amplitude * g * g / (d * d + g * g);
        for (const auto& band : sidebands) {
            const double u = (lambda_nm - band.center_nm) / band.sigma_nm;
            v += band.amplitude * std::exp(-0.5 * u * u);
        }
        return v;
    }
};

enum class NoiseKind { gaussian, poisson };

// Everything needed to fabricate one field-off/field-on pair, with the truth
// carried alongside so recovery can be scored.
struct SynthTruth {
    double epsilon = 0.15;
    double delta = -0.03;
    double alpha = 0.0;      // on-spectrum NV- ZPL width factor is (1 + alpha)
    double background = 120.0;
    double sigma0 = 0.0;     // off-spectrum Gaussian noise sd
    double sigmaB = 0.0;     // on-spectrum Gaussian noise sd
    NoiseKind noise = NoiseKind::gaussian;
    ComponentModel nv_minus;
    ComponentModel nv_zero;
    std::vector<double> grid_nm;
};

inline ComponentModel default_nv_minus_component() {
    ComponentModel m;
    m.zpl_center_nm = 637.0;
    m.zpl_fwhm_nm = 1.2;
    m.zpl_amplitude = 1000.0;
    m.sidebands = {{660.0, 12.0, 350.0},
                   {682.0, 16.0, 420.0},
                   {722.0, 24.0, 300.0},
                   {760.0, 30.0, 120.0}};
    return m;
}

inline ComponentModel default_nv_zero_component() {
    ComponentModel m;
    m.zpl_center_nm = 575.0;
    m.zpl_fwhm_nm = 1.4;
    m.zpl_amplitude = 450.0;
    m.sidebands = {{600.0, 14.0, 260.0},
                   {625.0, 20.0, 300.0},
                   {660.0, 28.0, 160.0}};
    return m;
}

inline std::vector<double> default_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 1040; ++i) g.push_back(540.0 + 0.25 * i);
    return g;
}

inline SynthTruth default_truth() {
    SynthTruth t;
    t.nv_minus = default_nv_minus_component();
    t.nv_zero = default_nv_zero_component();
    t.grid_nm = default_grid();
    const double peak =
        t.nv_minus.evaluate(637.0) + t.nv_zero.evaluate(637.0) + t.background;
    t.sigma0 = t.sigmaB = 0.01 * peak;
    return t;
}

inline void validate_truth(const SynthTruth& t) {
    if (t.grid_nm.size() < 2)
        throw ValidationError("SynthTruth: grid needs at least 2 points");
    for (std::size_t i = 1; i < t.grid_nm.size(); ++i)
        if (!(t.grid_nm[i] > t.grid_nm[i - 1]))
            throw ValidationError("SynthTruth: grid must be strictly increasing");
    if (t.epsilon >= 1.0 || t.delta >= 1.0)
        throw ValidationError("SynthTruth: contrasts must stay below 1");
    if (!(1.0 + t.alpha > 0.0))
        throw ValidationError("SynthTruth: 1 + alpha must be positive");
    if (t.sigma0 < 0.0 || t.sigmaB < 0.0)
        throw ValidationError("SynthTruth: noise sds must be >= 0");
    if (t.nv_minus.zpl_fwhm_nm <= 0.0 || t.nv_zero.zpl_fwhm_nm <= 0.0)
        throw ValidationError("SynthTruth: ZPL widths must be positive");
}

struct SynthPair {
    SpectrumPair pair;
    Spectrum i_minus;  // noiseless field-off components
    Spectrum i_zero;
};

// Off spectrum is I- + I0 + C plus noise; on spectrum scales the species by
// (1 - epsilon) and (1 - delta) and, when alpha != 0, regenerates the NV-
// ZPL with its width multiplied by (1 + alpha). Identical seeds reproduce
// the pair bit for bit; the off and on noise streams are independent draws
// from one generator.
inline SynthPair generate_pair(const SynthTruth& t, std::uint64_t seed) {
    validate_truth(t);
    std::mt19937_64 rng(seed);

    SynthPair out;
    const std::size_t n = t.grid_nm.size();
    out.i_minus.wavelength_nm = t.grid_nm;
    out.i_zero.wavelength_nm = t.grid_nm;
    out.i_minus.counts.resize(n);
    out.i_zero.counts.resize(n);
    out.pair.off.wavelength_nm = t.grid_nm;
    out.pair.on.wavelength_nm = t.grid_nm;
    out.pair.off.counts.resize(n);
    out.pair.on.counts.resize(n);
    out.pair.field_mT = 100.0;

    const double on_width_scale = 1.0 + t.alpha;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double lam = t.grid_nm[i];
        const double minus_off = t.nv_minus.evaluate(lam);
        const double zero_off = t.nv_zero.evaluate(lam);
        const double minus_on = t.alpha == 0.0
                                    ? minus_off
                                    : t.nv_minus.evaluate(lam, on_width_scale);
        out.i_minus.counts[i] = minus_off;
        out.i_zero.counts[i] = zero_off;

        const double mean_off = minus_off + zero_off + t.background;
        const double mean_on = (1.0 - t.epsilon) * minus_on +
                               (1.0 - t.delta) * zero_off + t.background;
        if (t.noise == NoiseKind::gaussian) {
            const double e0 = t.sigma0 > 0.0 ? t.sigma0 * gauss(rng) : 0.0;
            const double eb = t.sigmaB > 0.0 ? t.sigmaB * gauss(rng) : 0.0;
            out.pair.off.counts[i] = mean_off + e0;
            out.pair.on.counts[i] = mean_on + eb;
        } else {
            if (mean_off < 0.0 || mean_on < 0.0)
                throw ValidationError("generate_pair: Poisson noise needs non-negative "
                                      "mean counts");
            auto draw = [&](double mean) {
                if (mean == 0.0) return 0.0;
                std::poisson_distribution<long long> p(mean);
                return static_cast<double>(p(rng));
            };
            out.pair.off.counts[i] = draw(mean_off);
            out.pair.on.counts[i] = draw(mean_on);
        }
    }
    return out;
}

}  // namespace nvsep

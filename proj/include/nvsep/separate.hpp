#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "nvsep/common.hpp"
#include "nvsep/numerics.hpp"
#include "nvsep/spectra.hpp"

namespace nvsep {

struct SeparatedSpectra {
    Spectrum i_minus;
    Spectrum i_zero;
    double epsilon_used = 0.0;
    double delta_used = 0.0;
    double c_used = 0.0;
};

// Pointwise inversion of the two-species mixing model
//   I0 = I- + I0' + C,  IB = (1 - eps) I- + (1 - delta) I0' + C.
// The determinant of that 2x2 system is (eps - delta); below
// `min_separation` the inversion is refused rather than regularized.
inline SeparatedSpectra unmix(const SpectrumPair& pair, double epsilon, double delta,
                              double background, double min_separation = 1e-3) {
    validate_pair(pair);
    if (!(min_separation > 0.0))
        throw ValidationError("unmix: min_separation must be positive");
    const double sep = epsilon - delta;
    if (std::abs(sep) < min_separation)
        throw ModelError("unmix: |epsilon - delta| = " + format_double(std::abs(sep)) +
                         " is below the conditioning floor " +
                         format_double(min_separation));

    SeparatedSpectra out;
    out.epsilon_used = epsilon;
    out.delta_used = delta;
    out.c_used = background;
    out.i_minus.wavelength_nm = pair.off.wavelength_nm;
    out.i_zero.wavelength_nm = pair.off.wavelength_nm;
    out.i_minus.counts.resize(pair.off.size());
    out.i_zero.counts.resize(pair.off.size());
    for (std::size_t i = 0; i < pair.off.size(); ++i) {
        const double d0 = pair.off.counts[i] - background;
        const double db = pair.on.counts[i] - background;
        out.i_minus.counts[i] = ((1.0 - delta) * d0 - db) / sep;
        out.i_zero.counts[i] = (-(1.0 - epsilon) * d0 + db) / sep;
    }
    return out;
}

// Residual peak structure relative to the local linear baseline, in units of
// the baseline scatter. Values of a few are plain noise; large values mean
// the species assignment leaked line shape into this spectrum.
inline double peak_leakage(const Spectrum& s, const Interval& window) {
    validate_spectrum(s, "peak_leakage");
    const auto idx = zone_indices(s, window);
    if (idx.size() < 9)
        throw ValidationError("peak_leakage: window needs at least 9 grid points");

    // Fit against wavelengths centered on the window so the normal
    // equations stay well conditioned; at raw lambda ~ 600 the moment
    // matrix loses ten digits to cancellation.
    double x0 = 0.0;
    for (std::size_t i : idx) x0 += s.wavelength_nm[i];
    x0 /= static_cast<double>(idx.size());

    const std::size_t third = idx.size() / 3;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n_base = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (k >= third && k < idx.size() - third) continue;
        const double x = s.wavelength_nm[idx[k]] - x0;
        const double y = s.counts[idx[k]];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n_base;
    }
    const double det = n_base * sxx - sx * sx;
    if (!(std::abs(det) > 0.0))
        throw ModelError("peak_leakage: degenerate baseline fit");
    const double slope = (n_base * sxy - sx * sy) / det;
    const double icept = (sy - slope * sx) / n_base;

    double base_rss = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (k >= third && k < idx.size() - third) continue;
        const double r =
            s.counts[idx[k]] - (icept + slope * (s.wavelength_nm[idx[k]] - x0));
        base_rss += r * r;
    }
    double scale = std::sqrt(base_rss / static_cast<double>(n_base));
    double max_abs = 0.0;
    for (std::size_t k = third; k < idx.size() - third; ++k) {
        const double r =
            s.counts[idx[k]] - (icept + slope * (s.wavelength_nm[idx[k]] - x0));
        max_abs = std::max(max_abs, std::abs(r));
    }
    // Floor the scatter estimate so data the baseline fits to roundoff
    // (zero or fp-dust residuals) reads as no leakage instead of a ratio
    // of two rounding errors.
    double amp = 0.0;
    for (std::size_t i : idx) amp = std::max(amp, std::abs(s.counts[i]));
    scale = std::max(scale, std::max(amp * 1e-12, 1e-300));
    return max_abs / scale;
}

// Fractional line-width change under field. Convention: the on-spectrum
// feature width equals (1 + alpha) times the off-spectrum width, so a line
// that narrows under field yields negative alpha.
struct LinewidthFit {
    double alpha = 0.0;
    double shift = 0.0;
    double vscale = 1.0;
    double residual_rms = 0.0;
};

namespace detail {

// Shared setup of the width fit: off-spectrum window indices, the
// intensity-weighted centroid, and a spline through the on-spectrum points.
struct LinewidthSetup {
    std::vector<std::size_t> idx;
    double center;
    CubicSpline spline;

    double residual(const SpectrumPair& pair, std::size_t i, double alpha,
                    double shift, double vscale) const {
        const double lam = center + (1.0 + alpha) *
                                    (pair.off.wavelength_nm[i] - center - shift);
        return vscale * pair.off.counts[i] - spline(lam);
    }
};

inline LinewidthSetup linewidth_setup(const SpectrumPair& pair, const Interval& window,
                                      const std::string& who) {
    validate_pair(pair);
    auto idx = zone_indices(pair.off, window);
    if (idx.size() < 8)
        throw ValidationError(who + ": window needs at least 8 grid points");

    double lo_val = pair.off.counts[idx.front()], hi_val = lo_val;
    double wsum = 0.0, wlam = 0.0;
    for (std::size_t i : idx) {
        const double v = pair.off.counts[i];
        lo_val = std::min(lo_val, v);
        hi_val = std::max(hi_val, v);
        wsum += v;
        wlam += v * pair.off.wavelength_nm[i];
    }
    const double span = hi_val - lo_val;
    if (!(span > 0.0) || span <= 1e-9 * std::max(std::abs(hi_val), 1.0))
        throw ModelError(who + ": window is flat, no feature to fit");
    if (!(wsum > 0.0))
        throw ModelError(who + ": non-positive total intensity in window");
    const double center = wlam / wsum;

    // Spline knots extend past the window so small stretches and shifts stay
    // on interpolated ground.
    const double margin = 0.5 * window.width() + 0.5;
    const Interval wide{window.lo - margin, window.hi + margin};
    std::vector<double> kx, ky;
    for (std::size_t i = 0; i < pair.on.size(); ++i) {
        if (wide.contains(pair.on.wavelength_nm[i])) {
            kx.push_back(pair.on.wavelength_nm[i]);
            ky.push_back(pair.on.counts[i]);
        }
    }
    if (kx.size() < 4)
        throw ValidationError(who + ": too few on-spectrum knots around the window");
    return {std::move(idx), center, CubicSpline(kx, ky)};
}

}  // namespace detail

// Maps the off-spectrum samples through the coordinate stretch
// lambda -> c + (1 + alpha)(lambda - c - shift) about the intensity-weighted
// peak centroid c, scales them by vscale, and least-squares matches them to
// a natural cubic spline through the on-spectrum data. Minimized with
// Nelder-Mead from (0, 0, 1) plus seeded restarts. The shift applies to the
// off-spectrum grid, so a feature that moves red under field fits a negative
// shift.
inline LinewidthFit linewidth_contrast(const SpectrumPair& pair, const Interval& window,
                                       std::uint64_t seed) {
    const auto setup = detail::linewidth_setup(pair, window, "linewidth_contrast");
    const auto& idx = setup.idx;

    const auto objective = [&](const std::vector<double>& p) {
        const double alpha = p[0], shift = p[1], vscale = p[2];
        if (1.0 + alpha < 0.05 || vscale <= 0.0)
            return 1e100 * (1.0 + std::abs(alpha) + std::abs(vscale));
        double ss = 0.0;
        for (std::size_t i : idx) {
            const double r = setup.residual(pair, i, alpha, shift, vscale);
            ss += r * r;
        }
        return ss;
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    NelderMeadResult best;
    bool have = false;
    const auto attempt_from = [&](std::vector<double> start) {
        const auto res = nelder_mead(objective, start, {0.004, 0.01, 0.02}, 1e-12, 4000);
        if (!have || res.value < best.value) {
            best = res;
            have = true;
        }
    };

    // Interpolating a noisy spectrum makes the objective jagged in alpha,
    // with noise-made local minima a plain descent gets trapped in. A
    // coarse profile scan (best shift and vscale at each trial alpha)
    // locates the global basin first; full Nelder-Mead then polishes from
    // the spec start, the two best scan seeds, and seeded perturbations.
    double scan_best_alpha = 0.0, scan_best_val = std::numeric_limits<double>::infinity();
    double scan_second_alpha = 0.0, scan_second_val = scan_best_val;
    for (int k = -15; k <= 15; ++k) {
        const double a = 0.008 * k;
        const auto inner = [&](const std::vector<double>& q) {
            return objective({a, q[0], q[1]});
        };
        const auto res = nelder_mead(inner, {0.0, 1.0}, {0.01, 0.02}, 1e-10, 800);
        if (res.value < scan_best_val) {
            scan_second_val = scan_best_val;
            scan_second_alpha = scan_best_alpha;
            scan_best_val = res.value;
            scan_best_alpha = a;
        } else if (res.value < scan_second_val) {
            scan_second_val = res.value;
            scan_second_alpha = a;
        }
    }

    attempt_from({0.0, 0.0, 1.0});
    attempt_from({scan_best_alpha, 0.0, 1.0});
    attempt_from({scan_second_alpha, 0.0, 1.0});
    for (int extra = 0; extra < 2; ++extra) {
        std::vector<double> start = best.x;
        start[0] += 0.004 * gauss(rng);
        start[1] += 0.01 * gauss(rng);
        start[2] += 0.02 * gauss(rng);
        if (1.0 + start[0] < 0.05) start[0] = -0.5;
        if (start[2] <= 0.0) start[2] = 0.1;
        attempt_from(std::move(start));
    }
    if (!best.converged)
        throw ModelError("linewidth_contrast: optimizer failed to converge within the "
                         "restart budget");

    LinewidthFit fit;
    fit.alpha = best.x[0];
    fit.shift = best.x[1];
    fit.vscale = best.x[2];
    fit.residual_rms = std::sqrt(best.value / static_cast<double>(idx.size()));
    return fit;
}

// One-sigma uncertainty of alpha from the Gauss-Newton covariance
// s^2 (J^T J)^-1 of the residual vector at the fitted point, with the
// Jacobian taken by central differences. NaN when the window is too small
// or the normal matrix is degenerate.
inline double linewidth_alpha_sd(const SpectrumPair& pair, const Interval& window,
                                 const LinewidthFit& fit) {
    const auto setup = detail::linewidth_setup(pair, window, "linewidth_alpha_sd");
    const std::size_t n = setup.idx.size();
    if (n <= 3) return std::numeric_limits<double>::quiet_NaN();

    const std::array<double, 3> p{fit.alpha, fit.shift, fit.vscale};
    std::array<double, 3> h{};
    for (int j = 0; j < 3; ++j) h[j] = 1e-6 * std::max(1.0, std::abs(p[j]));

    std::vector<std::array<double, 3>> jac(n);
    double ssr = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = setup.idx[k];
        const double r0 = setup.residual(pair, i, p[0], p[1], p[2]);
        ssr += r0 * r0;
        for (int j = 0; j < 3; ++j) {
            auto q = p;
            q[j] = p[j] + h[j];
            const double rp = setup.residual(pair, i, q[0], q[1], q[2]);
            q[j] = p[j] - h[j];
            const double rm = setup.residual(pair, i, q[0], q[1], q[2]);
            jac[k][j] = (rp - rm) / (2.0 * h[j]);
        }
    }

    std::array<std::array<double, 3>, 3> ata{};
    for (std::size_t k = 0; k < n; ++k)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) ata[a][b] += jac[k][a] * jac[k][b];

    const double s2 = ssr / static_cast<double>(n - 3);
    try {
        const auto col = solve_dense<3>(ata, {1.0, 0.0, 0.0});
        const double var = s2 * col[0];
        return var >= 0.0 ? std::sqrt(var) : std::numeric_limits<double>::quiet_NaN();
    } catch (const ModelError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

// Plain four-parameter Lorentzian least-squares fit, offered as a width
// diagnostic next to the transform-based estimate.
struct LorentzianFit {
    double center = 0.0;
    double fwhm = 0.0;
    double amplitude = 0.0;
    double offset = 0.0;
    double residual_rms = 0.0;
};

inline LorentzianFit lorentzian_fit(const Spectrum& s, const Interval& window) {
    validate_spectrum(s, "lorentzian_fit");
    const auto idx = zone_indices(s, window);
    if (idx.size() < 8)
        throw ValidationError("lorentzian_fit: window needs at least 8 grid points");

    double lo_val = s.counts[idx.front()], hi_val = lo_val;
    double peak_lam = s.wavelength_nm[idx.front()];
    for (std::size_t i : idx) {
        if (s.counts[i] > hi_val) {
            hi_val = s.counts[i];
            peak_lam = s.wavelength_nm[i];
        }
        lo_val = std::min(lo_val, s.counts[i]);
    }
    if (!(hi_val > lo_val))
        throw ModelError("lorentzian_fit: window is flat");

    const auto objective = [&](const std::vector<double>& p) {
        const double c = p[0], g = p[1], a = p[2], off = p[3];
        if (g <= 0.0) return 1e100 * (1.0 + std::abs(g));
        double ss = 0.0;
        for (std::size_t i : idx) {
            const double d = s.wavelength_nm[i] - c;
            const double model = off + a * g * g / (d * d + g * g);
            const double r = s.counts[i] - model;
            ss += r * r;
        }
        return ss;
    };

    const double w0 = window.width() / 8.0;
    const auto res = nelder_mead(objective, {peak_lam, w0, hi_val - lo_val, lo_val},
                                 {0.2 * w0, 0.5 * w0, 0.2 * (hi_val - lo_val),
                                  0.1 * (hi_val - lo_val) + 1e-6},
                                 1e-12, 4000);
    LorentzianFit fit;
    fit.center = res.x[0];
    fit.fwhm = 2.0 * res.x[1];
    fit.amplitude = res.x[2];
    fit.offset = res.x[3];
    fit.residual_rms = std::sqrt(res.value / static_cast<double>(idx.size()));
    return fit;
}

}  // namespace nvsep

#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "nvsep/common.hpp"
#include "nvsep/numerics.hpp"
#include "nvsep/spectra.hpp"

namespace nvsep {

struct InferenceError : Error {
    using Error::Error;
};

// Posterior for the shared constant background C: a Normal over the mean of
// the pooled background samples, plus the per-spectrum noise scales the
// likelihoods need.
struct BackgroundPosterior {
    double mean = 0.0;
    double sd = 0.0;      // sample sd / sqrt(2N), N points per spectrum
    double sigma0 = 0.0;  // off-spectrum background sample sd
    double sigmaB = 0.0;  // on-spectrum background sample sd
};

namespace detail {

inline double sample_sd(const std::vector<double>& x, double mean) {
    if (x.size() < 2) return 0.0;
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

}  // namespace detail

inline BackgroundPosterior background_posterior(const SpectrumPair& pair,
                                                const Interval& bg_zone) {
    validate_pair(pair);
    const auto idx = zone_indices(pair.off, bg_zone);
    if (idx.size() < 5)
        throw ValidationError("background_posterior: background zone has " +
                              std::to_string(idx.size()) + " points, need >= 5");

    std::vector<double> off, on, pooled;
    for (std::size_t i : idx) {
        off.push_back(pair.off.counts[i]);
        on.push_back(pair.on.counts[i]);
        pooled.push_back(pair.off.counts[i]);
        pooled.push_back(pair.on.counts[i]);
    }
    double mean = 0.0;
    for (double v : pooled) mean += v;
    mean /= static_cast<double>(pooled.size());

    double off_mean = 0.0, on_mean = 0.0;
    for (double v : off) off_mean += v;
    for (double v : on) on_mean += v;
    off_mean /= static_cast<double>(off.size());
    on_mean /= static_cast<double>(on.size());

    BackgroundPosterior bg;
    bg.mean = mean;
    bg.sd = detail::sample_sd(pooled, mean) /
            std::sqrt(static_cast<double>(pooled.size()));
    bg.sigma0 = detail::sample_sd(off, off_mean);
    bg.sigmaB = detail::sample_sd(on, on_mean);
    return bg;
}

// Log density of one NV0-zone point. The residual
//   r = (1 - delta) I0 - IB + delta C
// vanishes in expectation when delta and C are right; its variance carries
// the (1 - delta)^2 factor from scaling the off-spectrum noise, so the
// normalization term matters and is included.
inline double likelihood_zpl0(double i0, double ib, double delta, double c,
                              double sigma0, double sigmaB) {
    const double var = (1.0 - delta) * (1.0 - delta) * sigma0 * sigma0 + sigmaB * sigmaB;
    if (!(var > 0.0))
        throw ValidationError("likelihood_zpl0: zero residual variance");
    const double r = (1.0 - delta) * i0 - ib + delta * c;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return -0.5 * r * r / var - 0.5 * std::log(two_pi * var);
}

// Log density of one NV--zone point. The NV0 contribution under the NV- line
// is modeled as locally linear, m (lambda - lambda_bar) + b, and enters the
// residual scaled by (epsilon - delta):
//   r = (1 - eps) I0 - IB + (eps - delta)(m (lambda - lambda_bar) + b) + eps C.
inline double likelihood_zplminus(double i0, double ib, double eps, double delta,
                                  double m, double b, double lambda, double lambda_bar,
                                  double c, double sigma0, double sigmaB) {
    const double var = (1.0 - eps) * (1.0 - eps) * sigma0 * sigma0 + sigmaB * sigmaB;
    if (!(var > 0.0))
        throw ValidationError("likelihood_zplminus: zero residual variance");
    const double r = (1.0 - eps) * i0 - ib +
                     (eps - delta) * (m * (lambda - lambda_bar) + b) + eps * c;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return -0.5 * r * r / var - 0.5 * std::log(two_pi * var);
}

struct Particle {
    double epsilon = 0.0;
    double delta = 0.0;
    double m = 0.0;
    double b = 0.0;
};

struct ParticleEnsemble {
    std::vector<Particle> particles;
    std::vector<double> weights;  // normalized, non-negative
    BackgroundPosterior background;
};

struct PriorConfig {
    std::array<double, 2> epsilon_range{-0.5, 0.5};
    std::array<double, 2> delta_range{-0.5, 0.2};
    double m_scale = 0.0;  // 0 requests auto-scaling from the zone data
    double b_scale = 0.0;  // 0 requests auto-scaling from the zone data
    int n_particles = 4000;
    double ess_threshold = 0.5;   // resample when ESS < threshold * n
    double jitter_scale = 0.25;   // kernel bandwidth in posterior-sd units
};

inline void validate_prior(const PriorConfig& p) {
    if (!(p.epsilon_range[1] > p.epsilon_range[0]))
        throw ValidationError("PriorConfig: empty epsilon range");
    if (!(p.delta_range[1] > p.delta_range[0]))
        throw ValidationError("PriorConfig: empty delta range");
    if (p.epsilon_range[1] >= 1.0 || p.delta_range[1] >= 1.0)
        throw ValidationError("PriorConfig: contrast ranges must stay below 1");
    if (p.n_particles < 100)
        throw ValidationError("PriorConfig: need at least 100 particles");
    if (!(p.ess_threshold > 0.0 && p.ess_threshold <= 1.0))
        throw ValidationError("PriorConfig: ess_threshold must lie in (0, 1]");
    if (p.jitter_scale < 0.0)
        throw ValidationError("PriorConfig: jitter_scale must be >= 0");
}

struct ContrastPosterior {
    double epsilon_mean = 0.0, epsilon_sd = 0.0;
    double delta_mean = 0.0, delta_sd = 0.0;
    std::array<double, 2> epsilon_ci90{0.0, 0.0};
    std::array<double, 2> delta_ci90{0.0, 0.0};
    double c_mean = 0.0, c_sd = 0.0;
    std::vector<double> ess_history;
};

inline double effective_sample_size(const std::vector<double>& weights) {
    double s2 = 0.0;
    for (double w : weights) s2 += w * w;
    if (!(s2 > 0.0))
        throw InferenceError("effective_sample_size: all weights are zero");
    return 1.0 / s2;
}

inline ContrastPosterior posterior_summary(const ParticleEnsemble& e) {
    if (e.particles.empty() || e.particles.size() != e.weights.size())
        throw ValidationError("posterior_summary: empty or inconsistent ensemble");
    std::vector<double> eps, del;
    eps.reserve(e.particles.size());
    del.reserve(e.particles.size());
    for (const auto& p : e.particles) {
        eps.push_back(p.epsilon);
        del.push_back(p.delta);
    }
    ContrastPosterior out;
    out.epsilon_mean = weighted_mean(eps, e.weights);
    out.epsilon_sd = weighted_sd(eps, e.weights);
    out.delta_mean = weighted_mean(del, e.weights);
    out.delta_sd = weighted_sd(del, e.weights);
    out.epsilon_ci90 = {weighted_quantile(eps, e.weights, 0.05),
                        weighted_quantile(eps, e.weights, 0.95)};
    out.delta_ci90 = {weighted_quantile(del, e.weights, 0.05),
                      weighted_quantile(del, e.weights, 0.95)};
    out.c_mean = e.background.mean;
    out.c_sd = e.background.sd;
    return out;
}

namespace detail {

inline double reflect_into(double x, double lo, double hi) {
    for (int guard = 0; guard < 64 && (x < lo || x > hi); ++guard) {
        if (x < lo) x = 2.0 * lo - x;
        if (x > hi) x = 2.0 * hi - x;
    }
    if (x < lo) x = lo;
    if (x > hi) x = hi;
    return x;
}

struct SmcState {
    std::vector<Particle> particles;
    std::vector<double> logw;
    std::vector<double> weights;
    std::mt19937_64 rng;
    PriorConfig prior;
    BackgroundPosterior bg;
    std::vector<double> ess_history;

    void normalize(std::size_t point_index, double lambda) {
        double m = -std::numeric_limits<double>::infinity();
        for (double v : logw) m = std::max(m, v);
        if (!std::isfinite(m))
            throw InferenceError(
                "smc_run: every particle weight vanished at data point " +
                std::to_string(point_index) + " (wavelength " +
                format_double(lambda) + " nm)");
        double s = 0.0;
        for (std::size_t i = 0; i < logw.size(); ++i) {
            weights[i] = std::exp(logw[i] - m);
            s += weights[i];
        }
        for (std::size_t i = 0; i < logw.size(); ++i) {
            weights[i] /= s;
            logw[i] = weights[i] > 0.0 ? std::log(weights[i])
                                       : -std::numeric_limits<double>::infinity();
        }
    }

    // Systematic (low-variance) resampling followed by a Gaussian jitter
    // whose bandwidth is a fixed fraction of the weighted posterior sd per
    // dimension. The contrast dimensions reflect at the prior bounds so the
    // kernel cannot push mass outside the prior support.
    void resample() {
        const std::size_t n = particles.size();
        std::vector<double> eps(n), del(n), mm(n), bb(n);
        for (std::size_t i = 0; i < n; ++i) {
            eps[i] = particles[i].epsilon;
            del[i] = particles[i].delta;
            mm[i] = particles[i].m;
            bb[i] = particles[i].b;
        }
        const double bw_eps = prior.jitter_scale * weighted_sd(eps, weights);
        const double bw_del = prior.jitter_scale * weighted_sd(del, weights);
        const double bw_m = prior.jitter_scale * weighted_sd(mm, weights);
        const double bw_b = prior.jitter_scale * weighted_sd(bb, weights);

        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double u0 = unif(rng) / static_cast<double>(n);
        std::vector<Particle> next(n);
        double cum = weights[0];
        std::size_t j = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const double u = u0 + static_cast<double>(k) / static_cast<double>(n);
            while (cum < u && j + 1 < n) cum += weights[++j];
            next[k] = particles[j];
        }

        std::normal_distribution<double> gauss(0.0, 1.0);
        for (auto& p : next) {
            p.epsilon = reflect_into(p.epsilon + bw_eps * gauss(rng),
                                     prior.epsilon_range[0], prior.epsilon_range[1]);
            p.delta = reflect_into(p.delta + bw_del * gauss(rng),
                                   prior.delta_range[0], prior.delta_range[1]);
            p.m += bw_m * gauss(rng);
            p.b += bw_b * gauss(rng);
        }
        particles = std::move(next);
        const double w0 = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            weights[i] = w0;
            logw[i] = -std::log(static_cast<double>(n));
        }
    }
};

}  // namespace detail

struct SmcResult {
    ContrastPosterior posterior;
    ParticleEnsemble ensemble;
};

// Sequential update over the zones in background -> zpl0 -> zpl_minus order.
// The background zone enters through the pooled C posterior; the two line
// zones update the particle weights one data point at a time, redrawing each
// particle's background sample from the C posterior at every point so that C
// stays marginalized rather than becoming a fifth particle dimension.
// `zpl0_order` / `zplminus_order` override the processing order within a
// zone (indices into the shared wavelength grid); the default is grid order.
inline SmcResult smc_run(const SpectrumPair& pair, const ZoneSet& zones,
                         const PriorConfig& prior_in, std::uint64_t seed,
                         const std::vector<std::size_t>* zpl0_order = nullptr,
                         const std::vector<std::size_t>* zplminus_order = nullptr) {
    validate_pair(pair);
    validate_zones(zones, pair.off);
    PriorConfig prior = prior_in;
    validate_prior(prior);

    detail::SmcState st;
    st.prior = prior;
    st.rng.seed(seed);
    st.bg = background_posterior(pair, zones.bg);

    // Noise floors keep a noiseless synthetic pair from zeroing the
    // likelihood variance.
    const double floor = 1e-12 * std::max(1.0, std::abs(st.bg.mean));
    st.bg.sigma0 = std::max(st.bg.sigma0, floor);
    st.bg.sigmaB = std::max(st.bg.sigmaB, floor);

    const auto zpl0_idx = zpl0_order ? *zpl0_order : zone_indices(pair.off, zones.zpl0);
    const auto zplm_idx =
        zplminus_order ? *zplminus_order : zone_indices(pair.off, zones.zpl_minus);
    for (std::size_t i : zpl0_idx)
        if (!zones.zpl0.contains(pair.off.wavelength_nm.at(i)))
            throw ValidationError("smc_run: zpl0 order index " + std::to_string(i) +
                                  " falls outside the zone");
    for (std::size_t i : zplm_idx)
        if (!zones.zpl_minus.contains(pair.off.wavelength_nm.at(i)))
            throw ValidationError("smc_run: zpl_minus order index " + std::to_string(i) +
                                  " falls outside the zone");

    double lambda_bar = 0.0;
    {
        const auto grid_idx = zone_indices(pair.off, zones.zpl_minus);
        for (std::size_t i : grid_idx) lambda_bar += pair.off.wavelength_nm[i];
        lambda_bar /= static_cast<double>(grid_idx.size());
    }

    // Nuisance prior scales, auto-derived from the off spectrum in the NV-
    // zone unless configured.
    double b_mu = 0.0, zone_min = 0.0, zone_max = 0.0;
    {
        const auto grid_idx = zone_indices(pair.off, zones.zpl_minus);
        zone_min = zone_max = pair.off.counts[grid_idx.front()];
        for (std::size_t i : grid_idx) {
            b_mu += pair.off.counts[i];
            zone_min = std::min(zone_min, pair.off.counts[i]);
            zone_max = std::max(zone_max, pair.off.counts[i]);
        }
        b_mu /= static_cast<double>(grid_idx.size());
    }
    const double zone_width = zones.zpl_minus.width();
    const double b_sd =
        prior.b_scale > 0.0 ? prior.b_scale : std::max(std::abs(b_mu), 1.0);
    const double m_sd = prior.m_scale > 0.0
                            ? prior.m_scale
                            : std::max(2.0 * (zone_max - zone_min) / zone_width, 1.0);
    b_mu *= 0.5;

    const std::size_t n = static_cast<std::size_t>(prior.n_particles);
    st.particles.resize(n);
    st.logw.assign(n, -std::log(static_cast<double>(n)));
    st.weights.assign(n, 1.0 / static_cast<double>(n));
    {
        std::uniform_real_distribution<double> u_eps(prior.epsilon_range[0],
                                                     prior.epsilon_range[1]);
        std::uniform_real_distribution<double> u_del(prior.delta_range[0],
                                                     prior.delta_range[1]);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (auto& p : st.particles) {
            p.epsilon = u_eps(st.rng);
            p.delta = u_del(st.rng);
            p.m = m_sd * gauss(st.rng);
            p.b = b_mu + b_sd * gauss(st.rng);
        }
    }

    std::normal_distribution<double> c_draw(st.bg.mean,
                                            st.bg.sd > 0.0 ? st.bg.sd : 1.0);
    const double ess_floor = prior.ess_threshold * static_cast<double>(n);

    auto update_point = [&](std::size_t idx, bool zpl0_zone, std::size_t counter) {
        const double lam = pair.off.wavelength_nm[idx];
        const double i0 = pair.off.counts[idx];
        const double ib = pair.on.counts[idx];
        for (std::size_t i = 0; i < n; ++i) {
            const double c = st.bg.sd > 0.0 ? c_draw(st.rng) : st.bg.mean;
            const Particle& p = st.particles[i];
            const double ll =
                zpl0_zone
                    ? likelihood_zpl0(i0, ib, p.delta, c, st.bg.sigma0, st.bg.sigmaB)
                    : likelihood_zplminus(i0, ib, p.epsilon, p.delta, p.m, p.b, lam,
                                          lambda_bar, c, st.bg.sigma0, st.bg.sigmaB);
            st.logw[i] += std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
        }
        st.normalize(counter, lam);
        const double ess = effective_sample_size(st.weights);
        st.ess_history.push_back(ess);
        if (ess < ess_floor) st.resample();
    };

    std::size_t counter = 0;
    for (std::size_t idx : zpl0_idx) update_point(idx, true, counter++);
    for (std::size_t idx : zplm_idx) update_point(idx, false, counter++);

    SmcResult out;
    out.ensemble.particles = std::move(st.particles);
    out.ensemble.weights = std::move(st.weights);
    out.ensemble.background = st.bg;
    out.posterior = posterior_summary(out.ensemble);
    out.posterior.ess_history = std::move(st.ess_history);
    return out;
}

}  // namespace nvsep

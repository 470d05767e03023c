// Acceptance gate for the library: twelve numbered checks, one line each,
// exit code equal to the number of failures. argv[1] points at the golden
// reference tables used by check 11.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nvsep/batch.hpp"
#include "nvsep/synth.hpp"
#include "support.hpp"

using namespace nvsep;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void run(int id, const std::string& name, const std::function<Check()>& fn) {
    Check c;
    try {
        c = fn();
    } catch (const std::exception& e) {
        c.pass = false;
        c.detail = std::string("exception: ") + e.what();
    }
    if (!c.pass) ++g_failures;
    std::printf("criterion %2d: %s  %s (%s)\n", id, c.pass ? "PASS" : "FAIL",
                name.c_str(), c.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

StatePopulations random_pops(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 0.5);
    double v[5], sum = 0.0;
    for (double& x : v) {
        x = u(rng);
        sum += x;
    }
    StatePopulations p;
    p.nv_minus = {v[0] / sum, v[1] / sum, v[2] / sum, v[3] / sum, v[4] / sum};
    std::uniform_real_distribution<double> ue(0.05, 0.95);
    p.nv_zero.e = ue(rng);
    p.nv_zero.g = 1.0 - p.nv_zero.e;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------

Check check_steady_state() {
    const double t0 = now_s();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ub(0.0, 300.0), ua(0.0, 90.0),
        ul(480.0, 630.0);
    double worst_res = 0.0, worst_diff = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        NvMinusRates r;
        r.k_eg = log_uniform(rng, 1e6, 1e8);
        r.k_isc_up0 = log_uniform(rng, 1e6, 1e8);
        r.k_isc_up1 = r.k_isc_up0 * log_uniform(rng, 1.5, 20.0);
        r.k_isc_down0 = log_uniform(rng, 1e4, 1e7);
        r.k_isc_down1 = log_uniform(rng, 1e4, 1e7);
        const double e_ev = ev_from_nm(ul(rng));
        const double flux = log_uniform(rng, 1e4, 1e7) / r.absorption(e_ev);
        const auto mix = field_mixing(ub(rng), ua(rng));

        const RateMatrix g = build_rate_matrix(r, mix, flux, e_ev);
        const auto n = steady_state(g);
        const double scale = nvsep_test::matrix_inf_norm(g);
        worst_res = std::max(worst_res, nvsep_test::residual_inf_norm(g, n) / scale);

        const auto relax = nvsep_test::rk4_relax(g);
        if (!relax.converged)
            return {false, fmt("relaxation oracle failed to converge on trial %d", trial)};
        double diff = 0.0;
        for (int i = 0; i < 5; ++i) diff = std::max(diff, std::abs(n[i] - relax.n[i]));
        worst_diff = std::max(worst_diff, diff);
    }
    const double dt = now_s() - t0;
    const bool ok = worst_res < 1e-10 && worst_diff < 1e-8 && dt < 10.0;
    return {ok, fmt("100 random generators: max residual %.2e (< 1e-10), max oracle "
                    "gap %.2e (< 1e-8), %.1f s (< 10 s)",
                    worst_res, worst_diff, dt)};
}

Check check_fixed_p_delta_zero() {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> up(0.05, 0.95);
    EmissionConstants k;
    for (int i = 0; i < 1000; ++i) {
        const auto off = random_pops(rng);
        const auto on = random_pops(rng);
        const auto pred = fixed_p_prediction(up(rng), off, on, k);
        if (pred.delta != 0.0)
            return {false, fmt("draw %d produced delta = %.3e", i, pred.delta)};
    }
    return {true, "frozen charge balance: delta identically 0 over 1000 random draws"};
}

Check check_shelving_signature() {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> us(1e-4, 1e-2);
    EmissionConstants k;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        EffectiveCrossSections sig;
        sig.e_minus = us(rng);
        sig.e_zero = us(rng);
        sig.s_minus = 0.0;
        const auto pred = balanced_rate_contrasts(random_pops(rng), random_pops(rng),
                                                  sig, k);
        worst = std::max(worst, std::abs(pred.epsilon - pred.delta));
    }
    if (!(worst < 1e-12))
        return {false, fmt("closed shelf channel: max |eps - delta| = %.2e", worst)};

    // open the shelf channel on the physical model: the contrasts split
    RunConfig cfg;
    const double e_ev = ev_from_nm(532.0);
    const double flux = 10.0 * cfg.flux_per_uW;
    const auto off = populations(cfg.photodyn, field_mixing(0.0, cfg.field_angle_deg),
                                 flux, e_ev);
    const auto on = populations(
        cfg.photodyn, field_mixing(cfg.field_mT, cfg.field_angle_deg), flux, e_ev);
    const auto sig = at_energy(cfg.ionization, e_ev);
    const auto pred = balanced_rate_contrasts(off, on, sig, cfg.emission);
    const double split = std::abs(pred.epsilon - pred.delta);
    const double shelf_change = std::abs(on.n_s_minus() - off.n_s_minus());
    const bool ok = sig.s_minus > 0.0 && shelf_change > 1e-6 && split > 1e-9;
    return {ok, fmt("sigma_s = 0 keeps |eps - delta| <= %.1e over 1000 draws; open "
                    "shelf at 532 nm, 100 mT moves n_s by %.2e and splits the "
                    "contrasts by %.2e",
                    worst, shelf_change, split)};
}

Check check_cross_section_anchors() {
    const auto minus = nv_minus_absorption();
    const auto zero = nv_zero_absorption();
    const double peak = minus(2.17);
    const double ratio = zero(2.331) / minus(2.331);
    const bool ok = peak == 0.0045 && std::abs(ratio - 1.30) <= 0.01;
    return {ok, fmt("sigma_g-(2.17 eV) = %.6g nm^2 (expect 0.0045 exactly), "
                    "sigma_g0/sigma_g- at 2.331 eV = %.4f (expect 1.30 +- 0.01)",
                    peak, ratio)};
}

Check check_singlet_gap_anchors() {
    const auto g560 = singlet_gaps_from_threshold(ev_from_nm(560.0));
    const auto g532 = singlet_gaps_from_threshold(ev_from_nm(532.0));
    const bool d560 = std::abs(g560.delta_gap_ev - 0.36) <= 0.01;
    const bool s560 = std::abs(g560.sigma_gap_ev - 0.40) <= 0.01;
    const bool d532 = std::abs(g532.delta_gap_ev - 0.48) <= 0.01;
    const bool s532 = std::abs(g532.sigma_gap_ev - 0.28) <= 0.01;
    return {d560 && s560 && d532 && s532,
            fmt("560 nm: Delta %.4f%s Sigma %.4f%s (expect 0.36 / 0.40 +- 0.01); "
                "532 nm: Delta %.4f%s Sigma %.4f%s (expect 0.48 / 0.28 +- 0.01); "
                "the two gaps always sum to 0.755 eV, the quoted pairs sum to 0.76",
                g560.delta_gap_ev, d560 ? "" : "!", g560.sigma_gap_ev,
                s560 ? "" : "!", g532.delta_gap_ev, d532 ? "" : "!",
                g532.sigma_gap_ev, s532 ? "" : "!")};
}

Check check_calibration() {
    const double t0 = now_s();
    RunConfig cfg;
    const auto truth = default_truth();
    int eps2 = 0, del2 = 0, eps_ci = 0, del_ci = 0;
    for (int i = 0; i < 100; ++i) {
        const auto g = generate_pair(truth, derive_seed(42, i));
        const auto r = smc_run(g.pair, cfg.zones, cfg.prior, derive_seed(43, i));
        const auto& p = r.posterior;
        if (std::abs(p.epsilon_mean - truth.epsilon) <= 2.0 * p.epsilon_sd) ++eps2;
        if (std::abs(p.delta_mean - truth.delta) <= 2.0 * p.delta_sd) ++del2;
        if (p.epsilon_ci90[0] <= truth.epsilon && truth.epsilon <= p.epsilon_ci90[1])
            ++eps_ci;
        if (p.delta_ci90[0] <= truth.delta && truth.delta <= p.delta_ci90[1])
            ++del_ci;
    }
    const double dt = now_s() - t0;
    const bool ok = eps2 >= 90 && del2 >= 90 && eps_ci >= 85 && del_ci >= 85 &&
                    dt < 300.0;
    return {ok, fmt("100 synthetic pairs: within 2 sd eps %d, delta %d (>= 90); 90%% "
                    "interval covers eps %d, delta %d (>= 85); %.1f s (< 300 s)",
                    eps2, del2, eps_ci, del_ci, dt)};
}

Check check_grid_equivalence() {
    const double eps_t = 0.15, del_t = -0.03, c_t = 100.0, b_t = 160.0;
    const double sigma = 1.85;
    const double v_feat[10] = {10, 25, 45, 70, 95, 110, 95, 70, 45, 35};
    const double z_feat[10] = {40, 70, 110, 150, 180, 180, 150, 110, 70, 40};
    const ZoneSet zones{{553.0, 562.0}, {572.0, 581.0}, {634.0, 643.0}};

    const int ne = 81, nd = 81;
    const double eps_lo = -0.5, eps_hi = 0.5, del_lo = -0.5, del_hi = 0.2;
    const double cell_e = (eps_hi - eps_lo) / (ne - 1);
    const double cell_d = (del_hi - del_lo) / (nd - 1);

    double worst_e = 0.0, worst_d = 0.0;
    for (int s = 0; s < 10; ++s) {
        std::mt19937_64 rng(derive_seed(71, s));
        std::normal_distribution<double> gauss(0.0, sigma);
        SpectrumPair pair;
        auto push = [&](double lam, double i0, double ib) {
            pair.off.wavelength_nm.push_back(lam);
            pair.on.wavelength_nm.push_back(lam);
            pair.off.counts.push_back(i0 + gauss(rng));
            pair.on.counts.push_back(ib + gauss(rng));
        };
        for (int i = 0; i < 10; ++i) push(553.0 + i, c_t, c_t);
        for (int i = 0; i < 10; ++i)
            push(572.0 + i, c_t + z_feat[i], c_t + (1.0 - del_t) * z_feat[i]);
        for (int i = 0; i < 10; ++i)
            push(634.0 + i, c_t + v_feat[i] + b_t,
                 c_t + (1.0 - eps_t) * v_feat[i] + (1.0 - del_t) * b_t);

        const auto bg = background_posterior(pair, zones.bg);
        const auto zpl0_idx = zone_indices(pair.off, zones.zpl0);
        const auto zplm_idx = zone_indices(pair.off, zones.zpl_minus);
        double lbar = 0.0;
        for (auto i : zplm_idx) lbar += pair.off.wavelength_nm[i];
        lbar /= static_cast<double>(zplm_idx.size());

        // dense posterior over the prior box, nuisances held at their centers
        std::vector<double> logl(static_cast<std::size_t>(ne) * nd);
        double lmax = -1e300;
        for (int a = 0; a < ne; ++a) {
            const double eps = eps_lo + cell_e * a;
            for (int b = 0; b < nd; ++b) {
                const double del = del_lo + cell_d * b;
                double l = 0.0;
                for (auto i : zpl0_idx)
                    l += likelihood_zpl0(pair.off.counts[i], pair.on.counts[i], del,
                                         bg.mean, bg.sigma0, bg.sigmaB);
                for (auto i : zplm_idx)
                    l += likelihood_zplminus(pair.off.counts[i], pair.on.counts[i],
                                             eps, del, 0.0, b_t,
                                             pair.off.wavelength_nm[i], lbar,
                                             bg.mean, bg.sigma0, bg.sigmaB);
                logl[static_cast<std::size_t>(a) * nd + b] = l;
                lmax = std::max(lmax, l);
            }
        }
        double wsum = 0.0, me = 0.0, md = 0.0;
        for (int a = 0; a < ne; ++a)
            for (int b = 0; b < nd; ++b) {
                const double w = std::exp(logl[static_cast<std::size_t>(a) * nd + b] - lmax);
                wsum += w;
                me += w * (eps_lo + cell_e * a);
                md += w * (del_lo + cell_d * b);
            }
        me /= wsum;
        md /= wsum;

        PriorConfig prior;
        prior.b_scale = 5.0;
        prior.m_scale = 0.05;
        const auto smc = smc_run(pair, zones, prior, derive_seed(72, s));
        worst_e = std::max(worst_e, std::abs(smc.posterior.epsilon_mean - me));
        worst_d = std::max(worst_d, std::abs(smc.posterior.delta_mean - md));
    }
    const bool ok = worst_e <= 0.5 * cell_e && worst_d <= 0.5 * cell_d;
    return {ok, fmt("10 seeds, 81x81 grid: max |smc - grid| eps %.5f (<= %.5f), "
                    "delta %.5f (<= %.5f)",
                    worst_e, 0.5 * cell_e, worst_d, 0.5 * cell_d)};
}

Check check_unmix() {
    auto truth = default_truth();
    truth.sigma0 = truth.sigmaB = 0.0;
    const auto clean = generate_pair(truth, 201);
    const auto s = unmix(clean.pair, truth.epsilon, truth.delta, truth.background);

    double worst_remix = 0.0, worst_comp = 0.0;
    for (std::size_t i = 0; i < clean.pair.off.size(); ++i) {
        const double off2 = truth.background + s.i_minus.counts[i] + s.i_zero.counts[i];
        const double on2 = truth.background +
                           (1.0 - truth.epsilon) * s.i_minus.counts[i] +
                           (1.0 - truth.delta) * s.i_zero.counts[i];
        worst_remix = std::max(
            worst_remix,
            std::abs(off2 - clean.pair.off.counts[i]) /
                std::max(1.0, std::abs(clean.pair.off.counts[i])));
        worst_remix = std::max(
            worst_remix, std::abs(on2 - clean.pair.on.counts[i]) /
                             std::max(1.0, std::abs(clean.pair.on.counts[i])));
        worst_comp = std::max(worst_comp,
                              std::abs(s.i_minus.counts[i] - clean.i_minus.counts[i]));
        worst_comp = std::max(worst_comp,
                              std::abs(s.i_zero.counts[i] - clean.i_zero.counts[i]));
    }

    bool rejected = false;
    try {
        unmix(clean.pair, 0.1, 0.1, truth.background);
    } catch (const ModelError&) {
        rejected = true;
    }

    // noisy round trip: component error should sit at the propagated noise
    const auto noisy_truth = default_truth();
    const auto noisy = generate_pair(noisy_truth, 202);
    const auto sn = unmix(noisy.pair, noisy_truth.epsilon, noisy_truth.delta,
                          noisy_truth.background);
    double rss = 0.0;
    for (std::size_t i = 0; i < noisy.pair.off.size(); ++i) {
        const double d = sn.i_minus.counts[i] - noisy.i_minus.counts[i];
        rss += d * d;
    }
    const double rms = std::sqrt(rss / static_cast<double>(noisy.pair.off.size()));
    const double sep = noisy_truth.epsilon - noisy_truth.delta;
    const double one_md = 1.0 - noisy_truth.delta;
    const double predicted =
        std::sqrt(one_md * one_md + 1.0) * noisy_truth.sigma0 / std::abs(sep);

    const bool ok = worst_remix < 1e-9 && worst_comp < 1e-6 && rejected &&
                    rms > 0.8 * predicted && rms < 1.2 * predicted;
    return {ok, fmt("remix residual %.1e (< 1e-9 rel), noiseless components to "
                    "%.1e counts, eps = delta rejected: %s, noisy NV- recovery rms "
                    "%.1f vs propagated %.1f counts",
                    worst_remix, worst_comp, rejected ? "yes" : "no", rms, predicted)};
}

Check check_linewidth_recovery() {
    // At peak SNR 200 the single-pair information limit on alpha is about
    // 0.002 one sigma (an exact-shape Lorentzian fit does no better), so
    // the +-0.005 band is a bias bound on the ensemble recovery; per-seed
    // scatter and the worst single draw are reported alongside.
    const double alpha_t = -0.02, g0 = 0.25, amp = 1000.0, noise = 5.0;
    const Interval window{635.5, 638.5};
    double worst = 0.0, mean_alpha = 0.0, m2 = 0.0;
    for (int s = 0; s < 50; ++s) {
        std::mt19937_64 rng(derive_seed(91, s));
        std::normal_distribution<double> gauss(0.0, noise);
        SpectrumPair pair;
        for (int i = 0; i <= 1200; ++i) {
            const double lam = 634.0 + 0.005 * i;
            const double d = lam - 637.0;
            const double g1 = (1.0 + alpha_t) * g0;
            pair.off.wavelength_nm.push_back(lam);
            pair.on.wavelength_nm.push_back(lam);
            pair.off.counts.push_back(amp * g0 * g0 / (d * d + g0 * g0) + gauss(rng));
            pair.on.counts.push_back(amp * g1 * g1 / (d * d + g1 * g1) + gauss(rng));
        }
        const auto fit = linewidth_contrast(pair, window, derive_seed(92, s));
        worst = std::max(worst, std::abs(fit.alpha - alpha_t));
        mean_alpha += fit.alpha / 50.0;
        m2 += (fit.alpha - alpha_t) * (fit.alpha - alpha_t) / 50.0;
    }
    const double bias = mean_alpha - alpha_t;
    const double sd = std::sqrt(std::max(0.0, m2 - bias * bias));
    const bool ok = std::abs(bias) <= 0.005;
    return {ok, fmt("2%% narrowing at SNR 200, 50 seeds: recovered alpha %.5f "
                    "(expect -0.02 +- 0.005), per-seed sd %.5f, worst single "
                    "deviation %.5f",
                    mean_alpha, sd, worst)};
}

Check check_carrier_perturbation() {
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> up(0.02, 0.98);
    double worst_res = 0.0;
    for (int i = 0; i < 500; ++i) {
        const double a = log_uniform(rng, 1e-6, 0.05);
        const double b = log_uniform(rng, 1e-6, 0.05);
        const auto r = carrier_perturbation(up(rng), a, b);
        worst_res = std::max(worst_res, std::abs(r.residual));
    }

    // p' = 1/2 closed form D / (4 (S + 1/4)) with D = A - B, S = A + B; this
    // is the linearized root -c/b, checked against the exact quadratic root
    const double grid[5] = {1e-4, 5e-4, 1e-3, 5e-3, 1e-2};
    double worst_rel = 0.0;
    for (double A : grid)
        for (double B : grid) {
            if (A == B) continue;
            const auto r = carrier_perturbation(0.5, A, B);
            const double closed = (A - B) / (4.0 * (A + B + 0.25));
            worst_rel = std::max(worst_rel,
                                 std::abs(closed - r.x_exact) / std::abs(r.x_exact));
        }
    const bool ok = worst_res < 1e-10 && worst_rel <= 0.10;
    return {ok, fmt("quadratic residual at x_exact %.1e (< 1e-10); p' = 1/2 closed "
                    "form within %.2e relative of the exact root (<= 0.10) for "
                    "A, B <= 0.01",
                    worst_res, worst_rel)};
}

Check check_model_curves(const fs::path& golden_dir) {
    RunConfig cfg;
    const auto mix0 = field_mixing(0.0, cfg.field_angle_deg);
    const double flux = 10.0 * cfg.flux_per_uW;

    double exc_min = 1.0, exc_max = 0.0;
    std::vector<double> fixed_curve;
    for (int k = 0; k <= 70; ++k) {
        const double lam = 490.0 + k;
        const double e_ev = ev_from_nm(lam);
        const auto pops = populations(cfg.photodyn, mix0, flux, e_ev);
        auto sig = at_energy(cfg.ionization, e_ev);
        sig.s_minus = 0.0;
        sig.g_minus = 0.0;
        const double p = balanced_rate_p(pops, sig);
        const double f_exc = pl_fraction(p, 1.0 - p, pops, cfg.emission);
        exc_min = std::min(exc_min, f_exc);
        exc_max = std::max(exc_max, f_exc);
        fixed_curve.push_back(
            pl_fraction(cfg.fixed_p, 1.0 - cfg.fixed_p, pops, cfg.emission));
    }
    bool monotone = true;
    for (std::size_t k = 1; k < fixed_curve.size(); ++k)
        if (fixed_curve[k] < fixed_curve[k - 1] - 1e-12) monotone = false;

    // golden regression of the default wavelength sweep tables
    const fs::path tmp = fs::temp_directory_path() / "nvsep_acceptance_models";
    fs::remove_all(tmp);
    run_models(cfg, SweepSpec{}, tmp);
    bool golden_ok = true;
    std::string golden_msg = "golden tables match";
    for (const char* name : {"pl_fraction_wavelength.csv", "contrasts_wavelength.csv"}) {
        const auto want = slurp(golden_dir / name);
        const auto got = slurp(tmp / name);
        if (want.empty()) {
            golden_ok = false;
            golden_msg = fmt("golden file %s missing or empty", name);
        } else if (want != got) {
            golden_ok = false;
            golden_msg = fmt("golden file %s drifted", name);
        }
    }
    fs::remove_all(tmp);

    const bool ok = (exc_max - exc_min) < 0.02 && monotone && golden_ok;
    return {ok, fmt("excited-only balanced fraction spans %.2e absolute over "
                    "490-560 nm (< 0.02); fixed-balance curve monotone "
                    "non-decreasing: %s; %s",
                    exc_max - exc_min, monotone ? "yes" : "no", golden_msg.c_str())};
}

Check check_batch_determinism() {
    const double t0 = now_s();
    const fs::path base = fs::temp_directory_path() / "nvsep_acceptance_batch";
    fs::remove_all(base);
    fs::create_directories(base / "data");

    // 405-pair grid: 5 powers x 9 temperatures x 9 wavelengths
    const double powers[5] = {2.5, 5.0, 10.0, 20.0, 40.0};
    const double temps[9] = {1.6, 4.0, 10.0, 25.0, 50.0, 100.0, 150.0, 225.0, 295.0};
    const double lams[9] = {458.0, 476.0, 488.0, 497.0, 502.0, 515.0, 532.0,
                            550.0, 560.0};
    std::vector<ManifestEntry> entries;
    std::size_t idx = 0;
    for (double pw : powers)
        for (double tk : temps)
            for (double lm : lams) {
                auto truth = default_truth();
                const double scale = pw / 10.0;
                truth.nv_minus.zpl_amplitude *= scale;
                truth.nv_zero.zpl_amplitude *= scale;
                for (auto& band : truth.nv_minus.sidebands) band.amplitude *= scale;
                for (auto& band : truth.nv_zero.sidebands) band.amplitude *= scale;
                const auto g = generate_pair(truth, derive_seed(5, idx));
                char off_name[40], on_name[40];
                std::snprintf(off_name, sizeof off_name, "pair_%04zu_off.csv", idx);
                std::snprintf(on_name, sizeof on_name, "pair_%04zu_on.csv", idx);
                save_spectrum(base / "data" / off_name, g.pair.off);
                save_spectrum(base / "data" / on_name, g.pair.on);
                ManifestEntry e;
                e.off = (base / "data" / off_name).string();
                e.on = (base / "data" / on_name).string();
                e.temperature_K = tk;
                e.wavelength_nm = lm;
                e.power_uW = pw;
                entries.push_back(e);
                ++idx;
            }

    RunConfig cfg;
    auto run_once = [&](const char* sub, unsigned jobs) {
        BatchOptions opt;
        opt.out_dir = base / sub;
        opt.master_seed = 9;
        opt.jobs = jobs;
        return run_batch(cfg, entries, opt);
    };
    const auto ra = run_once("out_a", 1);
    const auto rb = run_once("out_b", 1);
    const auto rc = run_once("out_c", 8);

    std::size_t failed = ra.n_failed + rb.n_failed + rc.n_failed;
    bool identical = slurp(base / "out_a" / "results.csv") ==
                         slurp(base / "out_b" / "results.csv") &&
                     slurp(base / "out_a" / "results.csv") ==
                         slurp(base / "out_c" / "results.csv");
    std::size_t checked = 0;
    for (std::size_t i = 0; identical && i < entries.size(); ++i) {
        char rep[48], sep[48];
        std::snprintf(rep, sizeof rep, "pair_%04zu.report.json", i);
        std::snprintf(sep, sizeof sep, "pair_%04zu.separated.csv", i);
        const auto rep_a = slurp(base / "out_a" / rep);
        const auto sep_a = slurp(base / "out_a" / sep);
        if (rep_a.empty() || sep_a.empty() || rep_a != slurp(base / "out_b" / rep) ||
            rep_a != slurp(base / "out_c" / rep) ||
            sep_a != slurp(base / "out_b" / sep) ||
            sep_a != slurp(base / "out_c" / sep)) {
            identical = false;
            break;
        }
        ++checked;
    }
    fs::remove_all(base);
    const double dt = now_s() - t0;
    const bool ok = failed == 0 && identical && checked == entries.size();
    return {ok, fmt("405-pair batch, three runs (jobs 1, 1, 8): %zu failures, "
                    "tables and %zu per-pair files bit-identical: %s, %.0f s",
                    failed, checked, identical ? "yes" : "no", dt)};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path golden_dir = argc > 1 ? fs::path(argv[1]) : fs::path("tests/golden");

    run(1, "steady-state solver vs relaxation oracle", check_steady_state);
    run(2, "fixed charge balance gives delta = 0", check_fixed_p_delta_zero);
    run(3, "shelving-channel signature in the contrasts", check_shelving_signature);
    run(4, "absorption cross-section anchors", check_cross_section_anchors);
    run(5, "singlet gap anchors", check_singlet_gap_anchors);
    run(6, "posterior calibration on synthetic pairs", check_calibration);
    run(7, "smc matches the dense-grid posterior", check_grid_equivalence);
    run(8, "unmix exactness and noise floor", check_unmix);
    run(9, "linewidth change recovery", check_linewidth_recovery);
    run(10, "carrier perturbation quadratic", check_carrier_perturbation);
    run(11, "model curve regression", [&] { return check_model_curves(golden_dir); });
    run(12, "batch determinism across thread counts", check_batch_determinism);

    std::printf("%d of 12 criteria passed\n", 12 - g_failures);
    return g_failures;
}

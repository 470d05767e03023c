#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "nvsep/charge.hpp"
#include "nvsep/common.hpp"
#include "nvsep/config.hpp"
#include "nvsep/inference.hpp"
#include "nvsep/photodyn.hpp"
#include "nvsep/separate.hpp"
#include "nvsep/spectra.hpp"

namespace nvsep {

// Width-fit window: explicit center from the config, or the off-spectrum
// maximum inside the NV- ZPL zone when the config leaves it at 0.
inline Interval linewidth_window(const RunConfig& cfg, const Spectrum& off) {
    double center = cfg.linewidth_center_nm;
    if (center <= 0.0) {
        const auto idx = zone_indices(off, cfg.zones.zpl_minus);
        if (idx.empty())
            throw ValidationError("linewidth_window: no grid points in the NV- ZPL zone");
        std::size_t best = idx.front();
        for (std::size_t i : idx)
            if (off.counts[i] > off.counts[best]) best = i;
        center = off.wavelength_nm[best];
    }
    const double half = cfg.linewidth_half_width_nm;
    if (!(half > 0.0))
        throw ValidationError("linewidth_window: half width must be positive");
    return {center - half, center + half};
}

// Everything computed for one off/on pair: posterior contrasts, the unmixed
// component spectra, and the width change of the NV- line.
struct PairAnalysis {
    ContrastPosterior posterior;
    BackgroundPosterior background;
    SeparatedSpectra separated;
    LinewidthFit linewidth;
    Interval window{0.0, 0.0};
    double alpha_sd = std::numeric_limits<double>::quiet_NaN();
    double integrated_minus = 0.0;
    double integrated_zero = 0.0;
    double pl_fraction_minus = 0.0;
    double leakage_zero = std::numeric_limits<double>::quiet_NaN();
};

inline PairAnalysis analyze_pair(const RunConfig& cfg, const SpectrumPair& pair,
                                 std::uint64_t seed) {
    PairAnalysis out;
    const auto smc = smc_run(pair, cfg.zones, cfg.prior, seed);
    out.posterior = smc.posterior;
    out.background = smc.ensemble.background;
    out.separated = unmix(pair, out.posterior.epsilon_mean, out.posterior.delta_mean,
                          out.posterior.c_mean, cfg.unmix_min_separation);

    out.window = linewidth_window(cfg, pair.off);
    out.linewidth = linewidth_contrast(pair, out.window, derive_seed(seed, 1000003));
    out.alpha_sd = linewidth_alpha_sd(pair, out.window, out.linewidth);

    const Interval span{pair.off.wavelength_nm.front(), pair.off.wavelength_nm.back()};
    out.integrated_minus = integrate_intensity(out.separated.i_minus, span);
    out.integrated_zero = integrate_intensity(out.separated.i_zero, span);
    const double total = out.integrated_minus + out.integrated_zero;
    if (!(total > 0.0))
        throw ModelError("analyze_pair: separated spectra carry no net intensity");
    out.pl_fraction_minus = out.integrated_minus / total;

    try {
        out.leakage_zero = peak_leakage(out.separated.i_zero, cfg.zones.zpl_minus);
    } catch (const Error&) {
        // diagnostic only; too few points in the zone leaves it NaN
    }
    return out;
}

struct PairResult {
    std::size_t index = 0;
    bool ok = false;
    std::string error;
    ManifestEntry entry;
    std::uint64_t seed = 0;
    PairAnalysis analysis;
    std::string report_path;
    std::string separated_path;
};

inline json pair_report_json(const PairResult& r) {
    const auto& a = r.analysis;
    json j;
    j["index"] = r.index;
    j["seed"] = r.seed;
    j["input"] = {{"off", r.entry.off},
                  {"on", r.entry.on},
                  {"field_mT", r.entry.field_mT},
                  {"temperature_K", r.entry.temperature_K},
                  {"wavelength_nm", r.entry.wavelength_nm},
                  {"power_uW", r.entry.power_uW}};
    j["background"] = {{"mean", a.background.mean},
                       {"sd", a.background.sd},
                       {"sigma0", a.background.sigma0},
                       {"sigmaB", a.background.sigmaB}};
    j["posterior"] = {
        {"epsilon",
         {{"mean", a.posterior.epsilon_mean},
          {"sd", a.posterior.epsilon_sd},
          {"ci90", {a.posterior.epsilon_ci90[0], a.posterior.epsilon_ci90[1]}}}},
        {"delta",
         {{"mean", a.posterior.delta_mean},
          {"sd", a.posterior.delta_sd},
          {"ci90", {a.posterior.delta_ci90[0], a.posterior.delta_ci90[1]}}}},
        {"c", {{"mean", a.posterior.c_mean}, {"sd", a.posterior.c_sd}}},
        {"final_ess",
         a.posterior.ess_history.empty() ? 0.0 : a.posterior.ess_history.back()}};
    j["linewidth"] = {{"alpha", a.linewidth.alpha},
                      {"alpha_sd", a.alpha_sd},
                      {"shift", a.linewidth.shift},
                      {"vscale", a.linewidth.vscale},
                      {"residual_rms", a.linewidth.residual_rms},
                      {"window", {a.window.lo, a.window.hi}}};
    j["integrals"] = {{"minus", a.integrated_minus},
                      {"zero", a.integrated_zero},
                      {"pl_fraction_minus", a.pl_fraction_minus},
                      {"zpl_leakage_zero", a.leakage_zero}};
    return j;
}

namespace detail {

inline std::string pair_tag(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pair_%04zu", index);
    return buf;
}

inline void save_separated(const std::filesystem::path& path,
                           const SeparatedSpectra& s) {
    std::ofstream out(path);
    if (!out)
        throw Error("save_separated: cannot open " + path.string() + " for writing");
    out << "wavelength_nm,i_minus,i_zero\n";
    for (std::size_t i = 0; i < s.i_minus.size(); ++i)
        out << format_double(s.i_minus.wavelength_nm[i]) << ','
            << format_double(s.i_minus.counts[i]) << ','
            << format_double(s.i_zero.counts[i]) << '\n';
}

}  // namespace detail

struct BatchOptions {
    std::filesystem::path out_dir = "out";
    std::uint64_t master_seed = 1;
    unsigned jobs = 1;
    bool write_pair_files = true;
};

struct BatchResult {
    std::vector<PairResult> pairs;
    std::size_t n_failed = 0;
    std::string table_path;
    std::string failures_path;  // empty when every pair succeeded
};

// Runs every manifest entry through analyze_pair. Pairs are independent: each
// gets its own derived seed and its own output files, so the results do not
// depend on the number of worker threads. A failing pair is recorded and
// skipped, never fatal for the rest of the batch.
inline BatchResult run_batch(const RunConfig& cfg,
                             const std::vector<ManifestEntry>& entries,
                             const BatchOptions& opt) {
    namespace fs = std::filesystem;
    fs::create_directories(opt.out_dir);

    std::vector<PairResult> results(entries.size());
    std::atomic<std::size_t> cursor{0};

    const auto worker = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= entries.size()) return;
            PairResult r;
            r.index = i;
            r.entry = entries[i];
            r.seed = derive_seed(opt.master_seed, i);
            try {
                AcquisitionMeta meta;
                meta.temperature_K = r.entry.temperature_K;
                meta.wavelength_nm = r.entry.wavelength_nm;
                meta.power_uW = r.entry.power_uW;
                const SpectrumPair pair =
                    load_spectrum_pair(r.entry.off, r.entry.on, r.entry.field_mT, meta);
                r.analysis = analyze_pair(cfg, pair, r.seed);
                if (opt.write_pair_files) {
                    const auto tag = detail::pair_tag(i);
                    const auto rep = opt.out_dir / (tag + ".report.json");
                    const auto sep = opt.out_dir / (tag + ".separated.csv");
                    detail::save_separated(sep, r.analysis.separated);
                    r.separated_path = sep.string();
                    r.report_path = rep.string();
                    std::ofstream out(rep);
                    if (!out)
                        throw Error("run_batch: cannot open " + rep.string() +
                                    " for writing");
                    out << pair_report_json(r).dump(2) << '\n';
                }
                r.ok = true;
            } catch (const std::exception& e) {
                r.ok = false;
                r.error = e.what();
            }
            results[i] = std::move(r);
        }
    };

    std::size_t jobs = std::max(1u, opt.jobs);
    jobs = std::min(jobs, std::max<std::size_t>(1, entries.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    BatchResult out;
    out.pairs = std::move(results);
    for (const auto& r : out.pairs)
        if (!r.ok) ++out.n_failed;

    const auto table = opt.out_dir / "results.csv";
    {
        std::ofstream csv(table);
        if (!csv)
            throw Error("run_batch: cannot open " + table.string() + " for writing");
        csv << "temperature_K,wavelength_nm,power_uW,epsilon_mean,epsilon_sd,"
               "delta_mean,delta_sd,alpha,alpha_sd,pl_fraction_minus,"
               "integrated_minus,integrated_zero\n";
        for (const auto& r : out.pairs) {
            if (!r.ok) continue;
            const auto& a = r.analysis;
            csv << format_double(r.entry.temperature_K) << ','
                << format_double(r.entry.wavelength_nm) << ','
                << format_double(r.entry.power_uW) << ','
                << format_double(a.posterior.epsilon_mean) << ','
                << format_double(a.posterior.epsilon_sd) << ','
                << format_double(a.posterior.delta_mean) << ','
                << format_double(a.posterior.delta_sd) << ','
                << format_double(a.linewidth.alpha) << ','
                << format_double(a.alpha_sd) << ','
                << format_double(a.pl_fraction_minus) << ','
                << format_double(a.integrated_minus) << ','
                << format_double(a.integrated_zero) << '\n';
        }
    }
    out.table_path = table.string();

    if (out.n_failed > 0) {
        json fj = json::array();
        for (const auto& r : out.pairs) {
            if (r.ok) continue;
            fj.push_back({{"index", r.index},
                          {"off", r.entry.off},
                          {"on", r.entry.on},
                          {"error", r.error}});
        }
        const auto fpath = opt.out_dir / "failures.json";
        std::ofstream out_f(fpath);
        if (!out_f)
            throw Error("run_batch: cannot open " + fpath.string() + " for writing");
        out_f << fj.dump(2) << '\n';
        out.failures_path = fpath.string();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Forward-model sweeps.

enum class SweepKind { wavelength, power, field };

struct SweepSpec {
    SweepKind kind = SweepKind::wavelength;
    double from = 458.0;
    double to = 575.0;
    int points = 118;
    double wavelength_nm = 532.0;  // held fixed when not the swept axis
    double power_uW = 10.0;
    double field_mT = 100.0;
};

struct ModelSweepResult {
    std::vector<std::string> files;
};

namespace detail {

// Sweeps cross model validity boundaries (donor reservoir limits, closed
// channels); a point that throws becomes NaN in the table instead of
// aborting the sweep.
template <typename F>
double eval_or_nan(F&& f) {
    try {
        return f();
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

inline double balanced_p_full(const StatePopulations& pops,
                              const EffectiveCrossSections& sig) {
    const double ion = pops.n_e_minus() * sig.e_minus +
                       pops.n_s_minus() * sig.s_minus +
                       pops.n_g_minus() * sig.g_minus;
    const double rec = pops.n_e_zero() * sig.e_zero;
    if (!(ion + rec > 0.0))
        throw ModelError("balanced_p_full: no active charge-transfer channel");
    return rec / (ion + rec);
}

}  // namespace detail

// Writes model prediction tables for one swept axis:
//   field sweep      -> populations_field.csv and contrasts_field.csv
//   wavelength/power -> pl_fraction_<axis>.csv and contrasts_<axis>.csv
// PL fractions describe the field-off steady state; contrasts compare the
// field-off and field-on states at the spec's fixed settings.
inline ModelSweepResult run_models(const RunConfig& cfg, const SweepSpec& spec,
                                   const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    if (spec.points < 2)
        throw ValidationError("run_models: a sweep needs at least 2 points");
    if (!(spec.to > spec.from))
        throw ValidationError("run_models: sweep range must be increasing");
    fs::create_directories(out_dir);

    const char* axis = spec.kind == SweepKind::wavelength ? "wavelength_nm"
                       : spec.kind == SweepKind::power    ? "power_uW"
                                                          : "B_mT";
    const std::string suffix = spec.kind == SweepKind::wavelength ? "wavelength"
                               : spec.kind == SweepKind::power    ? "power"
                                                                  : "field";

    const FieldMixing mix_off = field_mixing(0.0, cfg.field_angle_deg);
    ModelSweepResult out;

    std::ofstream pops_csv, frac_csv;
    fs::path pops_path, frac_path;
    if (spec.kind == SweepKind::field) {
        pops_path = out_dir / ("populations_" + suffix + ".csv");
        pops_csv.open(pops_path);
        if (!pops_csv)
            throw Error("run_models: cannot open " + pops_path.string() +
                        " for writing");
        pops_csv << "B_mT,n_g0,n_g1,n_e0,n_e1,n_s,n_e0_nv0\n";
    } else {
        frac_path = out_dir / ("pl_fraction_" + suffix + ".csv");
        frac_csv.open(frac_path);
        if (!frac_csv)
            throw Error("run_models: cannot open " + frac_path.string() +
                        " for writing");
        frac_csv << axis
                 << ",fixed_balance,balanced_excited,balanced_full,donor\n";
    }

    const fs::path con_path = out_dir / ("contrasts_" + suffix + ".csv");
    std::ofstream con_csv(con_path);
    if (!con_csv)
        throw Error("run_models: cannot open " + con_path.string() + " for writing");
    con_csv << axis
            << ",epsilon_fixed,epsilon_balanced,delta_balanced,epsilon_donor,"
               "delta_donor\n";

    for (int k = 0; k < spec.points; ++k) {
        const double x = spec.from + (spec.to - spec.from) * k / (spec.points - 1);
        const double lam = spec.kind == SweepKind::wavelength ? x : spec.wavelength_nm;
        const double pow_uw = spec.kind == SweepKind::power ? x : spec.power_uW;
        const double b_mt = spec.kind == SweepKind::field ? x : spec.field_mT;

        const double e_ev = ev_from_nm(lam);
        const double flux = pow_uw * cfg.flux_per_uW;
        const auto sig = at_energy(cfg.ionization, e_ev);
        const auto pops0 = populations(cfg.photodyn, mix_off, flux, e_ev);
        const auto popsB = populations(
            cfg.photodyn, field_mixing(b_mt, cfg.field_angle_deg), flux, e_ev);

        if (spec.kind == SweepKind::field) {
            pops_csv << format_double(x) << ',' << format_double(popsB.nv_minus.g0)
                     << ',' << format_double(popsB.nv_minus.g1) << ','
                     << format_double(popsB.nv_minus.e0) << ','
                     << format_double(popsB.nv_minus.e1) << ','
                     << format_double(popsB.nv_minus.s) << ','
                     << format_double(popsB.nv_zero.e) << '\n';
        } else {
            const double f_fixed = detail::eval_or_nan([&] {
                return pl_fraction(cfg.fixed_p, 1.0 - cfg.fixed_p, pops0, cfg.emission);
            });
            const double f_exc = detail::eval_or_nan([&] {
                auto sig_e = sig;
                sig_e.s_minus = 0.0;
                sig_e.g_minus = 0.0;
                const double p = balanced_rate_p(pops0, sig_e);
                return pl_fraction(p, 1.0 - p, pops0, cfg.emission);
            });
            const double f_full = detail::eval_or_nan([&] {
                const double p = detail::balanced_p_full(pops0, sig);
                return pl_fraction(p, 1.0 - p, pops0, cfg.emission);
            });
            const double f_donor = detail::eval_or_nan([&] {
                const DonorRegime regime = sig.g_minus > 0.0
                                               ? DonorRegime::single_photon
                                               : DonorRegime::two_photon;
                const auto st = donor_model(cfg.donor, pops0, sig, flux, regime);
                return pl_fraction(st.c_nvm, st.c_nv0, pops0, cfg.emission);
            });
            frac_csv << format_double(x) << ',' << format_double(f_fixed) << ','
                     << format_double(f_exc) << ',' << format_double(f_full) << ','
                     << format_double(f_donor) << '\n';
        }

        const double eps_fixed = detail::eval_or_nan([&] {
            return fixed_p_prediction(cfg.fixed_p, pops0, popsB, cfg.emission).epsilon;
        });
        double eps_bal = std::numeric_limits<double>::quiet_NaN();
        double del_bal = std::numeric_limits<double>::quiet_NaN();
        try {
            const auto pred = balanced_rate_contrasts(pops0, popsB, sig, cfg.emission);
            eps_bal = pred.epsilon;
            del_bal = pred.delta;
        } catch (const Error&) {
        }
        double eps_don = std::numeric_limits<double>::quiet_NaN();
        double del_don = std::numeric_limits<double>::quiet_NaN();
        try {
            const auto pred =
                donor_model_contrasts(cfg.donor, pops0, popsB, sig, flux);
            eps_don = pred.epsilon;
            del_don = pred.delta;
        } catch (const Error&) {
        }
        con_csv << format_double(x) << ',' << format_double(eps_fixed) << ','
                << format_double(eps_bal) << ',' << format_double(del_bal) << ','
                << format_double(eps_don) << ',' << format_double(del_don) << '\n';
    }

    if (spec.kind == SweepKind::field)
        out.files.push_back(pops_path.string());
    else
        out.files.push_back(frac_path.string());
    out.files.push_back(con_path.string());
    return out;
}

}  // namespace nvsep

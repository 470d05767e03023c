// Command-line front end: batch analysis, forward-model sweeps, synthetic
// data generation, and one-off unmixing / width fits.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nvsep/batch.hpp"
#include "nvsep/charge.hpp"
#include "nvsep/common.hpp"
#include "nvsep/config.hpp"
#include "nvsep/inference.hpp"
#include "nvsep/photodyn.hpp"
#include "nvsep/separate.hpp"
#include "nvsep/spectra.hpp"
#include "nvsep/synth.hpp"

namespace fs = std::filesystem;
using namespace nvsep;

namespace {

RunConfig load_config_or_default(const std::string& path) {
    return path.empty() ? RunConfig{} : load_config(path);
}

int cmd_analyze(const std::string& config_path, const std::string& manifest_path,
                const std::string& out_dir, std::uint64_t seed, unsigned jobs) {
    const RunConfig cfg = load_config_or_default(config_path);
    const auto entries = load_manifest(manifest_path);

    BatchOptions opt;
    opt.out_dir = out_dir;
    opt.master_seed = seed;
    opt.jobs = jobs;
    const BatchResult res = run_batch(cfg, entries, opt);

    for (const auto& r : res.pairs) {
        if (r.ok) {
            const auto& a = r.analysis;
            std::printf(
                "pair %4zu: eps = %+.5f +- %.5f  delta = %+.5f +- %.5f  "
                "alpha = %+.5f  pl_frac = %.4f\n",
                r.index, a.posterior.epsilon_mean, a.posterior.epsilon_sd,
                a.posterior.delta_mean, a.posterior.delta_sd, a.linewidth.alpha,
                a.pl_fraction_minus);
        } else {
            std::printf("pair %4zu: FAILED: %s\n", r.index, r.error.c_str());
        }
    }
    std::printf("%zu/%zu pairs analyzed, table: %s\n",
                res.pairs.size() - res.n_failed, res.pairs.size(),
                res.table_path.c_str());
    if (res.n_failed > 0) {
        std::printf("%zu pair(s) failed, details: %s\n", res.n_failed,
                    res.failures_path.c_str());
        return 1;
    }
    return 0;
}

int cmd_models(const std::string& config_path, const std::string& out_dir,
               const std::string& sweep, double from, double to, int points,
               double wavelength_nm, double power_uW, double field_mT) {
    const RunConfig cfg = load_config_or_default(config_path);

    SweepSpec spec;
    if (sweep == "wavelength") {
        spec.kind = SweepKind::wavelength;
        spec.from = 458.0;
        spec.to = 575.0;
        spec.points = 118;
    } else if (sweep == "power") {
        spec.kind = SweepKind::power;
        spec.from = 1.0;
        spec.to = 40.0;
        spec.points = 79;
    } else {
        spec.kind = SweepKind::field;
        spec.from = 0.0;
        spec.to = 300.0;
        spec.points = 121;
    }
    if (std::isfinite(from)) spec.from = from;
    if (std::isfinite(to)) spec.to = to;
    if (points > 0) spec.points = points;
    spec.wavelength_nm = wavelength_nm;
    spec.power_uW = power_uW;
    spec.field_mT = field_mT;

    const auto res = run_models(cfg, spec, out_dir);
    for (const auto& f : res.files) std::printf("wrote %s\n", f.c_str());
    return 0;
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed, int pairs, bool grid,
              double epsilon, double delta, double alpha, double background,
              const std::string& noise, double sigma0, double sigmaB) {
    fs::create_directories(out_dir);

    SynthTruth base = default_truth();
    base.epsilon = epsilon;
    base.delta = delta;
    base.alpha = alpha;
    base.background = background;
    base.noise = noise == "poisson" ? NoiseKind::poisson : NoiseKind::gaussian;
    if (sigma0 >= 0.0) base.sigma0 = sigma0;
    if (sigmaB >= 0.0) base.sigmaB = sigmaB;

    struct Setting {
        double temperature_K, wavelength_nm, power_uW;
    };
    std::vector<Setting> settings;
    if (grid) {
        const double temps[] = {1.6, 4.0, 10.0, 25.0, 50.0, 100.0, 150.0, 225.0, 295.0};
        const double lams[] = {458.0, 476.0, 488.0, 497.0, 502.0, 515.0, 532.0,
                               550.0, 560.0};
        const double pows[] = {2.5, 5.0, 10.0, 20.0, 40.0};
        for (double p : pows)
            for (double t : temps)
                for (double l : lams) settings.push_back({t, l, p});
    } else {
        for (int i = 0; i < pairs; ++i) settings.push_back({295.0, 532.0, 10.0});
    }

    std::vector<ManifestEntry> manifest;
    json truth_json = json::array();
    for (std::size_t i = 0; i < settings.size(); ++i) {
        SynthTruth t = base;
        // Excitation power scales the emission linearly in this synthetic
        // model; temperature and wavelength are carried as plain metadata.
        const double scale = settings[i].power_uW / 10.0;
        t.nv_minus.zpl_amplitude *= scale;
        t.nv_zero.zpl_amplitude *= scale;
        for (auto& b : t.nv_minus.sidebands) b.amplitude *= scale;
        for (auto& b : t.nv_zero.sidebands) b.amplitude *= scale;

        const std::uint64_t pair_seed = derive_seed(seed, i);
        const SynthPair sp = generate_pair(t, pair_seed);

        char off_name[32], on_name[32];
        std::snprintf(off_name, sizeof off_name, "pair_%04zu_off.csv", i);
        std::snprintf(on_name, sizeof on_name, "pair_%04zu_on.csv", i);
        save_spectrum(fs::path(out_dir) / off_name, sp.pair.off);
        save_spectrum(fs::path(out_dir) / on_name, sp.pair.on);

        ManifestEntry e;
        e.off = off_name;
        e.on = on_name;
        e.field_mT = sp.pair.field_mT;
        e.temperature_K = settings[i].temperature_K;
        e.wavelength_nm = settings[i].wavelength_nm;
        e.power_uW = settings[i].power_uW;
        manifest.push_back(e);

        truth_json.push_back({{"index", i},
                              {"seed", pair_seed},
                              {"epsilon", t.epsilon},
                              {"delta", t.delta},
                              {"alpha", t.alpha},
                              {"background", t.background},
                              {"sigma0", t.sigma0},
                              {"sigmaB", t.sigmaB},
                              {"amplitude_scale", scale}});
    }

    save_manifest(fs::path(out_dir) / "manifest.json", manifest);
    {
        const auto tpath = fs::path(out_dir) / "truth.json";
        std::ofstream out(tpath);
        if (!out) throw Error("synth: cannot open " + tpath.string() + " for writing");
        out << truth_json.dump(2) << '\n';
    }
    std::printf("wrote %zu pair(s) to %s\n", settings.size(), out_dir.c_str());
    return 0;
}

int cmd_unmix(const std::string& config_path, const std::string& off_path,
              const std::string& on_path, const std::string& out_path, double epsilon,
              double delta, double background, double field_mT) {
    const RunConfig cfg = load_config_or_default(config_path);
    const SpectrumPair pair = load_spectrum_pair(off_path, on_path, field_mT);

    double c = background;
    if (!std::isfinite(c)) {
        // No explicit constant: pool the background zone of both spectra.
        const auto bg = background_posterior(pair, cfg.zones.bg);
        c = bg.mean;
    }
    const auto sep = unmix(pair, epsilon, delta, c, cfg.unmix_min_separation);
    detail::save_separated(out_path, sep);

    const Interval span{pair.off.wavelength_nm.front(), pair.off.wavelength_nm.back()};
    std::printf("background C = %.6g\n", c);
    std::printf("integrated I- = %.6g, I0 = %.6g\n",
                integrate_intensity(sep.i_minus, span),
                integrate_intensity(sep.i_zero, span));
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
}

int cmd_linewidth(const std::string& config_path, const std::string& off_path,
                  const std::string& on_path, const std::string& out_path,
                  std::uint64_t seed, double center, double half_width,
                  double field_mT) {
    RunConfig cfg = load_config_or_default(config_path);
    if (std::isfinite(center)) cfg.linewidth_center_nm = center;
    if (std::isfinite(half_width)) cfg.linewidth_half_width_nm = half_width;

    const SpectrumPair pair = load_spectrum_pair(off_path, on_path, field_mT);
    const Interval window = linewidth_window(cfg, pair.off);
    const LinewidthFit fit = linewidth_contrast(pair, window, seed);
    const double alpha_sd = linewidth_alpha_sd(pair, window, fit);

    json j = {{"alpha", fit.alpha},        {"alpha_sd", alpha_sd},
              {"shift", fit.shift},        {"vscale", fit.vscale},
              {"residual_rms", fit.residual_rms},
              {"window", {window.lo, window.hi}}};
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out)
            throw Error("linewidth: cannot open " + out_path + " for writing");
        out << j.dump(2) << '\n';
    }
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NV center charge-state spectral separation toolkit"};
    app.require_subcommand(1);

    const double unset = std::numeric_limits<double>::quiet_NaN();

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Run the batch pipeline over a manifest");
    std::string an_manifest, an_config, an_out = "out";
    std::uint64_t an_seed = 1;
    unsigned an_jobs = 1;
    analyze->add_option("manifest", an_manifest, "Pair manifest JSON")
        ->required()
        ->check(CLI::ExistingFile);
    analyze->add_option("--config", an_config, "Run configuration JSON")
        ->check(CLI::ExistingFile);
    analyze->add_option("--seed", an_seed, "Master RNG seed");
    analyze->add_option("--jobs", an_jobs, "Worker thread count");
    analyze->add_option("--out", an_out, "Output directory");

    // models
    auto* models = app.add_subcommand("models", "Write forward-model sweep tables");
    std::string mo_config, mo_out = "models", mo_sweep = "wavelength";
    double mo_from = unset, mo_to = unset;
    int mo_points = 0;
    double mo_wavelength = 532.0, mo_power = 10.0, mo_field = 100.0;
    models->add_option("--config", mo_config, "Run configuration JSON")
        ->check(CLI::ExistingFile);
    models->add_option("--out", mo_out, "Output directory");
    models->add_option("--sweep", mo_sweep, "Swept axis")
        ->check(CLI::IsMember({"wavelength", "power", "field"}));
    models->add_option("--from", mo_from, "Sweep start (axis units)");
    models->add_option("--to", mo_to, "Sweep end (axis units)");
    models->add_option("--points", mo_points, "Sweep point count");
    models->add_option("--wavelength", mo_wavelength, "Fixed excitation wavelength [nm]");
    models->add_option("--power", mo_power, "Fixed excitation power [uW]");
    models->add_option("--field", mo_field, "Fixed field magnitude [mT]");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate synthetic spectrum pairs");
    std::string sy_out = "synth", sy_noise = "gaussian";
    std::uint64_t sy_seed = 1;
    int sy_pairs = 1;
    bool sy_grid = false;
    double sy_eps = 0.15, sy_delta = -0.03, sy_alpha = 0.0, sy_bg = 120.0;
    double sy_sigma0 = -1.0, sy_sigmaB = -1.0;
    synth->add_option("--out", sy_out, "Output directory");
    synth->add_option("--seed", sy_seed, "Master RNG seed");
    synth->add_option("--pairs", sy_pairs, "Number of pairs")->check(CLI::PositiveNumber);
    synth->add_flag("--grid", sy_grid,
                    "Full 9 temperature x 9 wavelength x 5 power grid (405 pairs)");
    synth->add_option("--epsilon", sy_eps, "True NV- contrast");
    synth->add_option("--delta", sy_delta, "True NV0 contrast");
    synth->add_option("--alpha", sy_alpha, "True fractional width change under field");
    synth->add_option("--background", sy_bg, "Constant background level [counts]");
    synth->add_option("--noise", sy_noise, "Noise model")
        ->check(CLI::IsMember({"gaussian", "poisson"}));
    synth->add_option("--sigma0", sy_sigma0, "Off-spectrum noise sd (<0 keeps default)");
    synth->add_option("--sigmaB", sy_sigmaB, "On-spectrum noise sd (<0 keeps default)");

    // unmix
    auto* unmix_cmd = app.add_subcommand("unmix", "Separate one pair at given contrasts");
    std::string um_config, um_off, um_on, um_out = "separated.csv";
    double um_eps = 0.0, um_delta = 0.0, um_bg = unset, um_field = 100.0;
    unmix_cmd->add_option("off", um_off, "Field-off spectrum CSV")
        ->required()
        ->check(CLI::ExistingFile);
    unmix_cmd->add_option("on", um_on, "Field-on spectrum CSV")
        ->required()
        ->check(CLI::ExistingFile);
    unmix_cmd->add_option("--config", um_config, "Run configuration JSON")
        ->check(CLI::ExistingFile);
    unmix_cmd->add_option("--epsilon", um_eps, "NV- contrast")->required();
    unmix_cmd->add_option("--delta", um_delta, "NV0 contrast")->required();
    unmix_cmd->add_option("--background", um_bg,
                          "Constant background (default: background-zone mean)");
    unmix_cmd->add_option("--field", um_field, "Field magnitude [mT], metadata only");
    unmix_cmd->add_option("--out", um_out, "Output CSV path");

    // linewidth
    auto* lw = app.add_subcommand("linewidth", "Fit the NV- ZPL width change");
    std::string lw_config, lw_off, lw_on, lw_out;
    std::uint64_t lw_seed = 1;
    double lw_center = unset, lw_half = unset, lw_field = 100.0;
    lw->add_option("off", lw_off, "Field-off spectrum CSV")
        ->required()
        ->check(CLI::ExistingFile);
    lw->add_option("on", lw_on, "Field-on spectrum CSV")
        ->required()
        ->check(CLI::ExistingFile);
    lw->add_option("--config", lw_config, "Run configuration JSON")
        ->check(CLI::ExistingFile);
    lw->add_option("--seed", lw_seed, "Optimizer restart seed");
    lw->add_option("--center", lw_center, "Window center [nm] (default: zone peak)");
    lw->add_option("--half-width", lw_half, "Window half width [nm]");
    lw->add_option("--field", lw_field, "Field magnitude [mT], metadata only");
    lw->add_option("--out", lw_out, "Also write the fit JSON here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze->parsed())
            return cmd_analyze(an_config, an_manifest, an_out, an_seed, an_jobs);
        if (models->parsed())
            return cmd_models(mo_config, mo_out, mo_sweep, mo_from, mo_to, mo_points,
                              mo_wavelength, mo_power, mo_field);
        if (synth->parsed())
            return cmd_synth(sy_out, sy_seed, sy_pairs, sy_grid, sy_eps, sy_delta,
                             sy_alpha, sy_bg, sy_noise, sy_sigma0, sy_sigmaB);
        if (unmix_cmd->parsed())
            return cmd_unmix(um_config, um_off, um_on, um_out, um_eps, um_delta,
                             um_bg, um_field);
        if (lw->parsed())
            return cmd_linewidth(lw_config, lw_off, lw_on, lw_out, lw_seed, lw_center,
                                 lw_half, lw_field);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

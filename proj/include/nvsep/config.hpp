#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvsep/charge.hpp"
#include "nvsep/common.hpp"
#include "nvsep/inference.hpp"
#include "nvsep/photodyn.hpp"
#include "nvsep/spectra.hpp"

namespace nvsep {

using json = nlohmann::json;

// Whole-run configuration with working defaults; JSON configs override
// individual fields, anything omitted keeps its default.
struct RunConfig {
    ZoneSet zones{{553.0, 565.0}, {572.0, 579.0}, {634.0, 641.0}};
    PriorConfig prior;
    PhotodynModel photodyn;
    IonizationCrossSections ionization;
    EmissionConstants emission;
    DonorConfig donor;
    double fixed_p = 0.66;          // dark NV- fraction for the fixed-balance model
    double pl_w = 1.0;              // weighting constant of the wavelength-only form
    double field_mT = 100.0;
    double field_angle_deg = 54.7356;  // [001] field against the NV axes
    double flux_per_uW = 3.4e6;     // photons/(nm^2 s) per uW, 1 um spot at 532 nm
    double linewidth_center_nm = 0.0;  // 0 = off-spectrum peak inside the NV- zone
    double linewidth_half_width_nm = 1.5;
    double unmix_min_separation = 1e-3;
};

namespace detail {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void get_interval(const json& j, const char* key, Interval& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2)
        throw ParseError(std::string("config: '") + key + "' must be a [lo, hi] pair");
    out.lo = v[0].get<double>();
    out.hi = v[1].get<double>();
}

inline void get_range(const json& j, const char* key, std::array<double, 2>& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2)
        throw ParseError(std::string("config: '") + key + "' must be a [lo, hi] pair");
    out[0] = v[0].get<double>();
    out[1] = v[1].get<double>();
}

inline void apply_cross_section(const json& j, CrossSectionModel& m) {
    get_if(j, "sigma0_nm2", m.sigma0_nm2);
    get_if(j, "e_max_ev", m.e_max_ev);
    get_if(j, "width_ev", m.width_ev);
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    if (j.contains("zones")) {
        const auto& z = j.at("zones");
        detail::get_interval(z, "bg", c.zones.bg);
        detail::get_interval(z, "zpl0", c.zones.zpl0);
        detail::get_interval(z, "zpl_minus", c.zones.zpl_minus);
    }
    if (j.contains("prior")) {
        const auto& p = j.at("prior");
        detail::get_range(p, "epsilon_range", c.prior.epsilon_range);
        detail::get_range(p, "delta_range", c.prior.delta_range);
        detail::get_if(p, "m_scale", c.prior.m_scale);
        detail::get_if(p, "b_scale", c.prior.b_scale);
        detail::get_if(p, "n_particles", c.prior.n_particles);
        detail::get_if(p, "ess_threshold", c.prior.ess_threshold);
        detail::get_if(p, "jitter_scale", c.prior.jitter_scale);
    }
    if (j.contains("photodyn")) {
        const auto& p = j.at("photodyn");
        if (p.contains("nv_minus")) {
            const auto& m = p.at("nv_minus");
            detail::get_if(m, "k_eg", c.photodyn.minus.k_eg);
            detail::get_if(m, "k_isc_up0", c.photodyn.minus.k_isc_up0);
            detail::get_if(m, "k_isc_up1", c.photodyn.minus.k_isc_up1);
            detail::get_if(m, "k_isc_down0", c.photodyn.minus.k_isc_down0);
            detail::get_if(m, "k_isc_down1", c.photodyn.minus.k_isc_down1);
            detail::get_if(m, "pump_scale", c.photodyn.minus.pump_scale);
            if (m.contains("absorption"))
                detail::apply_cross_section(m.at("absorption"),
                                            c.photodyn.minus.absorption);
        }
        if (p.contains("nv_zero")) {
            const auto& z = p.at("nv_zero");
            detail::get_if(z, "k_eg", c.photodyn.zero.k_eg);
            detail::get_if(z, "pump_scale", c.photodyn.zero.pump_scale);
            if (z.contains("absorption"))
                detail::apply_cross_section(z.at("absorption"),
                                            c.photodyn.zero.absorption);
        }
    }
    if (j.contains("ionization")) {
        const auto& s = j.at("ionization");
        detail::get_if(s, "sigma_e_minus", c.ionization.sigma_e_minus);
        detail::get_if(s, "sigma_s_minus", c.ionization.sigma_s_minus);
        detail::get_if(s, "sigma_g_minus", c.ionization.sigma_g_minus);
        detail::get_if(s, "sigma_e_zero", c.ionization.sigma_e_zero);
        detail::get_if(s, "thr_e_minus_ev", c.ionization.thr_e_minus_ev);
        detail::get_if(s, "thr_s_minus_ev", c.ionization.thr_s_minus_ev);
        detail::get_if(s, "thr_g_minus_ev", c.ionization.thr_g_minus_ev);
        detail::get_if(s, "thr_e_zero_ev", c.ionization.thr_e_zero_ev);
    }
    if (j.contains("emission")) {
        const auto& e = j.at("emission");
        detail::get_if(e, "k_eg_minus", c.emission.k_eg_minus);
        detail::get_if(e, "k_eg_zero", c.emission.k_eg_zero);
    }
    if (j.contains("donor")) {
        const auto& d = j.at("donor");
        detail::get_if(d, "c_nvm_star", c.donor.c_nvm_star);
        detail::get_if(d, "c_nv0_star", c.donor.c_nv0_star);
        detail::get_if(d, "c_nplus_star", c.donor.c_nplus_star);
        detail::get_if(d, "gamma_e_nplus", c.donor.gamma_e_nplus);
        detail::get_if(d, "gamma_e_nv0", c.donor.gamma_e_nv0);
        detail::get_if(d, "gamma_h_nvm", c.donor.gamma_h_nvm);
        detail::get_if(d, "sigma_n0_nm2", c.donor.sigma_n0_nm2);
    }
    detail::get_if(j, "fixed_p", c.fixed_p);
    detail::get_if(j, "pl_w", c.pl_w);
    detail::get_if(j, "field_mT", c.field_mT);
    detail::get_if(j, "field_angle_deg", c.field_angle_deg);
    detail::get_if(j, "flux_per_uW", c.flux_per_uW);
    detail::get_if(j, "linewidth_center_nm", c.linewidth_center_nm);
    detail::get_if(j, "linewidth_half_width_nm", c.linewidth_half_width_nm);
    detail::get_if(j, "unmix_min_separation", c.unmix_min_separation);
    return c;
}

inline json config_to_json(const RunConfig& c) {
    json j;
    j["zones"] = {{"bg", {c.zones.bg.lo, c.zones.bg.hi}},
                  {"zpl0", {c.zones.zpl0.lo, c.zones.zpl0.hi}},
                  {"zpl_minus", {c.zones.zpl_minus.lo, c.zones.zpl_minus.hi}}};
    j["prior"] = {{"epsilon_range", c.prior.epsilon_range},
                  {"delta_range", c.prior.delta_range},
                  {"m_scale", c.prior.m_scale},
                  {"b_scale", c.prior.b_scale},
                  {"n_particles", c.prior.n_particles},
                  {"ess_threshold", c.prior.ess_threshold},
                  {"jitter_scale", c.prior.jitter_scale}};
    j["photodyn"] = {
        {"nv_minus",
         {{"k_eg", c.photodyn.minus.k_eg},
          {"k_isc_up0", c.photodyn.minus.k_isc_up0},
          {"k_isc_up1", c.photodyn.minus.k_isc_up1},
          {"k_isc_down0", c.photodyn.minus.k_isc_down0},
          {"k_isc_down1", c.photodyn.minus.k_isc_down1},
          {"pump_scale", c.photodyn.minus.pump_scale},
          {"absorption",
           {{"sigma0_nm2", c.photodyn.minus.absorption.sigma0_nm2},
            {"e_max_ev", c.photodyn.minus.absorption.e_max_ev},
            {"width_ev", c.photodyn.minus.absorption.width_ev}}}}},
        {"nv_zero",
         {{"k_eg", c.photodyn.zero.k_eg},
          {"pump_scale", c.photodyn.zero.pump_scale},
          {"absorption",
           {{"sigma0_nm2", c.photodyn.zero.absorption.sigma0_nm2},
            {"e_max_ev", c.photodyn.zero.absorption.e_max_ev},
            {"width_ev", c.photodyn.zero.absorption.width_ev}}}}}};
    j["ionization"] = {{"sigma_e_minus", c.ionization.sigma_e_minus},
                       {"sigma_s_minus", c.ionization.sigma_s_minus},
                       {"sigma_g_minus", c.ionization.sigma_g_minus},
                       {"sigma_e_zero", c.ionization.sigma_e_zero},
                       {"thr_e_minus_ev", c.ionization.thr_e_minus_ev},
                       {"thr_s_minus_ev", c.ionization.thr_s_minus_ev},
                       {"thr_g_minus_ev", c.ionization.thr_g_minus_ev},
                       {"thr_e_zero_ev", c.ionization.thr_e_zero_ev}};
    j["emission"] = {{"k_eg_minus", c.emission.k_eg_minus},
                     {"k_eg_zero", c.emission.k_eg_zero}};
    j["donor"] = {{"c_nvm_star", c.donor.c_nvm_star},
                  {"c_nv0_star", c.donor.c_nv0_star},
                  {"c_nplus_star", c.donor.c_nplus_star},
                  {"gamma_e_nplus", c.donor.gamma_e_nplus},
                  {"gamma_e_nv0", c.donor.gamma_e_nv0},
                  {"gamma_h_nvm", c.donor.gamma_h_nvm},
                  {"sigma_n0_nm2", c.donor.sigma_n0_nm2}};
    j["fixed_p"] = c.fixed_p;
    j["pl_w"] = c.pl_w;
    j["field_mT"] = c.field_mT;
    j["field_angle_deg"] = c.field_angle_deg;
    j["flux_per_uW"] = c.flux_per_uW;
    j["linewidth_center_nm"] = c.linewidth_center_nm;
    j["linewidth_half_width_nm"] = c.linewidth_half_width_nm;
    j["unmix_min_separation"] = c.unmix_min_separation;
    return j;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("load_config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("load_config: " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

// One measurement pair in a batch manifest. Spectrum paths are stored as
// given; relative paths resolve against the manifest's own directory.
struct ManifestEntry {
    std::string off;
    std::string on;
    double field_mT = 100.0;
    double temperature_K = 295.0;
    double wavelength_nm = 532.0;
    double power_uW = 10.0;
};

inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("load_manifest: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("load_manifest: " + path.string() + ": " + e.what());
    }
    if (!j.is_array())
        throw ParseError("load_manifest: " + path.string() + ": top level must be an array");

    const auto dir = path.parent_path();
    std::vector<ManifestEntry> entries;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        ManifestEntry m;
        try {
            m.off = e.at("off").get<std::string>();
            m.on = e.at("on").get<std::string>();
            detail::get_if(e, "field_mT", m.field_mT);
            detail::get_if(e, "temperature_K", m.temperature_K);
            detail::get_if(e, "wavelength_nm", m.wavelength_nm);
            detail::get_if(e, "power_uW", m.power_uW);
        } catch (const json::exception& ex) {
            throw ParseError("load_manifest: entry " + std::to_string(i) + ": " +
                             ex.what());
        }
        auto resolve = [&](const std::string& p) {
            std::filesystem::path fp(p);
            return fp.is_absolute() ? fp.string() : (dir / fp).string();
        };
        m.off = resolve(m.off);
        m.on = resolve(m.on);
        entries.push_back(std::move(m));
    }
    return entries;
}

inline void save_manifest(const std::filesystem::path& path,
                          const std::vector<ManifestEntry>& entries) {
    json j = json::array();
    for (const auto& e : entries)
        j.push_back({{"off", e.off},
                     {"on", e.on},
                     {"field_mT", e.field_mT},
                     {"temperature_K", e.temperature_K},
                     {"wavelength_nm", e.wavelength_nm},
                     {"power_uW", e.power_uW}});
    std::ofstream out(path);
    if (!out)
        throw Error("save_manifest: cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

}  // namespace nvsep

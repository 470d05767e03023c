#pragma once

#include <cmath>
#include <string>

#include "nvsep/common.hpp"
#include "nvsep/photodyn.hpp"

namespace nvsep {

// Photoionization / recombination cross sections [nm^2] with hard energy
// cutoffs: a channel contributes nothing below its threshold.
struct IonizationCrossSections {
    double sigma_e_minus = 2.0e-3;  // NV- excited -> conduction band
    double sigma_s_minus = 1.0e-3;  // NV- singlet shelf -> conduction band
    double sigma_g_minus = 5.0e-4;  // NV- ground -> conduction band
    double sigma_e_zero = 2.0e-3;   // hole promotion from the NV0 excited state

    double thr_e_minus_ev = 0.0;
    double thr_s_minus_ev = 2.25;   // singlet shelf sits 2.25 eV below the band
    double thr_g_minus_ev = 2.556;  // ground-state single-photon threshold (485 nm)
    double thr_e_zero_ev = 0.0;
};

inline void validate_cross_sections(const IonizationCrossSections& s) {
    if (s.sigma_e_minus < 0 || s.sigma_s_minus < 0 || s.sigma_g_minus < 0 ||
        s.sigma_e_zero < 0)
        throw ValidationError("IonizationCrossSections: cross sections must be >= 0");
    if (s.thr_e_minus_ev < 0 || s.thr_s_minus_ev < 0 || s.thr_g_minus_ev < 0 ||
        s.thr_e_zero_ev < 0)
        throw ValidationError("IonizationCrossSections: thresholds must be >= 0");
}

// Channel values at one photon energy, cutoffs already applied.
struct EffectiveCrossSections {
    double e_minus = 0.0;
    double s_minus = 0.0;
    double g_minus = 0.0;
    double e_zero = 0.0;
};

inline EffectiveCrossSections at_energy(const IonizationCrossSections& s,
                                        double e_phot_ev) {
    validate_cross_sections(s);
    if (e_phot_ev <= 0.0)
        throw ValidationError("at_energy: photon energy must be positive");
    EffectiveCrossSections e;
    e.e_minus = e_phot_ev >= s.thr_e_minus_ev ? s.sigma_e_minus : 0.0;
    e.s_minus = e_phot_ev >= s.thr_s_minus_ev ? s.sigma_s_minus : 0.0;
    e.g_minus = e_phot_ev >= s.thr_g_minus_ev ? s.sigma_g_minus : 0.0;
    e.e_zero = e_phot_ev >= s.thr_e_zero_ev ? s.sigma_e_zero : 0.0;
    return e;
}

struct EmissionConstants {
    double k_eg_minus = 6.5e7;
    double k_eg_zero = 5.2e7;
};

inline void validate_emission(const EmissionConstants& k) {
    if (k.k_eg_minus <= 0 || k.k_eg_zero <= 0)
        throw ValidationError("EmissionConstants: emission rates must be positive");
}

// Field-quenching contrasts plus the charge balance they came from.
// epsilon and delta follow the sign convention that positive values mean the
// species dims when the field is applied.
struct ChargePrediction {
    double epsilon = 0.0;
    double delta = 0.0;
    double pl_ratio = 0.0;  // I0 / I-
    double p = 0.0;         // NV- fraction of the NV population
};

// Charge balance frozen at p0 regardless of field: all field response comes
// from the intrinsic excited-state quenching, so delta is identically zero.
inline ChargePrediction fixed_p_prediction(double p0, const StatePopulations& off,
                                           const StatePopulations& on,
                                           const EmissionConstants& k) {
    if (!(p0 > 0.0 && p0 < 1.0))
        throw ValidationError("fixed_p_prediction: p0 must lie in (0, 1)");
    validate_emission(k);
    ChargePrediction out;
    out.p = p0;
    out.epsilon = epsilon_intrinsic(off, on);
    out.delta = 0.0;
    if (!(off.n_e_minus() > 0.0))
        throw ModelError("fixed_p_prediction: zero NV- excited population");
    out.pl_ratio = ((1.0 - p0) / p0) * (off.n_e_zero() / off.n_e_minus()) *
                   (k.k_eg_zero / k.k_eg_minus);
    return out;
}

// NV- fraction that balances ionization against recombination:
// p (n_e- sig_e- + n_s- sig_s-) = (1 - p) n_e0 sig_e0.
inline double balanced_rate_p(const StatePopulations& pops,
                              const EffectiveCrossSections& sig) {
    const double ion = pops.n_e_minus() * sig.e_minus + pops.n_s_minus() * sig.s_minus;
    const double rec = pops.n_e_zero() * sig.e_zero;
    if (!(ion + rec > 0.0))
        throw ModelError("balanced_rate_p: no active charge-transfer channel");
    return rec / (ion + rec);
}

// Contrasts when the charge balance re-equilibrates under field. With the
// singlet channel closed the NV- and NV0 contrasts collapse onto each other.
inline ChargePrediction balanced_rate_contrasts(const StatePopulations& off,
                                                const StatePopulations& on,
                                                const EffectiveCrossSections& sig,
                                                const EmissionConstants& k) {
    validate_emission(k);
    const double a = off.n_e_minus();
    const double b = on.n_e_minus();
    const double s0 = off.n_s_minus();
    const double sB = on.n_s_minus();
    const double rec = off.n_e_zero() * sig.e_zero;
    if (!(a > 0.0))
        throw ModelError("balanced_rate_contrasts: zero NV- excited population at B = 0");

    const double denom_on = b * sig.e_minus + sB * sig.s_minus + rec;
    const double ion_off = a * sig.e_minus + s0 * sig.s_minus;
    if (!(denom_on > 0.0) || !(ion_off + rec > 0.0))
        throw ModelError("balanced_rate_contrasts: no active charge-transfer channel");

    ChargePrediction out;
    out.epsilon = (rec * (a - b) + sig.s_minus * (sB * a - s0 * b)) / (denom_on * a);
    if (!(ion_off > 0.0))
        throw ModelError("balanced_rate_contrasts: no ionization channel at B = 0");
    out.delta = rec * ((a - b) * sig.e_minus + (s0 - sB) * sig.s_minus) /
                (ion_off * denom_on);
    if (!(sig.e_zero > 0.0))
        throw ModelError("balanced_rate_contrasts: recombination channel absent, "
                         "PL ratio undefined");
    out.pl_ratio = (ion_off / (a * sig.e_zero)) * (k.k_eg_zero / k.k_eg_minus);
    out.p = balanced_rate_p(off, sig);
    return out;
}

// Low-doping two-photon limit: intensity ratio set entirely by cross sections
// and radiative rates, hence field-independent.
inline double low_doping_ratio(double sigma_3e, double sigma_2a,
                               const EmissionConstants& k) {
    validate_emission(k);
    if (!(sigma_3e > 0.0) || !(sigma_2a > 0.0))
        throw ValidationError("low_doping_ratio: cross sections must be positive");
    return sigma_3e * k.k_eg_zero / (sigma_2a * k.k_eg_minus);
}

struct CarrierPerturbation {
    double x_exact = 0.0;
    double x_approx = 0.0;
    double residual = 0.0;  // quadratic evaluated at x_exact
};

// Perturbation x of the NV- fraction p' when weak carrier generation/capture
// channels A and B open. Quadratic in x:
//   [A - B - 1 + 2p'] x^2 + [-2A(1-p') - 2Bp' - p'(1-p')] x
//     + [(1-p')^2 A - p'^2 B] = 0.
// x_exact is the admissible root of smallest magnitude (p' + x must stay in
// [0, 1]); x_approx drops the quadratic term.
inline CarrierPerturbation carrier_perturbation(double p_prime, double A, double B) {
    if (!(p_prime > 0.0 && p_prime < 1.0))
        throw ValidationError("carrier_perturbation: p' must lie in (0, 1)");
    if (A < 0.0 || B < 0.0)
        throw ValidationError("carrier_perturbation: A and B must be >= 0");

    const double a = A - B - 1.0 + 2.0 * p_prime;
    const double b = -2.0 * A * (1.0 - p_prime) - 2.0 * B * p_prime -
                     p_prime * (1.0 - p_prime);
    const double c = (1.0 - p_prime) * (1.0 - p_prime) * A - p_prime * p_prime * B;

    CarrierPerturbation out;
    if (c == 0.0) {
        out.x_exact = 0.0;
    } else if (a == 0.0) {
        out.x_exact = -c / b;
    } else {
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0)
            throw ModelError("carrier_perturbation: no real root");
        // Citardauq form for the small root avoids cancellation.
        const double q = -0.5 * (b + (b >= 0 ? 1.0 : -1.0) * std::sqrt(disc));
        const double r1 = q / a;
        const double r2 = c / q;
        double best = std::numeric_limits<double>::quiet_NaN();
        for (double r : {r2, r1}) {
            const double p = p_prime + r;
            if (p >= 0.0 && p <= 1.0 && (!std::isfinite(best) || std::abs(r) < std::abs(best)))
                best = r;
        }
        if (!std::isfinite(best))
            throw ModelError("carrier_perturbation: no admissible root keeps p in [0, 1]");
        out.x_exact = best;
    }
    out.x_approx = b != 0.0 ? -c / b : 0.0;
    out.residual = (a * out.x_exact + b) * out.x_exact + c;
    return out;
}

// Dark concentrations [ppm] and capture constants for the nitrogen-donor
// charge reservoir. The gamma ratio >= 10 keeps the Coulomb-capture
// hierarchy the model assumes.
struct DonorConfig {
    double c_nvm_star = 3.0;
    double c_nv0_star = 1.5;
    double c_nplus_star = 3.0;
    double gamma_e_nplus = 10.0;  // e- capture by N+ [nm^3/s]
    double gamma_e_nv0 = 1.0;     // e- capture by NV0
    double gamma_h_nvm = 10.0;    // h+ capture by NV-
    double sigma_n0_nm2 = 1.0e-3; // N0 single-photon ionization
};

inline void validate_donor(const DonorConfig& d) {
    if (d.c_nvm_star <= 0 || d.c_nv0_star <= 0 || d.c_nplus_star <= 0)
        throw ValidationError("DonorConfig: dark concentrations must be positive");
    if (d.gamma_e_nplus <= 0 || d.gamma_e_nv0 <= 0 || d.gamma_h_nvm <= 0 ||
        d.sigma_n0_nm2 <= 0)
        throw ValidationError("DonorConfig: capture constants must be positive");
}

enum class DonorRegime { two_photon, single_photon };

struct DonorState {
    double c_n0 = 0.0;    // illuminated N0 concentration
    double c_nvm = 0.0;
    double c_nv0 = 0.0;
    double c_nplus = 0.0;
    double gamma_nvm = 0.0;  // per-center NV- ionization rate [1/s]
    double gamma_n0 = 0.0;   // per-center N0 ionization rate [1/s]
};

// NV- per-center ionization rate through every open channel.
inline double nvm_ionization_rate(const StatePopulations& pops,
                                  const EffectiveCrossSections& sig, double flux) {
    return flux * (pops.n_e_minus() * sig.e_minus + pops.n_s_minus() * sig.s_minus +
                   pops.n_g_minus() * sig.g_minus);
}

inline DonorState donor_model(const DonorConfig& cfg, const StatePopulations& pops,
                              const EffectiveCrossSections& sig, double flux,
                              DonorRegime regime) {
    validate_donor(cfg);
    if (flux < 0.0)
        throw ValidationError("donor_model: flux must be >= 0");
    if (cfg.gamma_e_nplus / cfg.gamma_e_nv0 < 10.0)
        throw ModelError("donor_model: capture hierarchy gamma_e(N+)/gamma_e(NV0) < 10, "
                         "model assumptions do not hold");

    DonorState st;
    st.gamma_nvm = nvm_ionization_rate(pops, sig, flux);
    st.gamma_n0 = cfg.sigma_n0_nm2 * flux;

    if (regime == DonorRegime::two_photon) {
        if (sig.g_minus > 0.0)
            throw ModelError("donor_model: two-photon regime requires the ground "
                             "ionization channel to be closed at this photon energy");
        if (flux == 0.0) {
            st.c_n0 = 0.0;
        } else {
            st.c_n0 = (st.gamma_nvm / st.gamma_n0) *
                      (cfg.gamma_e_nplus / cfg.gamma_e_nv0) *
                      (cfg.c_nplus_star * cfg.c_nvm_star / cfg.c_nv0_star);
        }
    } else {
        // Nearly complete NV- ionization, corrected at first order in the
        // capture ratio so the concentrations stay strictly admissible.
        st.c_n0 = cfg.c_nvm_star * (1.0 - cfg.gamma_e_nv0 / cfg.gamma_e_nplus);
    }

    if (st.c_n0 > cfg.c_nplus_star || st.c_n0 > cfg.c_nvm_star)
        throw ModelError("donor_model: illuminated N0 concentration " +
                         std::to_string(st.c_n0) +
                         " ppm exceeds a dark reservoir, outside model validity");

    st.c_nvm = cfg.c_nvm_star - st.c_n0;
    st.c_nv0 = cfg.c_nv0_star + st.c_n0;
    st.c_nplus = cfg.c_nplus_star - st.c_n0;
    return st;
}

// Contrasts from the donor reservoir: epsilon is the intrinsic excited-state
// change, delta tracks the field-induced shift of the charge balance.
inline ChargePrediction donor_model_contrasts(const DonorConfig& cfg,
                                              const StatePopulations& off,
                                              const StatePopulations& on,
                                              const EffectiveCrossSections& sig,
                                              double flux) {
    // Past the single-photon threshold the N0 concentration pins to the dark
    // NV- reservoir for either field setting, so delta collapses to zero.
    const DonorRegime regime = sig.g_minus > 0.0 ? DonorRegime::single_photon
                                                 : DonorRegime::two_photon;
    const DonorState d_off = donor_model(cfg, off, sig, flux, regime);
    const DonorState d_on = donor_model(cfg, on, sig, flux, regime);

    ChargePrediction out;
    out.epsilon = epsilon_intrinsic(off, on);
    if (!(d_off.c_nv0 > 0.0))
        throw ModelError("donor_model_contrasts: zero NV0 concentration");
    out.delta = (d_off.c_n0 - d_on.c_n0) / d_off.c_nv0;
    out.p = d_off.c_nvm / (d_off.c_nvm + d_off.c_nv0);
    const double i_minus = d_off.c_nvm * off.n_e_minus();
    if (!(i_minus > 0.0))
        throw ModelError("donor_model_contrasts: zero NV- emission");
    out.pl_ratio = d_off.c_nv0 * off.n_e_zero() / i_minus;
    return out;
}

// PL fraction I- / (I0 + I-) from concentrations, occupancies, and radiative
// rates. Concentrations may be absolute or fractional, only ratios matter.
inline double pl_fraction(double c_minus, double c_zero, const StatePopulations& pops,
                          const EmissionConstants& k) {
    validate_emission(k);
    if (c_minus < 0.0 || c_zero < 0.0)
        throw ValidationError("pl_fraction: concentrations must be >= 0");
    const double i_minus = c_minus * pops.n_e_minus() * k.k_eg_minus;
    const double i_zero = c_zero * pops.n_e_zero() * k.k_eg_zero;
    if (!(i_minus + i_zero > 0.0))
        throw ModelError("pl_fraction: no emission from either species");
    return i_minus / (i_minus + i_zero);
}

// Wavelength-only form valid past the single-photon threshold; w is a single
// fitted weighting constant.
inline double pl_fraction_wavelength_form(double sigma_g_minus, double sigma_g_zero,
                                          double c_ratio_zero_over_minus, double w) {
    if (sigma_g_minus < 0.0 || sigma_g_zero < 0.0 || c_ratio_zero_over_minus <= 0.0 ||
        w <= 0.0)
        throw ValidationError("pl_fraction_wavelength_form: bad inputs");
    const double denom = w * c_ratio_zero_over_minus * sigma_g_zero + sigma_g_minus;
    if (!(denom > 0.0))
        throw ModelError("pl_fraction_wavelength_form: zero denominator");
    return sigma_g_minus / denom;
}

struct SingletGaps {
    double sigma_gap_ev = 0.0;  // upper singlet to conduction band
    double delta_gap_ev = 0.0;  // lower excited triplet to upper singlet
};

// Level placement from the measured singlet ionization threshold. Two fixed
// constants: 2.60 eV is the depth of the band edge used for the
// reconstruction, 0.755 eV is the total (1.945 - 1.190 eV) the two gaps
// share, so they always sum to 0.755 exactly.
inline SingletGaps singlet_gaps_from_threshold(double e_threshold_ev) {
    constexpr double band_depth_ev = 2.60;
    constexpr double fixed_total_ev = 1.945 - 1.190;
    if (!(e_threshold_ev > 0.0 && e_threshold_ev < band_depth_ev))
        throw ValidationError("singlet_gaps_from_threshold: threshold must lie in (0, " +
                              std::to_string(band_depth_ev) + ") eV");
    SingletGaps g;
    g.sigma_gap_ev = band_depth_ev - e_threshold_ev;
    g.delta_gap_ev = fixed_total_ev - g.sigma_gap_ev;
    return g;
}

}  // namespace nvsep

#pragma once

#include <array>
#include <cmath>
#include <string>

#include "nvsep/common.hpp"
#include "nvsep/numerics.hpp"

namespace nvsep {

// Gaussian absorption band in photon energy, sigma(E) = sigma0 * exp(-(E-E_max)^2 / 2w^2).
struct CrossSectionModel {
    double sigma0_nm2 = 0.0045;
    double e_max_ev = 2.17;
    double width_ev = 0.21;

    double operator()(double e_phot_ev) const {
        if (width_ev <= 0.0)
            throw ValidationError("CrossSectionModel: width must be positive");
        const double d = (e_phot_ev - e_max_ev) / width_ev;
        return sigma0_nm2 * std::exp(-0.5 * d * d);
    }
};

inline CrossSectionModel nv_minus_absorption() { return {0.0045, 2.17, 0.21}; }
inline CrossSectionModel nv_zero_absorption() { return {0.0045, 2.28, 0.21}; }

// NV- intersystem dynamics, rates in 1/s. "up" rates leave the excited
// triplet for the singlet shelf, "down" rates return to the ground spin
// branches. The m_s = +/-1 branch shelves much faster than m_s = 0, which is
// what the whole field effect rides on.
struct NvMinusRates {
    double k_eg = 6.5e7;        // radiative decay, both spin branches
    double k_isc_up0 = 1.1e7;   // excited m_s = 0 -> singlet
    double k_isc_up1 = 8.0e7;   // excited m_s = +/-1 -> singlet
    double k_isc_down0 = 1.5e6; // singlet -> ground m_s = 0
    double k_isc_down1 = 1.5e6; // singlet -> ground m_s = +/-1
    double pump_scale = 1.0;    // multiplier on absorption cross section x flux
    CrossSectionModel absorption = nv_minus_absorption();
};

inline void validate_rates(const NvMinusRates& r) {
    if (r.k_eg <= 0.0)
        throw ValidationError("NvMinusRates: k_eg must be positive");
    if (r.k_isc_up0 < 0 || r.k_isc_up1 < 0 || r.k_isc_down0 < 0 || r.k_isc_down1 < 0 ||
        r.pump_scale < 0)
        throw ValidationError("NvMinusRates: rates must be non-negative");
    if (!(r.k_isc_up1 > r.k_isc_up0))
        throw ValidationError("NvMinusRates: k_isc_up1 must exceed k_isc_up0");
}

// NV0 has no spin shelf worth modeling: ground and excited only.
struct NvZeroRates {
    double k_eg = 5.2e7;
    double pump_scale = 1.0;
    CrossSectionModel absorption = nv_zero_absorption();
};

struct PhotodynModel {
    NvMinusRates minus;
    NvZeroRates zero;
};

// Spin-character weights of the field-mixed eigenstates, collapsed to the
// two effective states (0-like, +/-1-like) the 5-state model tracks.
// Rows are effective states, columns are pure spin characters (0, +/-1);
// each row sums to 1. B = 0 gives the identity.
struct FieldMixing {
    double B_mT = 0.0;
    double angle_deg = 0.0;
    std::array<std::array<double, 2>, 2> ground{{{1.0, 0.0}, {0.0, 1.0}}};
    std::array<std::array<double, 2>, 2> excited{{{1.0, 0.0}, {0.0, 1.0}}};
};

namespace detail {

// 0-character retained by the most 0-like eigenstate of
// H = D Sz^2 + gamma B (cos(theta) Sz + sin(theta) Sx), basis (+1, 0, -1).
inline double zero_character(double d_ghz, double b_mt, double angle_deg) {
    const double gb = constants::gamma_e_ghz_per_mt * b_mt;
    const double th = angle_deg * std::acos(-1.0) / 180.0;
    const double lz = gb * std::cos(th);
    const double lx = gb * std::sin(th) / std::sqrt(2.0);
    const std::array<std::array<double, 3>, 3> h{{{d_ghz + lz, lx, 0.0},
                                                  {lx, 0.0, lx},
                                                  {0.0, lx, d_ghz - lz}}};
    const SymEig3 eig = eig_sym3(h);
    double q = 0.0;
    for (const auto& v : eig.vectors) q = std::max(q, v[1] * v[1]);
    return q;
}

inline std::array<std::array<double, 2>, 2> collapse(double q) {
    // Effective 0 state keeps q of its 0-character; the two +/-1-like
    // eigenstates are averaged into one effective state.
    return {{{q, 1.0 - q}, {0.5 * (1.0 - q), 0.5 * (1.0 + q)}}};
}

}  // namespace detail

inline FieldMixing field_mixing(double b_mt, double angle_deg) {
    if (b_mt < 0.0)
        throw ValidationError("field_mixing: B must be >= 0");
    FieldMixing m;
    m.B_mT = b_mt;
    m.angle_deg = angle_deg;
    if (b_mt > 0.0) {
        m.ground = detail::collapse(detail::zero_character(constants::d_ground_ghz, b_mt, angle_deg));
        m.excited = detail::collapse(detail::zero_character(constants::d_excited_ghz, b_mt, angle_deg));
    }
    return m;
}

// State order used throughout: g0, g1, e0, e1, s.
using RateMatrix = std::array<std::array<double, 5>, 5>;

inline constexpr int kG0 = 0, kG1 = 1, kE0 = 2, kE1 = 3, kS = 4;

// Continuous-time generator: G[to][from] holds the transition rate, diagonal
// entries balance their column so column sums vanish. Optical transitions
// conserve spin character; mixing spreads each character across the
// effective states, so a flow of character s out of state i lands in state j
// with weight mix[s -> j], the transposed mixing column.
inline RateMatrix build_rate_matrix(const NvMinusRates& rates, const FieldMixing& mix,
                                    double flux, double e_phot_ev) {
    validate_rates(rates);
    if (flux < 0.0)
        throw ValidationError("build_rate_matrix: flux must be >= 0");

    const auto& mg = mix.ground;
    const auto& me = mix.excited;
    auto route_g = [&](int state, int character) { return mg[character][state]; };
    auto route_e = [&](int state, int character) { return me[character][state]; };

    const double pump = rates.pump_scale * rates.absorption(e_phot_ev) * flux;
    RateMatrix g{};

    auto add = [&](int to, int from, double rate) {
        g[to][from] += rate;
        g[from][from] -= rate;
    };

    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            double up = 0.0, down = 0.0;
            for (int s = 0; s < 2; ++s) {
                up += mg[i][s] * route_e(j, s);
                down += me[j][s] * route_g(i, s);
            }
            add(kE0 + j, kG0 + i, pump * up);
            add(kG0 + i, kE0 + j, rates.k_eg * down);
        }
        add(kS, kE0 + i, me[i][0] * rates.k_isc_up0 + me[i][1] * rates.k_isc_up1);
        add(kG0 + i, kS, rates.k_isc_down0 * route_g(i, 0) + rates.k_isc_down1 * route_g(i, 1));
    }
    return g;
}

// Normalized null vector of the generator: the balance equations with one
// row traded for sum(n) = 1, solved by the pivoted dense kernel.
inline std::array<double, 5> steady_state(const RateMatrix& g) {
    double scale = 0.0;
    for (const auto& row : g)
        for (double v : row) scale = std::max(scale, std::abs(v));
    if (scale == 0.0)
        throw ValidationError("steady_state: zero generator");
    for (int j = 0; j < 5; ++j) {
        double col = 0.0;
        for (int i = 0; i < 5; ++i) {
            col += g[i][j];
            if (i != j && g[i][j] < -1e-12 * scale)
                throw ValidationError("steady_state: negative off-diagonal rate");
        }
        if (std::abs(col) > 1e-10 * scale)
            throw ValidationError("steady_state: column " + std::to_string(j) +
                                  " does not balance");
    }

    std::array<std::array<double, 5>, 5> a{};
    std::array<double, 5> b{};
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) a[i][j] = g[i][j] / scale;
    for (int j = 0; j < 5; ++j) a[0][j] = 1.0;
    b[0] = 1.0;

    std::array<double, 5> n;
    try {
        n = solve_dense<5>(a, b);
    } catch (const ModelError&) {
        throw ModelError("steady_state: degenerate model, steady state not unique");
    }
    double sum = 0.0;
    for (double& v : n) {
        if (v < 0.0) {
            if (v < -1e-9)
                throw ModelError("steady_state: negative population, generator is not a "
                                 "valid rate model");
            v = 0.0;
        }
        sum += v;
    }
    for (double& v : n) v /= sum;
    return n;
}

struct StatePopulations {
    struct Minus {
        double g0 = 1.0, g1 = 0.0, e0 = 0.0, e1 = 0.0, s = 0.0;
    } nv_minus;
    struct Zero {
        double g = 1.0, e = 0.0;
    } nv_zero;

    double n_e_minus() const { return nv_minus.e0 + nv_minus.e1; }
    double n_g_minus() const { return nv_minus.g0 + nv_minus.g1; }
    double n_s_minus() const { return nv_minus.s; }
    double n_e_zero() const { return nv_zero.e; }
};

inline StatePopulations populations(const PhotodynModel& model, const FieldMixing& mix,
                                    double flux, double e_phot_ev) {
    if (flux < 0.0)
        throw ValidationError("populations: flux must be >= 0");
    StatePopulations out;
    const RateMatrix g = build_rate_matrix(model.minus, mix, flux, e_phot_ev);
    const auto n = steady_state(g);
    out.nv_minus = {n[kG0], n[kG1], n[kE0], n[kE1], n[kS]};

    if (model.zero.k_eg <= 0.0)
        throw ValidationError("populations: NV0 k_eg must be positive");
    const double p = model.zero.pump_scale * model.zero.absorption(e_phot_ev) * flux;
    out.nv_zero.e = p / (p + model.zero.k_eg);
    out.nv_zero.g = 1.0 - out.nv_zero.e;
    return out;
}

// Fractional loss of NV- excited population under field, before any charge
// redistribution. This is the field effect a fixed charge balance would show.
inline double epsilon_intrinsic(const StatePopulations& off, const StatePopulations& on) {
    const double ref = off.n_e_minus();
    if (!(ref > 0.0))
        throw ModelError("epsilon_intrinsic: zero excited population at B = 0");
    return 1.0 - on.n_e_minus() / ref;
}

}  // namespace nvsep

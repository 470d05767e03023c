#pragma once

// Shared fixtures and oracles for the test suite.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include "nvsep/photodyn.hpp"

namespace nvsep_test {

struct Rk4Result {
    std::array<double, 5> n{};
    bool converged = false;
    std::size_t steps = 0;
};

// Long-time limit of fixed-step RK4 on dn/dt = G n from a uniform start.
// One RK4 step is the linear map R = I + hG + (hG)^2/2 + (hG)^3/6 + (hG)^4/24
// with column sums 1, so the N-step iterate is R^N n0. Repeated squaring
// reaches N = 2^k directly, which sidesteps the step-count blowup a stiff
// generator (slow shelf drain under fast pumping) forces on explicit
// stepping. Every column of R^N converges to the steady state, so column
// agreement is the stopping test, and the fixed point of the map is the
// exact null vector of G independent of h.
inline Rk4Result rk4_relax(const nvsep::RateMatrix& g) {
    using Mat = std::array<std::array<double, 5>, 5>;
    Rk4Result out;
    double dmax = 0.0;
    for (int i = 0; i < 5; ++i) dmax = std::max(dmax, -g[i][i]);
    if (!(dmax > 0.0)) return out;
    const double h = 0.5 / dmax;

    const auto matmul = [](const Mat& a, const Mat& b) {
        Mat c{};
        for (int i = 0; i < 5; ++i)
            for (int k = 0; k < 5; ++k) {
                const double aik = a[i][k];
                if (aik == 0.0) continue;
                for (int j = 0; j < 5; ++j) c[i][j] += aik * b[k][j];
            }
        return c;
    };

    Mat hg{};
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) hg[i][j] = h * g[i][j];
    Mat r{};
    for (int i = 0; i < 5; ++i) r[i][i] = 1.0;
    Mat term = r;  // (hG)^p / p!
    for (int p = 1; p <= 4; ++p) {
        term = matmul(term, hg);
        double inv_fact = 1.0;
        for (int q = 2; q <= p; ++q) inv_fact /= q;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) r[i][j] += term[i][j] * inv_fact;
    }

    // The roundoff floor of the column spread depends on the generator's
    // conditioning (observed anywhere from 1e-30 to 1e-11 over random
    // draws), so run all squarings, keep the sharpest iterate, and accept
    // it when the spread is well below the agreement margins the tests
    // apply to the result.
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 60; ++k) {
        double spread = 0.0;
        for (int i = 0; i < 5; ++i) {
            double lo = r[i][0], hi = r[i][0];
            for (int j = 1; j < 5; ++j) {
                lo = std::min(lo, r[i][j]);
                hi = std::max(hi, r[i][j]);
            }
            spread = std::max(spread, hi - lo);
        }
        if (spread < best) {
            best = spread;
            out.steps = std::size_t{1} << k;
            for (int i = 0; i < 5; ++i) {
                out.n[i] = 0.0;
                for (int j = 0; j < 5; ++j) out.n[i] += r[i][j] * 0.2;
            }
        }
        if (k == 60) break;
        r = matmul(r, r);
        // The exact map has unit column sums; roundoff drifts them to
        // 1 - eta, and (1 - eta)^(2^60) silently annihilates the whole
        // matrix. Renormalizing each column restores the invariant.
        for (int j = 0; j < 5; ++j) {
            double col = 0.0;
            for (int i = 0; i < 5; ++i) col += r[i][j];
            for (int i = 0; i < 5; ++i) r[i][j] /= col;
        }
    }
    out.converged = best < 1e-9;
    return out;
}

inline double matrix_inf_norm(const nvsep::RateMatrix& g) {
    double norm = 0.0;
    for (int i = 0; i < 5; ++i) {
        double row = 0.0;
        for (int j = 0; j < 5; ++j) row += std::abs(g[i][j]);
        norm = std::max(norm, row);
    }
    return norm;
}

inline double residual_inf_norm(const nvsep::RateMatrix& g,
                                const std::array<double, 5>& n) {
    double r = 0.0;
    for (int i = 0; i < 5; ++i) {
        double s = 0.0;
        for (int j = 0; j < 5; ++j) s += g[i][j] * n[j];
        r = std::max(r, std::abs(s));
    }
    return r;
}

}  // namespace nvsep_test

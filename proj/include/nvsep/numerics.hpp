#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "nvsep/common.hpp"

namespace nvsep {

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// Throws ModelError on a (numerically) singular system.
template <std::size_t N>
std::array<double, N> solve_dense(std::array<std::array<double, N>, N> a,
                                  std::array<double, N> b) {
    double scale = 0.0;
    for (const auto& row : a)
        for (double v : row) scale = std::max(scale, std::abs(v));
    const double tol = scale * 1e-14 + std::numeric_limits<double>::min();

    for (std::size_t col = 0; col < N; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < N; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) <= tol)
            throw ModelError("solve_dense: singular system (pivot " +
                             std::to_string(col) + ")");
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < N; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < N; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<double, N> x{};
    for (std::size_t i = N; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < N; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

struct SymEig3 {
    std::array<double, 3> values;                 // ascending
    std::array<std::array<double, 3>, 3> vectors; // vectors[i] pairs with values[i]
};

// Cyclic Jacobi rotations for a symmetric 3x3 matrix. Converges to machine
// precision in a handful of sweeps for any input this library produces.
inline SymEig3 eig_sym3(std::array<std::array<double, 3>, 3> m) {
    std::array<std::array<double, 3>, 3> v{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = std::abs(m[0][1]) + std::abs(m[0][2]) + std::abs(m[1][2]);
        double diag = std::abs(m[0][0]) + std::abs(m[1][1]) + std::abs(m[2][2]);
        if (off <= (diag + off) * 1e-15) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (m[p][q] == 0.0) continue;
                const double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 3; ++k) {
                    const double mkp = m[k][p], mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double mpk = m[p][k], mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for (int k = 0; k < 3; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    SymEig3 out{};
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return m[i][i] < m[j][j]; });
    for (int i = 0; i < 3; ++i) {
        out.values[i] = m[order[i]][order[i]];
        for (int k = 0; k < 3; ++k) out.vectors[i][k] = v[k][order[i]];
    }
    return out;
}

// Natural cubic spline through (x, y) with strictly increasing x.
// Evaluation outside [x.front(), x.back()] extrapolates the end cubics.
class CubicSpline {
  public:
    CubicSpline() = default;

    CubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 3 || y_.size() != n)
            throw ValidationError("CubicSpline: need >= 3 matching knots");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1]))
                throw ValidationError("CubicSpline: knots must be strictly increasing");

        // Second derivatives from the standard tridiagonal system with
        // natural boundary conditions y'' = 0 at both ends.
        std::vector<double> h(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) h[i] = x_[i + 1] - x_[i];
        std::vector<double> diag(n, 1.0), rhs(n, 0.0), upper(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            upper[i] = h[i];
            rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h[i] - (y_[i] - y_[i - 1]) / h[i - 1]);
        }
        m_.assign(n, 0.0);
        std::vector<double> c(n, 0.0), d(n, 0.0);
        c[1] = upper[1] / diag[1];
        d[1] = rhs[1] / diag[1];
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double denom = diag[i] - h[i - 1] * c[i - 1];
            c[i] = upper[i] / denom;
            d[i] = (rhs[i] - h[i - 1] * d[i - 1]) / denom;
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = d[i] - c[i] * m_[i + 1];
            if (i == 1) break;
        }
    }

    double operator()(double xq) const {
        const std::size_t n = x_.size();
        std::size_t i;
        if (xq <= x_.front())
            i = 0;
        else if (xq >= x_.back())
            i = n - 2;
        else
            i = static_cast<std::size_t>(
                    std::upper_bound(x_.begin(), x_.end(), xq) - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - xq) / h;
        const double b = (xq - x_[i]) / h;
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

  private:
    std::vector<double> x_, y_;
    std::vector<double> m_;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    bool converged = false;
    int evaluations = 0;
};

// Downhill simplex with standard coefficients. `step` sets the initial
// simplex edge per dimension. Stops when the simplex value spread falls
// below ftol or the iteration budget runs out.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> start,
                                    std::vector<double> step,
                                    double ftol = 1e-12,
                                    int max_iter = 2000) {
    const std::size_t n = start.size();
    if (step.size() != n || n == 0)
        throw ValidationError("nelder_mead: start/step size mismatch");

    NelderMeadResult res;
    std::vector<std::vector<double>> pts(n + 1, start);
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
    for (std::size_t i = 0; i <= n; ++i) {
        vals[i] = f(pts[i]);
        ++res.evaluations;
    }

    for (int it = 0; it < max_iter; ++it) {
        std::vector<std::size_t> order(n + 1);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];

        const double spread = std::abs(vals[worst] - vals[best]);
        if (spread <= ftol * (std::abs(vals[best]) + ftol)) {
            res.x = pts[best];
            res.value = vals[best];
            res.converged = true;
            return res;
        }

        // The relative value test above can never fire when the minimum is
        // exactly zero (clean model data). A simplex that has collapsed in
        // parameter space has nowhere left to move, so that ends the search
        // too.
        const double xtol = std::sqrt(ftol);
        bool collapsed = true;
        for (std::size_t d = 0; d < n && collapsed; ++d) {
            double lo = pts[0][d], hi = pts[0][d];
            for (std::size_t i = 1; i <= n; ++i) {
                lo = std::min(lo, pts[i][d]);
                hi = std::max(hi, pts[i][d]);
            }
            if (hi - lo > xtol * (1.0 + std::abs(pts[best][d]))) collapsed = false;
        }
        if (collapsed) {
            res.x = pts[best];
            res.value = vals[best];
            res.converged = true;
            return res;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double coef) {
            std::vector<double> p(n);
            for (std::size_t d = 0; d < n; ++d)
                p[d] = centroid[d] + coef * (pts[worst][d] - centroid[d]);
            return p;
        };

        auto reflected = blend(-1.0);
        double fr = f(reflected);
        ++res.evaluations;
        if (fr < vals[order[0]]) {
            auto expanded = blend(-2.0);
            double fe = f(expanded);
            ++res.evaluations;
            if (fe < fr) {
                pts[worst] = std::move(expanded);
                vals[worst] = fe;
            } else {
                pts[worst] = std::move(reflected);
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            pts[worst] = std::move(reflected);
            vals[worst] = fr;
        } else {
            auto contracted = blend(fr < vals[worst] ? -0.5 : 0.5);
            double fc = f(contracted);
            ++res.evaluations;
            if (fc < std::min(fr, vals[worst])) {
                pts[worst] = std::move(contracted);
                vals[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t d = 0; d < n; ++d)
                        pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
                    vals[i] = f(pts[i]);
                    ++res.evaluations;
                }
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (vals[i] < vals[best]) best = i;
    res.x = pts[best];
    res.value = vals[best];
    res.converged = false;
    return res;
}

inline double log_sum_exp(const std::vector<double>& logw) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : logw) m = std::max(m, v);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double v : logw) s += std::exp(v - m);
    return m + std::log(s);
}

inline double weighted_mean(const std::vector<double>& x, const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i];
    return s;
}

inline double weighted_sd(const std::vector<double>& x, const std::vector<double>& w) {
    const double mu = weighted_mean(x, w);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - mu;
        s += w[i] * d * d;
    }
    return std::sqrt(std::max(s, 0.0));
}

// Weighted quantile via the inverse of the step CDF: smallest sample value
// whose cumulative weight reaches q. Weights are assumed normalized.
inline double weighted_quantile(std::vector<double> x, std::vector<double> w, double q) {
    if (x.empty() || x.size() != w.size())
        throw ValidationError("weighted_quantile: bad inputs");
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    double cum = 0.0;
    for (std::size_t i : order) {
        cum += w[i];
        if (cum >= q) return x[i];
    }
    return x[order.back()];
}

}  // namespace nvsep

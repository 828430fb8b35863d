// Independent reference implementations used by the unit and acceptance tests.
// Nothing here calls into the library's own solvers.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

struct Gpe {
    double delta, u, g, f, phi, kappa;

    // d beta/dt written out in real coordinates
    Eigen::Vector2d rhs(const Eigen::Vector2d& v) const {
        const double x = v[0], y = v[1];
        const double n = x * x + y * y;
        const double a = -delta + u * n;
        // -i [ (a - i k/2)(x + i y) + g (x - i y) + f e^{-i phi} ]
        const double re_in = a * x + 0.5 * kappa * y + g * x + f * std::cos(phi);
        const double im_in = a * y - 0.5 * kappa * x - g * y - f * std::sin(phi);
        return {im_in, -re_in};
    }

    Eigen::Matrix2d jacobian_fd(const Eigen::Vector2d& v, double h = 1e-6) const {
        Eigen::Matrix2d J;
        for (int k = 0; k < 2; ++k) {
            Eigen::Vector2d e = Eigen::Vector2d::Zero();
            e[k] = h;
            J.col(k) = (rhs(v + e) - rhs(v - e)) / (2.0 * h);
        }
        return J;
    }
};

/// Damped Newton from a polar grid of starting points; roots deduplicated at `merge`.
inline std::vector<cplx> newton_multistart(const Gpe& p, int n_radial = 40, int n_angle = 48,
                                           double merge = 1e-7) {
    const double n_max = std::max((std::abs(p.delta) + p.g + 1.0) / std::max(p.u, 1e-12), p.f * p.f);
    const double r_max = 1.3 * std::sqrt(n_max) + 0.5;
    std::vector<cplx> roots;
    for (int ir = 0; ir <= n_radial; ++ir) {
        const double r = r_max * ir / n_radial;
        const int na = ir == 0 ? 1 : n_angle;
        for (int ia = 0; ia < na; ++ia) {
            const double th = 2.0 * M_PI * (ia + 0.5 * (ir % 2)) / n_angle;
            Eigen::Vector2d v(r * std::cos(th), r * std::sin(th));
            Eigen::Vector2d F = p.rhs(v);
            bool ok = false;
            for (int it = 0; it < 200; ++it) {
                const double fn = F.norm();
                if (fn < 1e-14) {
                    ok = true;
                    break;
                }
                const Eigen::Matrix2d J = p.jacobian_fd(v, 1e-7);
                if (std::abs(J.determinant()) < 1e-300) break;
                const Eigen::Vector2d step = J.partialPivLu().solve(-F);
                double lam = 1.0;
                Eigen::Vector2d vn = v + step, Fn = p.rhs(vn);
                while (Fn.norm() > (1.0 - 1e-4 * lam) * fn && lam > 1e-10) {
                    lam *= 0.5;
                    vn = v + lam * step;
                    Fn = p.rhs(vn);
                }
                if (lam <= 1e-10) break;
                const double moved = (vn - v).norm();
                v = vn;
                F = Fn;
                if (moved < 1e-15 * (1.0 + v.norm()) && F.norm() < 1e-11) {
                    ok = true;
                    break;
                }
            }
            if (!ok && F.norm() < 1e-11) ok = true;
            if (!ok) continue;
            const cplx z(v[0], v[1]);
            bool dup = false;
            for (const auto& w : roots)
                if (std::abs(w - z) < merge) dup = true;
            if (!dup) roots.push_back(z);
        }
    }
    return roots;
}

/// Signed winding (turns, CCW positive) of x' = J x from x0, by classical RK4.
inline double linear_winding(const Eigen::Matrix2d& J, Eigen::Vector2d x0, double t_end, int steps) {
    const double h = t_end / steps;
    double turns = 0.0;
    double prev = std::atan2(x0[1], x0[0]);
    for (int i = 0; i < steps; ++i) {
        const Eigen::Vector2d k1 = J * x0, k2 = J * (x0 + 0.5 * h * k1), k3 = J * (x0 + 0.5 * h * k2),
                              k4 = J * (x0 + h * k3);
        x0 += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double a = std::atan2(x0[1], x0[0]);
        double d = a - prev;
        while (d > M_PI) d -= 2.0 * M_PI;
        while (d < -M_PI) d += 2.0 * M_PI;
        turns += d / (2.0 * M_PI);
        prev = a;
    }
    return turns;
}

/// Asymptotic Kolmogorov-Smirnov p-value with the Stephens small-sample correction.
inline double ks_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lam = (sn + 0.12 + 0.11 / sn) * d;
    if (lam < 1e-3) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lam * lam);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample KS statistic of `samples` against the CDF `cdf`.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double c = cdf(samples[i]);
        d = std::max({d, (i + 1) / n - c, c - i / n});
    }
    return d;
}

} // namespace oracle

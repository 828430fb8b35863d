/**
 * @file ode.hpp
 * @brief Adaptive Dormand-Prince 5(4) integrator with continuous extension.
 *
 * Works on any Eigen column vector (real or complex). The caller drives the
 * integration one accepted step at a time and may query the interpolant
 * anywhere inside the last step.
 */
#pragma once

#include "kerrflow/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace kerrflow {

struct OdeOptions {
    double rtol = 1e-9;
    double atol = 1e-12;
    double h_init = 0.0;  // 0 selects a starting step automatically
    double h_max = std::numeric_limits<double>::infinity();
    long max_steps = 50'000'000;
};

template <class Vec>
class DormandPrince {
public:
    using Rhs = std::function<void(double, const Vec&, Vec&)>;

    DormandPrince(Rhs rhs, OdeOptions opt = {}) : f_(std::move(rhs)), opt_(opt) {}

    void reset(double t0, const Vec& y0) {
        t_ = t_old_ = t0;
        y_ = y_old_ = y0;
        k1_.resize(y0.size());
        f_(t_, y_, k1_);
        ++n_eval_;
        h_ = opt_.h_init > 0.0 ? opt_.h_init : initial_step();
        steps_ = 0;
        have_dense_ = false;
    }

    double t() const { return t_; }
    double t_old() const { return t_old_; }
    const Vec& y() const { return y_; }
    const Vec& dydt() const { return k1_; }
    double step_size() const { return h_; }
    long evaluations() const { return n_eval_; }

    /// Takes one accepted step without passing t_stop. Returns the new time.
    double step(double t_stop) {
        bool rejected = false;
        for (;;) {
            if (++steps_ > opt_.max_steps) throw numerical_error("ODE integrator exceeded the step budget");
            double h = std::min(h_, opt_.h_max);
            bool last = false;
            if (t_ + h >= t_stop) {
                h = t_stop - t_;
                last = true;
            }
            if (!(h > 0.0)) return t_;
            if (h < 1e-14 * std::max(1.0, std::abs(t_)))
                throw numerical_error("ODE step size underflow at t=" + std::to_string(t_));

            const Vec& k1 = k1_;
            tmp_ = y_ + h * (a21 * k1);
            f_(t_ + c2 * h, tmp_, k2_);
            tmp_ = y_ + h * (a31 * k1 + a32 * k2_);
            f_(t_ + c3 * h, tmp_, k3_);
            tmp_ = y_ + h * (a41 * k1 + a42 * k2_ + a43 * k3_);
            f_(t_ + c4 * h, tmp_, k4_);
            tmp_ = y_ + h * (a51 * k1 + a52 * k2_ + a53 * k3_ + a54 * k4_);
            f_(t_ + c5 * h, tmp_, k5_);
            tmp_ = y_ + h * (a61 * k1 + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
            f_(t_ + h, tmp_, k6_);
            ynew_ = y_ + h * (a71 * k1 + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
            f_(t_ + h, ynew_, k7_);
            n_eval_ += 6;

            tmp_ = h * (e1 * k1 + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
            double err = 0.0;
            for (Eigen::Index i = 0; i < y_.size(); ++i) {
                const double sc = opt_.atol + opt_.rtol * std::max(std::abs(y_[i]), std::abs(ynew_[i]));
                const double r = std::abs(tmp_[i]) / sc;
                err += r * r;
            }
            err = std::sqrt(err / static_cast<double>(std::max<Eigen::Index>(1, y_.size())));
            if (!std::isfinite(err)) {
                h_ = 0.1 * h;
                rejected = true;
                continue;
            }

            if (err <= 1.0) {
                const Vec ydiff = ynew_ - y_;
                const Vec bspl = h * k1 - ydiff;
                r1_ = y_;
                r2_ = ydiff;
                r3_ = bspl;
                r4_ = ydiff - h * k7_ - bspl;
                r5_ = h * (d1 * k1 + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
                have_dense_ = true;
                t_old_ = t_;
                y_old_ = y_;
                t_ = last ? t_stop : t_ + h;
                y_ = ynew_;
                k1_ = k7_;
                double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 10.0;
                fac = std::clamp(fac, 0.2, rejected ? 1.0 : 10.0);
                if (!last || fac < 1.0) h_ = h * fac;
                return t_;
            }
            h_ = h * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 1.0);
            rejected = true;
        }
    }

    /// Continuous extension inside [t_old, t].
    Vec dense(double t) const {
        if (!have_dense_) return y_;
        const double h = t_ - t_old_;
        const double th = h > 0.0 ? (t - t_old_) / h : 1.0;
        const double th1 = 1.0 - th;
        return r1_ + th * (r2_ + th1 * (r3_ + th * (r4_ + th1 * r5_)));
    }

private:
    double initial_step() {
        double d0 = 0.0, d1n = 0.0;
        for (Eigen::Index i = 0; i < y_.size(); ++i) {
            const double sc = opt_.atol + opt_.rtol * std::abs(y_[i]);
            d0 += std::pow(std::abs(y_[i]) / sc, 2);
            d1n += std::pow(std::abs(k1_[i]) / sc, 2);
        }
        const double n = static_cast<double>(std::max<Eigen::Index>(1, y_.size()));
        d0 = std::sqrt(d0 / n);
        d1n = std::sqrt(d1n / n);
        double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
        tmp_ = y_ + h0 * k1_;
        f_(t_ + h0, tmp_, k2_);
        ++n_eval_;
        double d2 = 0.0;
        for (Eigen::Index i = 0; i < y_.size(); ++i) {
            const double sc = opt_.atol + opt_.rtol * std::abs(y_[i]);
            d2 += std::pow(std::abs(k2_[i] - k1_[i]) / sc, 2);
        }
        d2 = std::sqrt(d2 / n) / h0;
        const double m = std::max(d1n, d2);
        const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 0.2);
        return std::min({100.0 * h0, h1, opt_.h_max});
    }

    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    Rhs f_;
    OdeOptions opt_;
    double t_ = 0.0, t_old_ = 0.0, h_ = 0.0;
    long steps_ = 0, n_eval_ = 0;
    bool have_dense_ = false;
    Vec y_, y_old_, ynew_, tmp_, k1_, k2_, k3_, k4_, k5_, k6_, k7_;
    Vec r1_, r2_, r3_, r4_, r5_;
};

} // namespace kerrflow

#include "kerrflow/spectra.hpp"

#include "kerrflow/errors.hpp"
#include "kerrflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kerrflow {

const char* to_string(SpectrumRoute r) { return r == SpectrumRoute::Trajectory ? "trajectory" : "liouvillian"; }

const char* to_string(PeakSign s) {
    switch (s) {
    case PeakSign::CWPositive: return "CW";
    case PeakSign::CCWNegative: return "CCW";
    default: return "none";
    }
}

std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw invalid_parameter("linspace needs at least one point");
    std::vector<double> v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return v;
}

std::vector<double> lag_correlator(const TrajectoryRecord& rec, double t_burn, double max_lag, double aleph) {
    if (!(rec.dt_s > 0.0)) throw invalid_parameter("record has no sampling step");
    if (!(max_lag >= 0.0) || !(t_burn >= 0.0) || !(aleph > 0.0)) throw invalid_parameter("bad correlator window");
    const double dt = rec.dt_s;
    const size_t n_lag = static_cast<size_t>(std::llround(max_lag / dt)) + 1;
    const size_t ib = static_cast<size_t>(std::ceil(t_burn / dt - 1e-9));
    const size_t ns = rec.x.size();
    if (ns < ib + n_lag) {
        std::ostringstream os;
        os << "record too short for the correlator: has " << ns << " samples, needs at least " << ib + n_lag
           << " (t_total >= " << t_burn + max_lag << ")";
        throw invalid_parameter(os.str());
    }
    const double s = 1.0 / aleph;
    const double* x = rec.x.data() + ib;
    const double* y = rec.y.data() + ib;
    const size_t T = ns - ib;
    std::vector<double> g(n_lag, 0.0);
    for (size_t j = 0; j < n_lag; ++j) {
        double acc = 0.0;
        const size_t m = T - j;
        for (size_t i = 0; i < m; ++i) acc += y[i] * x[i + j] - x[i] * y[i + j];
        g[j] = s * acc / static_cast<double>(m);
    }
    return g;
}

double resolved_taper(const TrajectorySpectrumOptions& opt) {
    if (opt.taper >= 0.0) return opt.taper;
    if (!(opt.max_lag > 0.0)) throw invalid_parameter("max_lag must be positive");
    return 4.0 / opt.max_lag;
}

TrajectorySpectrumAccumulator::TrajectorySpectrumAccumulator(std::vector<double> omega, double dt_s,
                                                             const TrajectorySpectrumOptions& opt, int n_slots)
    : omega_(std::move(omega)), dt_s_(dt_s), opt_(opt), zetas_(static_cast<size_t>(std::max(n_slots, 0))),
      filled_(static_cast<size_t>(std::max(n_slots, 0)), 0) {
    if (!(dt_s > 0.0)) throw invalid_parameter("dt_s must be positive");
    if (n_slots < 1) throw invalid_parameter("need at least one trajectory");
    const double eta = resolved_taper(opt_);
    const Eigen::Index n_lag = static_cast<Eigen::Index>(std::llround(opt_.max_lag / dt_s)) + 1;
    kernel_.resize(static_cast<Eigen::Index>(omega_.size()), n_lag);
    for (Eigen::Index j = 0; j < n_lag; ++j) {
        const double tau = static_cast<double>(j) * dt_s;
        double w = dt_s * std::exp(-eta * tau);
        if (j == 0 || j == n_lag - 1) w *= 0.5;
        for (Eigen::Index o = 0; o < kernel_.rows(); ++o)
            kernel_(o, j) = w * std::exp(cplx(0.0, -omega_[static_cast<size_t>(o)] * tau));
    }
}

void TrajectorySpectrumAccumulator::add_correlator(int slot, const std::vector<double>& g) {
    if (slot < 0 || static_cast<size_t>(slot) >= zetas_.size()) throw invalid_parameter("slot out of range");
    if (static_cast<Eigen::Index>(g.size()) != kernel_.cols()) throw invalid_parameter("correlator length mismatch");
    Eigen::VectorXcd c(kernel_.cols());
    for (Eigen::Index j = 0; j < c.size(); ++j) c[j] = -g[static_cast<size_t>(j)];
    zetas_[static_cast<size_t>(slot)] = kernel_ * c;
    filled_[static_cast<size_t>(slot)] = 1;
}

void TrajectorySpectrumAccumulator::add(int slot, const TrajectoryRecord& rec) {
    if (std::abs(rec.dt_s - dt_s_) > 1e-12 * dt_s_) throw invalid_parameter("record sampling step mismatch");
    add_correlator(slot, lag_correlator(rec, opt_.t_burn, opt_.max_lag, opt_.aleph));
}

ChiralitySpectrum TrajectorySpectrumAccumulator::result() const {
    std::vector<const Eigen::VectorXcd*> z;
    for (size_t r = 0; r < zetas_.size(); ++r)
        if (filled_[r]) z.push_back(&zetas_[r]);
    if (z.empty()) throw invalid_parameter("no trajectories accumulated");
    const Eigen::Index no = static_cast<Eigen::Index>(omega_.size());
    const double n = static_cast<double>(z.size());
    Eigen::VectorXcd zsum = Eigen::VectorXcd::Zero(no);
    for (auto* v : z) zsum += *v;

    ChiralitySpectrum s;
    s.route = SpectrumRoute::Trajectory;
    s.omega = omega_;
    s.taper = resolved_taper(opt_);
    s.aleph = opt_.aleph;
    s.n_records = static_cast<int>(z.size());
    s.zeta.resize(static_cast<size_t>(no));
    s.chi.resize(static_cast<size_t>(no));
    s.chi_err.assign(static_cast<size_t>(no), std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index o = 0; o < no; ++o) {
        s.zeta[static_cast<size_t>(o)] = zsum[o] / n;
        s.chi[static_cast<size_t>(o)] = 2.0 * zsum[o].imag() / n;
    }
    if (z.size() > 1) {
        // leave-one-out estimates chi_(i) and their spread
        for (Eigen::Index o = 0; o < no; ++o) {
            const double total = 2.0 * zsum[o].imag();
            double mean_loo = 0.0;
            for (auto* v : z) mean_loo += (total - 2.0 * (*v)[o].imag()) / (n - 1.0);
            mean_loo /= n;
            double var = 0.0;
            for (auto* v : z) {
                const double d = (total - 2.0 * (*v)[o].imag()) / (n - 1.0) - mean_loo;
                var += d * d;
            }
            s.chi_err[static_cast<size_t>(o)] = std::sqrt((n - 1.0) / n * var);
        }
    }
    return s;
}

ChiralitySpectrum zeta_from_trajectories(const std::vector<TrajectoryRecord>& records,
                                         const std::vector<double>& omega, const TrajectorySpectrumOptions& opt) {
    if (records.empty()) throw invalid_parameter("no trajectory records");
    TrajectorySpectrumAccumulator acc(omega, records.front().dt_s, opt, static_cast<int>(records.size()));
    for (size_t r = 0; r < records.size(); ++r) acc.add(static_cast<int>(r), records[r]);
    return acc.result();
}

std::vector<cplx> liouvillian_weights(const LiouvillianSpectrum& spec, const CMat& rho0, double aleph) {
    const FockSpace space(spec.dim);
    const CMat X = quadrature_x(space, aleph);
    const CMat Y = quadrature_y(space, aleph);
    const Eigen::RowVectorXcd xr = vec(X.transpose()).transpose() * spec.right;
    const Eigen::RowVectorXcd yr = vec(Y.transpose()).transpose() * spec.right;
    const CVec xl = spec.left.adjoint() * vec(X * rho0);
    const CVec yl = spec.left.adjoint() * vec(Y * rho0);
    std::vector<cplx> w(static_cast<size_t>(spec.eigenvalues.size()));
    for (Eigen::Index k = 0; k < spec.eigenvalues.size(); ++k)
        w[static_cast<size_t>(k)] = k == 0 ? cplx(0.0) : yr[k] * xl[k] - xr[k] * yl[k];
    return w;
}

ChiralitySpectrum zeta_from_liouvillian(const LiouvillianSpectrum& spec, const CMat& rho0,
                                        const std::vector<double>& omega, const LiouvillianZetaOptions& opt) {
    if (spec.eigenvalues.size() < 2) throw invalid_parameter("need at least two Liouvillian modes");
    const std::vector<cplx> w = liouvillian_weights(spec, rho0, opt.aleph);
    const FockSpace space(spec.dim);
    const CMat X = quadrature_x(space, opt.aleph);
    const CMat Y = quadrature_y(space, opt.aleph);
    const cplx c0 = expect_c(Y * X - X * Y, rho0);

    ChiralitySpectrum s;
    s.route = SpectrumRoute::Liouvillian;
    s.omega = omega;
    s.taper = opt.taper;
    s.aleph = opt.aleph;
    s.n_modes = static_cast<int>(spec.eigenvalues.size());
    s.max_pole_real = -std::numeric_limits<double>::infinity();
    double wabs = 0.0;
    for (size_t k = 1; k < w.size(); ++k) {
        s.weight_sum += w[k];
        wabs += std::abs(w[k]);
        s.max_pole_real = std::max(s.max_pole_real, spec.eigenvalues[static_cast<Eigen::Index>(k)].real());
    }
    s.sum_rule_defect = wabs > 0.0 ? std::abs(s.weight_sum - c0) / wabs : std::abs(c0);
    if (s.sum_rule_defect > opt.sum_rule_tol) {
        std::ostringstream os;
        os << "included Liouvillian modes carry weight " << s.weight_sum << " against the exact " << c0
           << " (relative defect " << s.sum_rule_defect << "); request more modes";
        throw numerical_error(os.str());
    }
    auto eval = [&](double om) {
        cplx z(0.0);
        for (size_t k = 1; k < w.size(); ++k)
            z += w[k] / (cplx(0.0, om) - spec.eigenvalues[static_cast<Eigen::Index>(k)] + opt.taper);
        return z;
    };
    s.zeta.resize(omega.size());
    s.chi.resize(omega.size());
    for (size_t i = 0; i < omega.size(); ++i) {
        s.zeta[i] = eval(omega[i]);
        s.chi[i] = s.zeta[i].imag() - eval(-omega[i]).imag();
    }
    return s;
}

std::vector<SpectralPeak> bogoliubov_prediction(const std::vector<FixedPoint>& fps) {
    std::vector<SpectralPeak> out;
    for (const auto& fp : fps) {
        if (fp.fp_class != FpClass::Attractor) continue;
        SpectralPeak pk;
        pk.omega0 = std::abs(fp.eigenvalues[0].imag());
        pk.width = std::abs(fp.eigenvalues[0].real());
        switch (fp.chirality) {
        case Chirality::CW: pk.sign = PeakSign::CWPositive; break;
        case Chirality::CCW: pk.sign = PeakSign::CCWNegative; break;
        default: pk.sign = PeakSign::Neutral; pk.omega0 = 0.0;
            pk.width = std::min(std::abs(fp.eigenvalues[0].real()), std::abs(fp.eigenvalues[1].real()));
        }
        out.push_back(pk);
    }
    return out;
}

namespace {

// Least-squares parabola c0 + c1 x + c2 x^2, x centred on xc.
bool fit_parabola(const std::vector<double>& x, const std::vector<double>& y, double xc, Eigen::Vector3d& c) {
    if (x.size() < 3) return false;
    Eigen::MatrixXd A(static_cast<Eigen::Index>(x.size()), 3);
    Eigen::VectorXd b(static_cast<Eigen::Index>(x.size()));
    for (size_t i = 0; i < x.size(); ++i) {
        const double u = x[i] - xc;
        A(static_cast<Eigen::Index>(i), 0) = 1.0;
        A(static_cast<Eigen::Index>(i), 1) = u;
        A(static_cast<Eigen::Index>(i), 2) = u * u;
        b[static_cast<Eigen::Index>(i)] = y[i];
    }
    c = A.colPivHouseholderQr().solve(b);
    return c.allFinite();
}

} // namespace

std::vector<SpectralPeak> extract_peaks(const ChiralitySpectrum& s, double threshold) {
    constexpr double kMergeMisfit = 0.02;
    const auto& om = s.omega;
    const auto& chi = s.chi;
    if (om.size() != chi.size()) throw invalid_parameter("spectrum axis and values differ in length");
    std::vector<SpectralPeak> out;
    size_t first = 0;
    while (first < om.size() && !(om[first] > 0.0)) ++first;
    const size_t n = om.size();
    if (n - first < 3) return out;
    double vmax = 0.0;
    for (size_t i = first; i < n; ++i) vmax = std::max(vmax, std::abs(chi[i]));
    if (!(vmax > 0.0)) return out;

    for (size_t i = first + 1; i + 1 < n; ++i) {
        const double v = chi[i];
        const double a = std::abs(v);
        if (a < threshold * vmax || a == 0.0) continue;
        const double sg = v > 0.0 ? 1.0 : -1.0;
        if (!(sg * v >= sg * chi[i - 1] && sg * v > sg * chi[i + 1])) continue;

        SpectralPeak pk;
        pk.sign = sg > 0.0 ? PeakSign::CWPositive : PeakSign::CCWNegative;
        const double half = 0.5 * a;
        bool merged = false;
        size_t lo = i, hi = i;
        while (lo > first && sg * chi[lo - 1] >= half) {
            if (sg * chi[lo - 1] > sg * chi[lo]) { merged = true; break; }
            --lo;
        }
        if (lo == first && sg * chi[lo] >= half) merged = true;
        while (hi + 1 < n && sg * chi[hi + 1] >= half) {
            if (sg * chi[hi + 1] > sg * chi[hi]) { merged = true; break; }
            ++hi;
        }
        if (hi + 1 == n) merged = true;
        if (hi - lo < 2) {
            lo = i - 1;
            hi = i + 1;
        }
        std::vector<double> xs, ys;
        for (size_t j = lo; j <= hi; ++j) {
            if (sg * chi[j] <= 0.0) continue;
            xs.push_back(om[j]);
            ys.push_back(1.0 / chi[j]);
        }
        Eigen::Vector3d c;
        bool ok = fit_parabola(xs, ys, om[i], c) && c[2] * sg > 0.0;
        if (ok) {
            const double u0 = -c[1] / (2.0 * c[2]);
            const double p0 = c[0] + c[1] * u0 + c[2] * u0 * u0;
            ok = std::abs(u0) <= (om[hi] - om[lo]) && p0 * sg > 0.0;
            if (ok) {
                pk.omega0 = om[i] + u0;
                pk.height = 1.0 / p0;
                pk.width = std::sqrt(p0 / c[2]);
                // a shape that is not one Lorentzian over the window signals overlapping peaks
                double misfit = 0.0;
                for (size_t j = lo; j <= hi; ++j) {
                    const double d = (om[j] - pk.omega0) / pk.width;
                    misfit = std::max(misfit, std::abs(chi[j] - pk.height / (1.0 + d * d)));
                }
                if (misfit > kMergeMisfit * a) merged = true;
            }
        }
        if (!ok) {
            merged = true;
            pk.omega0 = om[i];
            pk.height = v;
            // half-maximum crossings by linear interpolation
            auto cross = [&](size_t j0, int dir) {
                size_t j = j0;
                while (true) {
                    const size_t jn = dir < 0 ? j - 1 : j + 1;
                    if ((dir < 0 && j == first) || (dir > 0 && jn >= n)) return om[j];
                    if (sg * chi[jn] < half) {
                        const double f = (sg * chi[j] - half) / (sg * chi[j] - sg * chi[jn]);
                        return om[j] + f * (om[jn] - om[j]);
                    }
                    j = jn;
                }
            };
            pk.width = 0.5 * (cross(i, +1) - cross(i, -1));
        }
        pk.weight = M_PI * pk.height * pk.width;
        pk.merged = merged;
        if (pk.width > 0.0) out.push_back(pk);
    }
    return out;
}

} // namespace kerrflow

namespace kerrflow {

LiouvillianPoint liouvillian_point(const ScaledParams& sp, const std::vector<double>& omega,
                                   const LiouvillianPointOptions& opt) {
    const ModelParams p = to_physical(sp);
    LiouvillianPoint out;
    out.params = sp;
    const DensityMatrix ss = steady_state_auto(p, sp.aleph, opt.steady, opt.truncation, opt.n_override);
    const FockSpace space = ss.space;
    out.dim = space.dim;
    out.rssp = rssp(ss, sp.aleph);
    out.checks = ss.checks;
    const SpMat L = liouvillian(p, space);
    out.checks.residual = (L * vec(ss.rho)).norm();
    out.spectrum = liouvillian_spectrum(L, space, opt.k_modes, opt.solver);
    out.weights = liouvillian_weights(out.spectrum, ss.rho, sp.aleph);
    LiouvillianZetaOptions zo;
    zo.aleph = sp.aleph;
    zo.taper = opt.taper;
    out.zeta = zeta_from_liouvillian(out.spectrum, ss.rho, omega, zo);
    out.gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 1; k < out.spectrum.eigenvalues.size(); ++k)
        out.gap = std::min(out.gap, std::abs(out.spectrum.eigenvalues[k].real()));
    return out;
}

EnsembleSpectrum trajectory_chirality(const ScaledParams& sp, const std::vector<double>& omega,
                                      const EnsembleSpectrumOptions& opt,
                                      const std::function<void(int, const TrajectoryRecord&)>& sink) {
    const ModelParams p = to_physical(sp);
    const DensityMatrix ss = steady_state_auto(p, sp.aleph, opt.steady, opt.truncation, opt.n_override);
    EnsembleSpec es;
    es.n_traj = opt.n_traj;
    es.t_burn = opt.t_burn;
    es.t_total = opt.t_total;
    es.dt_s = opt.dt_s;
    es.base_seed = opt.base_seed;
    es.space = ss.space;
    es.initial = opt.initial;
    if (opt.initial == InitialEnsemble::SteadyStateMixture) es.initial_rho = ss.rho;
    if (opt.initial == InitialEnsemble::Cycle) {
        ModelParams q = p;
        q.u = sp.tilde_u;
        q.f = sp.tilde_f;
        for (const auto& fp : fixed_points(q))
            if (fp.fp_class == FpClass::Attractor)
                es.initial_cycle.push_back(coherent_state(es.space, fp.beta0 * std::sqrt(sp.aleph)));
    }
    es.tail_tol = opt.steady.tail_tol;
    const JumpEvolver ev(p, es);

    TrajectorySpectrumOptions so;
    so.t_burn = opt.t_burn;
    so.max_lag = opt.max_lag;
    so.taper = opt.taper;
    so.aleph = sp.aleph;
    TrajectorySpectrumAccumulator acc(omega, opt.dt_s, so, opt.n_traj);
    std::vector<double> mean_n(static_cast<size_t>(opt.n_traj), 0.0), tail(mean_n.size(), 0.0);
    std::vector<std::size_t> jumps(mean_n.size(), 0);

    parallel_for(static_cast<size_t>(opt.n_traj), opt.workers, [&](size_t r) {
        TrajectoryRecord rec;
        try {
            rec = ev.run(opt.base_seed + r, r);
        } catch (const Error& e) {
            throw Error(e.kind(), "trajectory " + std::to_string(r) + ": " + e.what());
        }
        acc.add(static_cast<int>(r), rec);
        double s = 0.0;
        size_t m = 0;
        for (size_t i = 0; i < rec.times.size(); ++i)
            if (rec.times[i] >= opt.t_burn - 1e-9 * opt.dt_s) {
                s += rec.n[i];
                ++m;
            }
        mean_n[r] = m ? s / static_cast<double>(m) / sp.aleph : 0.0;
        tail[r] = rec.max_tail;
        jumps[r] = rec.jump_times.size();
        if (sink) sink(static_cast<int>(r), rec);
    });

    EnsembleSpectrum out;
    out.spectrum = acc.result();
    out.dim = ss.space.dim;
    out.rssp = rssp(ss, sp.aleph);
    out.propagator = ev.propagator();
    double s = 0.0, s2 = 0.0;
    for (size_t r = 0; r < mean_n.size(); ++r) {
        s += mean_n[r];
        s2 += mean_n[r] * mean_n[r];
        out.total_jumps += jumps[r];
        out.max_tail = std::max(out.max_tail, tail[r]);
    }
    const double n = static_cast<double>(mean_n.size());
    out.mean_n_scaled = s / n;
    out.mean_n_err = n > 1 ? std::sqrt(std::max(0.0, s2 / n - out.mean_n_scaled * out.mean_n_scaled) / (n - 1.0)) : 0.0;
    return out;
}

} // namespace kerrflow

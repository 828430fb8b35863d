#include "kerrflow/trajectories.hpp"

#include "kerrflow/errors.hpp"
#include "kerrflow/ode.hpp"
#include "kerrflow/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kerrflow {

SeededUniform::SeededUniform(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      0x6b657272u};
    eng_.seed(seq);
}

double SeededUniform::next() {
    for (;;) {
        const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
        if (u > 0.0) return u;
    }
}

void validate(const EnsembleSpec& s) {
    if (s.n_traj < 1) throw invalid_parameter("n_traj must be at least 1");
    if (!(s.t_burn >= 0.0) || !(s.t_total > s.t_burn)) throw invalid_parameter("need t_total > t_burn >= 0");
    if (!(s.dt_s > 0.0)) throw invalid_parameter("dt_s must be positive");
    if (s.initial_state.size() != 0 && s.initial_state.size() != s.space.dim)
        throw invalid_parameter("initial state does not match the Fock dimension");
    if (s.initial == InitialEnsemble::SteadyStateMixture &&
        (s.initial_rho.rows() != s.space.dim || s.initial_rho.cols() != s.space.dim))
        throw invalid_parameter("initial density matrix does not match the Fock dimension");
    if (s.initial == InitialEnsemble::Cycle) {
        if (s.initial_cycle.empty()) throw invalid_parameter("initial cycle is empty");
        for (const auto& v : s.initial_cycle)
            if (v.size() != s.space.dim) throw invalid_parameter("initial cycle state does not match the Fock dimension");
    }
}

namespace {

struct Moments {
    cplx b, b2;
    double n, tail;
};

Moments moments(const CVec& psi) {
    const Eigen::Index N = psi.size();
    Moments m{cplx(0.0), cplx(0.0), 0.0, 0.0};
    const Eigen::Index top = std::max<Eigen::Index>(1, (N + 9) / 10);
    for (Eigen::Index k = 0; k < N; ++k) {
        const double pk = std::norm(psi[k]);
        m.n += static_cast<double>(k) * pk;
        if (k >= N - top) m.tail += pk;
        if (k + 1 < N) m.b += std::conj(psi[k]) * std::sqrt(k + 1.0) * psi[k + 1];
        if (k + 2 < N) m.b2 += std::conj(psi[k]) * std::sqrt((k + 1.0) * (k + 2.0)) * psi[k + 2];
    }
    return m;
}

double number_expect(const CVec& psi) {
    double n = 0.0;
    for (Eigen::Index k = 1; k < psi.size(); ++k) n += static_cast<double>(k) * std::norm(psi[k]);
    return n;
}

CVec apply_b(const CVec& psi) {
    const Eigen::Index N = psi.size();
    CVec out = CVec::Zero(N);
    for (Eigen::Index k = 0; k + 1 < N; ++k) out[k] = std::sqrt(k + 1.0) * psi[k + 1];
    return out;
}

} // namespace

struct JumpEvolver::Impl {
    ModelParams p;
    EnsembleSpec spec;
    SpMat minus_i_heff;
    CMat V, Vinv;
    CVec mu;
    Eigen::VectorXd mix_cdf;
    CMat mix_vecs;

    void record(TrajectoryRecord& rec, double t, const CVec& psi_unnorm, double norm2) const {
        const CVec psi = psi_unnorm / std::sqrt(norm2);
        const Moments m = moments(psi);
        rec.times.push_back(t);
        rec.x.push_back(m.b.real());
        rec.y.push_back(m.b.imag());
        rec.n.push_back(m.n);
        rec.b2.push_back(m.b2);
        rec.max_tail = std::max(rec.max_tail, m.tail);
        rec.final_norm_check = std::abs(psi.squaredNorm() - 1.0);
        if (m.tail > spec.tail_tol) {
            std::ostringstream os;
            os << "trajectory seed " << rec.seed << ": top-level population " << m.tail << " exceeds "
               << spec.tail_tol << " at t=" << t << "; increase the Fock dimension (N=" << psi.size() << ")";
            throw resource_error(os.str());
        }
    }

    CVec initial(SeededUniform& rng, TrajectoryRecord& rec, std::size_t index) const {
        CVec psi;
        if (spec.initial == InitialEnsemble::Cycle) {
            const std::size_t i = index % spec.initial_cycle.size();
            rec.initial_component = static_cast<int>(i);
            psi = spec.initial_cycle[i];
        } else if (spec.initial == InitialEnsemble::SteadyStateMixture) {
            const double u = rng.next();
            Eigen::Index i = 0;
            while (i + 1 < mix_cdf.size() && mix_cdf[i] < u) ++i;
            rec.initial_component = static_cast<int>(i);
            psi = mix_vecs.col(i);
        } else if (spec.initial_state.size() != 0) {
            psi = spec.initial_state;
        } else {
            psi = CVec::Zero(spec.space.dim);
            psi[0] = 1.0;
        }
        const double nrm = psi.norm();
        if (!(nrm > 0.0)) throw invalid_parameter("initial state has zero norm");
        return psi / nrm;
    }

    size_t sample_count() const { return static_cast<size_t>(std::floor(spec.t_total / spec.dt_s + 1e-9)) + 1; }

    TrajectoryRecord run_spectral(std::uint64_t seed, std::size_t index) const {
        TrajectoryRecord rec;
        rec.seed = seed;
        rec.dt_s = spec.dt_s;
        SeededUniform rng(seed);
        CVec c = Vinv * initial(rng, rec, index);
        double t0 = 0.0;
        auto psi_at = [&](double t) -> CVec {
            const CVec e = (mu * cplx(0.0, -(t - t0))).array().exp().matrix();
            return V * e.cwiseProduct(c);
        };
        const size_t ns = sample_count();
        rec.times.reserve(ns);
        double r = rng.next();
        double t_prev = 0.0;
        for (size_t k = 0; k < ns; ++k) {
            const double ts = static_cast<double>(k) * spec.dt_s;
            for (;;) {
                CVec psi = psi_at(ts);
                const double n2 = psi.squaredNorm();
                if (n2 > r) {
                    record(rec, ts, psi, n2);
                    t_prev = ts;
                    break;
                }
                // Norm crosses r inside (t_prev, ts]: safeguarded Newton on |psi(t)|^2 - r.
                double lo = t_prev, hi = ts, t = ts;
                CVec pj = psi;
                double f = n2 - r;
                for (int it = 0; it < 200; ++it) {
                    const double fp = -p.kappa * number_expect(pj);
                    double tn = fp < 0.0 ? t - f / fp : 0.5 * (lo + hi);
                    if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
                    t = tn;
                    pj = psi_at(t);
                    f = pj.squaredNorm() - r;
                    if (f > 0.0) lo = t;
                    else hi = t;
                    if (hi - lo <= spec.jump_time_tol * std::max(1.0, hi) || std::abs(f) <= 1e-15) break;
                }
                CVec after = apply_b(pj);
                const double an = after.norm();
                if (!(an > 0.0)) throw numerical_error("jump applied to a state with zero photon number");
                after /= an;
                rec.jump_times.push_back(t);
                c = Vinv * after;
                t0 = t;
                t_prev = t;
                r = rng.next();
            }
        }
        return rec;
    }

    TrajectoryRecord run_rk(std::uint64_t seed, std::size_t index) const {
        TrajectoryRecord rec;
        rec.seed = seed;
        rec.dt_s = spec.dt_s;
        SeededUniform rng(seed);
        const CVec psi0 = initial(rng, rec, index);
        const SpMat& A = minus_i_heff;
        DormandPrince<CVec> ode([&A](double, const CVec& y, CVec& dy) { dy = A * y; },
                                OdeOptions{spec.rtol, spec.rtol * 1e-3});
        ode.reset(0.0, psi0);
        const size_t ns = sample_count();
        rec.times.reserve(ns);
        double r = rng.next();
        record(rec, 0.0, psi0, 1.0);
        size_t k = 1;
        while (k < ns) {
            const double ts = static_cast<double>(k) * spec.dt_s;
            const double t = ode.step(ts);
            const double n2 = ode.y().squaredNorm();
            if (n2 <= r) {
                double lo = ode.t_old(), hi = t;
                while (hi - lo > spec.jump_time_tol * std::max(1.0, hi)) {
                    const double mid = 0.5 * (lo + hi);
                    if (ode.dense(mid).squaredNorm() > r) lo = mid;
                    else hi = mid;
                }
                CVec after = apply_b(ode.dense(hi));
                const double an = after.norm();
                if (!(an > 0.0)) throw numerical_error("jump applied to a state with zero photon number");
                rec.jump_times.push_back(hi);
                ode.reset(hi, after / an);
                r = rng.next();
                continue;
            }
            if (t >= ts) {
                record(rec, ts, ode.y(), n2);
                ++k;
            }
        }
        return rec;
    }
};

JumpEvolver::JumpEvolver(const ModelParams& p, const EnsembleSpec& spec) : prop_(spec.propagator) {
    ModelParams check = p;
    if (check.kappa == 0.0) check.kappa = 1.0;  // kappa = 0 is plain unitary evolution
    validate(check);
    validate(spec);
    auto impl = std::make_shared<Impl>();
    impl->p = p;
    impl->spec = spec;
    const CMat heff = effective_hamiltonian(p, spec.space);
    impl->minus_i_heff = (cplx(0.0, -1.0) * heff).sparseView();
    if (prop_ == Propagator::Spectral) {
        Eigen::ComplexEigenSolver<CMat> es(heff);
        if (es.info() != Eigen::Success) {
            prop_ = Propagator::RungeKutta;
        } else {
            impl->V = es.eigenvectors();
            impl->mu = es.eigenvalues();
            impl->Vinv = impl->V.partialPivLu().inverse();
            cond_ = impl->V.norm() * impl->Vinv.norm() / static_cast<double>(spec.space.dim);
            const double recon = (heff * impl->V - impl->V * impl->mu.asDiagonal()).norm() / heff.norm();
            if (!(cond_ < spec.max_condition) || !(recon < 1e-10)) prop_ = Propagator::RungeKutta;
        }
    }
    if (spec.initial == InitialEnsemble::SteadyStateMixture) {
        const CMat h = 0.5 * (spec.initial_rho + spec.initial_rho.adjoint());
        Eigen::SelfAdjointEigenSolver<CMat> es(h);
        Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0);
        w /= w.sum();
        impl->mix_vecs = es.eigenvectors();
        impl->mix_cdf.resize(w.size());
        double acc = 0.0;
        for (Eigen::Index i = 0; i < w.size(); ++i) impl->mix_cdf[i] = (acc += w[i]);
    }
    impl_ = std::move(impl);
}

TrajectoryRecord JumpEvolver::run(std::uint64_t seed, std::size_t index) const {
    return prop_ == Propagator::Spectral ? impl_->run_spectral(seed, index) : impl_->run_rk(seed, index);
}

TrajectoryRecord evolve_trajectory(const EnsembleSpec& spec, const ModelParams& p, std::uint64_t seed,
                                   std::size_t index) {
    return JumpEvolver(p, spec).run(seed, index);
}

void run_ensemble_streaming(const EnsembleSpec& spec, const ModelParams& p, int workers,
                            const std::function<void(int, const TrajectoryRecord&)>& sink) {
    const JumpEvolver ev(p, spec);
    parallel_for(static_cast<size_t>(spec.n_traj), workers, [&](size_t r) {
        try {
            sink(static_cast<int>(r), ev.run(spec.base_seed + r, r));
        } catch (const Error& e) {
            throw Error(e.kind(), "trajectory " + std::to_string(r) + ": " + e.what());
        }
    });
}

std::vector<TrajectoryRecord> run_ensemble(const EnsembleSpec& spec, const ModelParams& p, int workers) {
    std::vector<TrajectoryRecord> out(static_cast<size_t>(spec.n_traj));
    run_ensemble_streaming(spec, p, workers,
                           [&out](int r, const TrajectoryRecord& rec) { out[static_cast<size_t>(r)] = rec; });
    return out;
}

std::vector<CMat> evolve_density(const SpMat& L, const CMat& rho0, const std::vector<double>& times, double rtol,
                                 double atol) {
    const int N = static_cast<int>(rho0.rows());
    DormandPrince<CVec> ode([&L](double, const CVec& y, CVec& dy) { dy = L * y; }, OdeOptions{rtol, atol});
    ode.reset(0.0, vec(rho0));
    std::vector<CMat> out;
    out.reserve(times.size());
    for (double t : times) {
        if (t < ode.t()) throw invalid_parameter("evolve_density needs ascending non-negative times");
        while (ode.t() < t) ode.step(t);
        out.push_back(unvec(ode.y(), N));
    }
    return out;
}

} // namespace kerrflow

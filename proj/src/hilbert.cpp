#include "kerrflow/hilbert.hpp"

#include "kerrflow/errors.hpp"
#include "kerrflow/semiclassics.hpp"

#include <Eigen/SparseLU>
#include <arpack/arpack.hpp>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace kerrflow {

FockSpace::FockSpace(int n) : dim(n) {
    if (n < 2) throw invalid_parameter("Fock dimension must be at least 2");
}

CVec coherent_state(const FockSpace& s, cplx alpha) {
    CVec v(s.dim);
    v[0] = 1.0;
    for (int k = 1; k < s.dim; ++k) v[k] = v[k - 1] * alpha / std::sqrt(static_cast<double>(k));
    return v / v.norm();
}

CMat annihilation(const FockSpace& s) {
    CMat b = CMat::Zero(s.dim, s.dim);
    for (int n = 1; n < s.dim; ++n) b(n - 1, n) = std::sqrt(static_cast<double>(n));
    return b;
}

CMat number_op(const FockSpace& s) {
    CMat n = CMat::Zero(s.dim, s.dim);
    for (int k = 0; k < s.dim; ++k) n(k, k) = static_cast<double>(k);
    return n;
}

CMat quadrature_x(const FockSpace& s, double aleph) {
    const CMat b = annihilation(s);
    return (b + b.adjoint()) / (2.0 * std::sqrt(aleph));
}

CMat quadrature_y(const FockSpace& s, double aleph) {
    const CMat b = annihilation(s);
    return (b - b.adjoint()) / (cplx(0.0, 2.0) * std::sqrt(aleph));
}

CMat hamiltonian(const ModelParams& p, const FockSpace& s) {
    const CMat b = annihilation(s);
    const CMat bd = b.adjoint();
    const CMat b2 = b * b;
    const CMat bd2 = bd * bd;
    const cplx e = std::exp(cplx(0.0, -p.phi));
    CMat H = (-p.delta + p.u) * (bd * b) + 0.5 * p.u * (bd2 * b2) + 0.5 * p.g * (bd2 + b2) +
             p.f * (e * bd + std::conj(e) * b);
    return 0.5 * (H + H.adjoint());
}

CMat effective_hamiltonian(const ModelParams& p, const FockSpace& s) {
    return hamiltonian(p, s) - cplx(0.0, 0.5 * p.kappa) * number_op(s);
}

namespace {

using Triplet = Eigen::Triplet<cplx>;

// L = I kron K + conj(K) kron I + kappa conj(b) kron b, with K = -i H - (kappa/2) b^dag b.
std::vector<Triplet> liouvillian_triplets(const ModelParams& p, const FockSpace& s) {
    const int N = s.dim;
    const CMat K = cplx(0.0, -1.0) * effective_hamiltonian(p, s);
    const CMat b = annihilation(s);
    std::vector<Triplet> t;
    t.reserve(static_cast<size_t>(N) * N * 12);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const cplx v = K(i, j);
            if (v == cplx(0.0)) continue;
            for (int a = 0; a < N; ++a) {
                t.emplace_back(a * N + i, a * N + j, v);
                t.emplace_back(i * N + a, j * N + a, std::conj(v));
            }
        }
    for (int n = 1; n < N; ++n) {
        // conj(b)(n-1, n) kron b(m-1, m)
        const double bn = std::sqrt(static_cast<double>(n));
        for (int m = 1; m < N; ++m)
            t.emplace_back((n - 1) * N + (m - 1), n * N + m, p.kappa * bn * std::sqrt(static_cast<double>(m)));
    }
    return t;
}

} // namespace

SpMat liouvillian(const ModelParams& p, const FockSpace& s) {
    const int n2 = s.dim * s.dim;
    SpMat L(n2, n2);
    const auto t = liouvillian_triplets(p, s);
    L.setFromTriplets(t.begin(), t.end());
    L.makeCompressed();
    return L;
}

CVec vec(const CMat& rho) { return Eigen::Map<const CVec>(rho.data(), rho.size()); }

CMat unvec(const CVec& v, int n) { return Eigen::Map<const CMat>(v.data(), n, n); }

double tail_population(const CMat& rho) {
    const int N = static_cast<int>(rho.rows());
    const int top = std::max(1, (N + 9) / 10);
    double s = 0.0;
    for (int k = N - top; k < N; ++k) s += std::abs(rho(k, k).real());
    return s;
}

DensityChecks check_density(const CMat& rho) {
    DensityChecks c;
    c.hermiticity = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    c.trace_error = std::abs(rho.trace() - cplx(1.0));
    const CMat h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    c.min_eigenvalue = es.eigenvalues().minCoeff();
    c.tail = tail_population(rho);
    return c;
}

DensityMatrix steady_state(const SpMat& L, const FockSpace& s, const SteadyStateOptions& opt) {
    const int N = s.dim;
    const int n2 = N * N;
    if (L.rows() != n2 || L.cols() != n2) throw invalid_parameter("superoperator does not match the Fock space");
    std::vector<Triplet> t;
    t.reserve(static_cast<size_t>(L.nonZeros()) + N);
    for (int c = 0; c < L.outerSize(); ++c)
        for (SpMat::InnerIterator it(L, c); it; ++it)
            if (it.row() != 0) t.emplace_back(static_cast<int>(it.row()), c, it.value());
    for (int k = 0; k < N; ++k) t.emplace_back(0, k * N + k, cplx(1.0));
    SpMat A(n2, n2);
    A.setFromTriplets(t.begin(), t.end());
    A.makeCompressed();

    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
        throw numerical_error("steady-state system is singular: the stationary state is not unique (multiplicity > 1)");
    CVec rhs = CVec::Zero(n2);
    rhs[0] = 1.0;
    CVec x = lu.solve(rhs);
    const CVec r1 = rhs - A * x;
    x += lu.solve(r1);
    if (lu.info() != Eigen::Success || !x.allFinite())
        throw numerical_error("steady-state solve failed");

    DensityMatrix out;
    out.space = s;
    CMat rho = unvec(x, N);
    rho = (0.5 * (rho + rho.adjoint())).eval();
    rho /= rho.trace().real();
    out.rho = rho;
    out.checks = check_density(rho);
    out.checks.residual = (L * vec(rho)).norm();
    if (out.checks.min_eigenvalue < -opt.positivity_tol) {
        std::ostringstream os;
        os << "steady state has a negative eigenvalue " << out.checks.min_eigenvalue
           << "; increase the Fock dimension (N=" << N << ")";
        throw numerical_error(os.str());
    }
    if (opt.enforce_tail && out.checks.tail > opt.tail_tol) {
        std::ostringstream os;
        os << "truncation inadequate: top-level population " << out.checks.tail << " exceeds " << opt.tail_tol
           << " at N=" << N << "; increase the Fock dimension";
        throw resource_error(os.str());
    }
    return out;
}

FockSpace choose_truncation(const ModelParams& p, double aleph, const TruncationOptions& opt) {
    const ScaledParams sp = to_scaled(p, aleph);
    ModelParams q = p;
    q.u = sp.tilde_u;
    q.f = sp.tilde_f;
    double nmax = 0.0;
    for (const auto& fp : fixed_points(q)) nmax = std::max(nmax, fp.n0);
    const double m = aleph * nmax;
    const int N = static_cast<int>(std::ceil(opt.c1 * m + opt.c2 * std::sqrt(m) + opt.c3));
    if (N > opt.hard_cap)
        throw resource_error("required Fock dimension " + std::to_string(N) + " exceeds the cap " +
                             std::to_string(opt.hard_cap));
    return FockSpace(std::max(N, 2));
}

DensityMatrix steady_state_auto(const ModelParams& p, double aleph, const SteadyStateOptions& sopt,
                                const TruncationOptions& topt, int n_override) {
    FockSpace s = n_override > 0 ? FockSpace(n_override) : choose_truncation(p, aleph, topt);
    SteadyStateOptions inner = sopt;
    inner.enforce_tail = false;
    inner.positivity_tol = std::numeric_limits<double>::infinity();
    for (;;) {
        DensityMatrix d = steady_state(liouvillian(p, s), s, inner);
        const bool tail_ok = !sopt.enforce_tail || d.checks.tail <= sopt.tail_tol;
        const bool pos_ok = d.checks.min_eigenvalue >= -sopt.positivity_tol;
        if (tail_ok && pos_ok) return d;
        if (s.dim >= topt.hard_cap) {
            std::ostringstream os;
            os << "steady state not converged at the Fock-dimension cap " << topt.hard_cap << " (tail "
               << d.checks.tail << ", min eigenvalue " << d.checks.min_eigenvalue << ")";
            throw resource_error(os.str());
        }
        s = FockSpace(std::min(2 * s.dim, topt.hard_cap));
    }
}

cplx expect_c(const CMat& op, const CMat& rho) { return (op.cwiseProduct(rho.transpose())).sum(); }

double expect(const CMat& op, const CMat& rho) { return expect_c(op, rho).real(); }

double rssp(const DensityMatrix& rho0, double aleph) {
    if (!(aleph > 0.0)) throw invalid_parameter("aleph must be positive");
    double n = 0.0;
    for (int k = 0; k < rho0.rho.rows(); ++k) n += k * rho0.rho(k, k).real();
    return n / aleph;
}

namespace {

void sort_modes(LiouvillianSpectrum& sp) {
    const Eigen::Index m = sp.eigenvalues.size();
    std::vector<Eigen::Index> idx(static_cast<size_t>(m));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        const cplx la = sp.eigenvalues[a], lb = sp.eigenvalues[b];
        if (la.real() != lb.real()) return la.real() > lb.real();
        return la.imag() > lb.imag();
    });
    Eigen::VectorXcd ev(m);
    CMat R(sp.right.rows(), m), Lf(sp.left.rows(), m);
    for (Eigen::Index k = 0; k < m; ++k) {
        ev[k] = sp.eigenvalues[idx[static_cast<size_t>(k)]];
        R.col(k) = sp.right.col(idx[static_cast<size_t>(k)]);
        Lf.col(k) = sp.left.col(idx[static_cast<size_t>(k)]);
    }
    sp.eigenvalues = ev;
    sp.right = R;
    sp.left = Lf;
}

// Fixes the stationary mode to r_0 = rho_0 (unit trace), l_0 = identity, and records diagnostics.
void finish_spectrum(LiouvillianSpectrum& sp, const SpMat& L) {
    sort_modes(sp);
    const int N = sp.dim;
    if (sp.eigenvalues.size() > 0) {
        cplx tr(0.0);
        for (int k = 0; k < N; ++k) tr += sp.right(k * N + k, 0);
        if (std::abs(tr) > 0.0) {
            sp.right.col(0) /= tr;
            sp.left.col(0) *= std::conj(tr);
        }
    }
    double res = 0.0;
    for (Eigen::Index k = 0; k < sp.eigenvalues.size(); ++k) {
        const CVec r = sp.right.col(k);
        res = std::max(res, (L * r - sp.eigenvalues[k] * r).norm() / std::max(r.norm(), 1e-300));
    }
    sp.max_residual = res;
    const CMat G = sp.left.adjoint() * sp.right;
    sp.biorthogonality_error = (G - CMat::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

// Rescales left vectors so that left^H right = I. Modes whose eigenvalues coincide
// within a relative tolerance are treated as one block and biorthonormalized jointly.
void biorthonormalize(const Eigen::VectorXcd& w, const CMat& right, CMat& left) {
    const Eigen::Index m = w.size();
    std::vector<bool> done(static_cast<size_t>(m), false);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (done[static_cast<size_t>(i)]) continue;
        std::vector<Eigen::Index> blk{i};
        const double tol = 1e-9 * (1.0 + std::abs(w[i]));
        for (Eigen::Index j = i + 1; j < m; ++j)
            if (!done[static_cast<size_t>(j)] && std::abs(w[j] - w[i]) < tol) blk.push_back(j);
        for (auto j : blk) done[static_cast<size_t>(j)] = true;
        const Eigen::Index b = static_cast<Eigen::Index>(blk.size());
        CMat R(right.rows(), b), Lb(left.rows(), b);
        for (Eigen::Index q = 0; q < b; ++q) {
            R.col(q) = right.col(blk[static_cast<size_t>(q)]);
            Lb.col(q) = left.col(blk[static_cast<size_t>(q)]);
        }
        const CMat M = Lb.adjoint() * R;
        const CMat Lnew = Lb * M.fullPivLu().inverse().adjoint();
        for (Eigen::Index q = 0; q < b; ++q) left.col(blk[static_cast<size_t>(q)]) = Lnew.col(q);
    }
}

LiouvillianSpectrum dense_spectrum(const SpMat& L, int N) {
    const int n2 = N * N;
    CMat A = CMat(L);
    Eigen::VectorXcd w(n2);
    CMat vl(n2, n2), vr(n2, n2);
    const lapack_int info =
        LAPACKE_zgeev(LAPACK_COL_MAJOR, 'V', 'V', n2, reinterpret_cast<lapack_complex_double*>(A.data()), n2,
                      reinterpret_cast<lapack_complex_double*>(w.data()),
                      reinterpret_cast<lapack_complex_double*>(vl.data()), n2,
                      reinterpret_cast<lapack_complex_double*>(vr.data()), n2);
    if (info != 0) throw numerical_error("dense Liouvillian eigensolver failed (zgeev info " + std::to_string(info) + ")");
    LiouvillianSpectrum sp;
    sp.dim = N;
    sp.method = "dense";
    sp.eigenvalues = w;
    biorthonormalize(w, vr, vl);
    sp.left = std::move(vl);
    sp.right = std::move(vr);
    return sp;
}

struct ArnoldiResult {
    Eigen::VectorXcd values;
    CMat vectors;
};

ArnoldiResult shift_invert_arnoldi(const SpMat& A, cplx sigma, int nev, double tol, int max_iter) {
    const int n = static_cast<int>(A.rows());
    SpMat S = A;
    for (int k = 0; k < n; ++k) S.coeffRef(k, k) -= sigma;
    S.makeCompressed();
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(S);
    lu.factorize(S);
    if (lu.info() != Eigen::Success) throw numerical_error("shift-invert factorization failed; move the shift");

    const int ncv = std::min(n, std::max(2 * nev + 1, nev + 20));
    std::vector<cplx> resid(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) resid[static_cast<size_t>(i)] = cplx(1.0 / (1.0 + i % 97), 0.01 * (i % 13));
    std::vector<cplx> V(static_cast<size_t>(n) * ncv), workd(3 * static_cast<size_t>(n));
    const int lworkl = 3 * ncv * ncv + 5 * ncv;
    std::vector<cplx> workl(static_cast<size_t>(lworkl));
    std::vector<double> rwork(static_cast<size_t>(ncv));
    a_int iparam[11] = {0};
    a_int ipntr[14] = {0};
    iparam[0] = 1;
    iparam[2] = max_iter;
    iparam[6] = 1;
    a_int ido = 0, info = 1;
    CVec xin(n), yout(n);
    for (;;) {
        arpack::naupd(ido, arpack::bmat::identity, n, arpack::which::largest_magnitude, nev, tol, resid.data(), ncv,
                      V.data(), n, iparam, ipntr, workd.data(), workl.data(), lworkl, rwork.data(), info);
        if (ido == -1 || ido == 1) {
            cplx* x = workd.data() + ipntr[0] - 1;
            cplx* y = workd.data() + ipntr[1] - 1;
            xin = Eigen::Map<CVec>(x, n);
            yout = lu.solve(xin);
            Eigen::Map<CVec>(y, n) = yout;
        } else {
            break;
        }
    }
    if (info < 0 || info == 1)
        throw numerical_error("Arnoldi iteration did not converge (info " + std::to_string(info) + ", converged " +
                              std::to_string(iparam[4]) + " of " + std::to_string(nev) + ")");
    std::vector<a_int> select(static_cast<size_t>(ncv));
    std::vector<cplx> d(static_cast<size_t>(nev) + 1), z(static_cast<size_t>(n) * nev), workev(2 * static_cast<size_t>(ncv));
    a_int info2 = 0;
    arpack::neupd(1, arpack::howmny::ritz_vectors, select.data(), d.data(), z.data(), n, cplx(0.0), workev.data(),
                  arpack::bmat::identity, n, arpack::which::largest_magnitude, nev, tol, resid.data(), ncv, V.data(), n,
                  iparam, ipntr, workd.data(), workl.data(), lworkl, rwork.data(), info2);
    if (info2 != 0) throw numerical_error("Arnoldi eigenvector extraction failed (info " + std::to_string(info2) + ")");
    const int nconv = static_cast<int>(iparam[4]);
    ArnoldiResult r;
    r.values.resize(nconv);
    r.vectors.resize(n, nconv);
    for (int k = 0; k < nconv; ++k) {
        r.values[k] = sigma + 1.0 / d[static_cast<size_t>(k)];
        r.vectors.col(k) = Eigen::Map<CVec>(z.data() + static_cast<size_t>(k) * n, n);
    }
    return r;
}

LiouvillianSpectrum iterative_spectrum(const SpMat& L, int N, int k, const SpectrumOptions& opt) {
    const cplx sigma(opt.shift + opt.shift_offset, 0.0);
    const ArnoldiResult right = shift_invert_arnoldi(L, sigma, k, opt.tol, opt.max_iter);
    const SpMat LH = L.adjoint();
    const ArnoldiResult left = shift_invert_arnoldi(LH, std::conj(sigma), k, opt.tol, opt.max_iter);

    // Pair right eigenvalue lambda with left eigenvalue conj(lambda).
    std::vector<int> ri, li;
    std::vector<bool> used(static_cast<size_t>(left.values.size()), false);
    for (Eigen::Index i = 0; i < right.values.size(); ++i) {
        int best = -1;
        double bd = 1e-6 * (1.0 + std::abs(right.values[i]));
        for (Eigen::Index j = 0; j < left.values.size(); ++j) {
            if (used[static_cast<size_t>(j)]) continue;
            const double dist = std::abs(std::conj(left.values[j]) - right.values[i]);
            if (dist < bd) {
                bd = dist;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0) {
            used[static_cast<size_t>(best)] = true;
            ri.push_back(static_cast<int>(i));
            li.push_back(best);
        }
    }
    const int m = static_cast<int>(ri.size());
    if (m == 0) throw numerical_error("no left/right eigenvalue pairs matched in the iterative spectrum");
    LiouvillianSpectrum sp;
    sp.dim = N;
    sp.method = "shift-invert-arnoldi";
    sp.eigenvalues.resize(m);
    sp.right.resize(L.rows(), m);
    CMat Lraw(L.rows(), m);
    for (int q = 0; q < m; ++q) {
        sp.eigenvalues[q] = right.values[ri[static_cast<size_t>(q)]];
        sp.right.col(q) = right.vectors.col(ri[static_cast<size_t>(q)]);
        Lraw.col(q) = left.vectors.col(li[static_cast<size_t>(q)]);
    }
    biorthonormalize(sp.eigenvalues, sp.right, Lraw);
    if (!Lraw.allFinite()) throw numerical_error("left/right eigenvector overlap matrix is singular");
    sp.left = std::move(Lraw);
    return sp;
}

} // namespace

LiouvillianSpectrum liouvillian_spectrum(const SpMat& L, const FockSpace& s, int k, const SpectrumOptions& opt) {
    const int n2 = s.dim * s.dim;
    if (L.rows() != n2) throw invalid_parameter("superoperator does not match the Fock space");
    LiouvillianSpectrum sp;
    if (s.dim <= opt.dense_max_dim) {
        sp = dense_spectrum(L, s.dim);
        finish_spectrum(sp, L);
        if (k > 0 && k < sp.eigenvalues.size()) {
            sp.eigenvalues.conservativeResize(k);
            sp.right.conservativeResize(Eigen::NoChange, k);
            sp.left.conservativeResize(Eigen::NoChange, k);
        }
    } else {
        if (k < 2) throw invalid_parameter("iterative spectrum needs k >= 2");
        if (k > n2 - 2) throw invalid_parameter("k too large for the iterative solver");
        sp = iterative_spectrum(L, s.dim, k, opt);
        finish_spectrum(sp, L);
    }
    return sp;
}

double wigner_point(const CMat& rho, cplx alpha) {
    const int N = static_cast<int>(rho.rows());
    const double x = 4.0 * std::norm(alpha);  // |2 alpha|^2
    const double theta = std::arg(alpha);
    const double lx = x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (int k = 0; k < N; ++k) {
        // f_m = sqrt(m!/(m+k)!) L_m^(k)(x) x^(k/2) e^(-x/2), carried as value * exp(scale).
        double scale;
        if (k == 0) scale = -0.5 * x;
        else if (x == 0.0) break;  // only the diagonal survives at the origin
        else scale = 0.5 * k * lx - 0.5 * x - 0.5 * std::lgamma(k + 1.0);
        double gm1 = 0.0, g = 1.0, es = std::exp(scale);
        cplx acc(0.0);
        for (int m = 0; m + k < N; ++m) {
            const double f = g * es;
            const cplx r = rho(m, m + k);
            acc += (m % 2 ? -1.0 : 1.0) * f * r;
            const double gn = ((2.0 * m + 1.0 + k - x) * g - std::sqrt(static_cast<double>(m) * (m + k)) * gm1) /
                              std::sqrt((m + 1.0) * (m + 1.0 + k));
            gm1 = g;
            g = gn;
            const double ag = std::abs(g);
            if (ag > 1e100) {
                gm1 /= ag;
                g /= ag;
                scale += std::log(ag);
                es = std::exp(scale);
            }
        }
        if (k == 0) total += acc.real();
        else total += 2.0 * (std::polar(1.0, k * theta) * acc).real();
    }
    return 2.0 / std::numbers::pi * total;
}

WignerGrid wigner(const CMat& rho, const std::vector<double>& xs, const std::vector<double>& ys, double aleph) {
    if (xs.size() < 2 || ys.size() < 2) throw invalid_parameter("Wigner grid needs at least 2 points per axis");
    WignerGrid w;
    w.x_axis = xs;
    w.y_axis = ys;
    w.values.resize(static_cast<Eigen::Index>(ys.size()), static_cast<Eigen::Index>(xs.size()));
    const double sa = std::sqrt(aleph);
    for (size_t i = 0; i < ys.size(); ++i)
        for (size_t j = 0; j < xs.size(); ++j)
            w.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                wigner_point(rho, cplx(xs[j], ys[i]) * sa);
    const double dx = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
    const double dy = (ys.back() - ys.front()) / static_cast<double>(ys.size() - 1);
    double tot = 0.0, abs_tot = 0.0, edge = 0.0;
    const Eigen::Index ny = w.values.rows(), nx = w.values.cols();
    const Eigen::Index bx = std::max<Eigen::Index>(1, nx / 20), by = std::max<Eigen::Index>(1, ny / 20);
    for (Eigen::Index i = 0; i < ny; ++i)
        for (Eigen::Index j = 0; j < nx; ++j) {
            const double v = w.values(i, j);
            tot += v;
            abs_tot += std::abs(v);
            if (i < by || i >= ny - by || j < bx || j >= nx - bx) edge += std::abs(v);
        }
    w.integral = tot * dx * dy;
    w.boundary_fraction = abs_tot > 0.0 ? edge / abs_tot : 0.0;
    w.boundary_warning = w.boundary_fraction > 1e-4;
    return w;
}

std::vector<WignerPeak> wigner_maxima(const WignerGrid& w, double rel_threshold) {
    const Eigen::MatrixXd& v = w.values;
    std::vector<WignerPeak> out;
    if (v.rows() < 3 || v.cols() < 3) return out;
    const double gmax = v.maxCoeff();
    if (!(gmax > 0.0)) return out;
    for (Eigen::Index i = 1; i + 1 < v.rows(); ++i) {
        for (Eigen::Index j = 1; j + 1 < v.cols(); ++j) {
            const double c = v(i, j);
            if (c < rel_threshold * gmax) continue;
            bool is_max = true;
            for (int di = -1; di <= 1 && is_max; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const double nb = v(i + di, j + dj);
                    // ties go to the first grid point in storage order
                    if (nb > c || (nb == c && (di < 0 || (di == 0 && dj < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (!is_max) continue;
            auto refine = [](double fm, double f0, double fp) {
                const double d = fm - 2.0 * f0 + fp;
                return d < 0.0 ? 0.5 * (fm - fp) / d : 0.0;
            };
            const double hx = w.x_axis[static_cast<size_t>(j + 1)] - w.x_axis[static_cast<size_t>(j)];
            const double hy = w.y_axis[static_cast<size_t>(i + 1)] - w.y_axis[static_cast<size_t>(i)];
            WignerPeak pk;
            pk.x = w.x_axis[static_cast<size_t>(j)] + hx * refine(v(i, j - 1), c, v(i, j + 1));
            pk.y = w.y_axis[static_cast<size_t>(i)] + hy * refine(v(i - 1, j), c, v(i + 1, j));
            pk.value = c;
            out.push_back(pk);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const WignerPeak& a, const WignerPeak& b) { return a.value > b.value; });
    return out;
}

} // namespace kerrflow

#include "kerrflow/errors.hpp"
#include "kerrflow/hilbert.hpp"
#include "kerrflow/spectra.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace kerrflow;

namespace {

const cplx I(0.0, 1.0);

double max_abs(const CMat& m) { return m.cwiseAbs().maxCoeff(); }

ModelParams random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return ModelParams{2 * u(rng), std::abs(u(rng)), std::abs(u(rng)), std::abs(u(rng)), 3 * std::abs(u(rng)),
                       0.1 + std::abs(u(rng))};
}

CMat random_hermitian_density(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    CMat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
    CMat r = a * a.adjoint();
    return r / r.trace();
}

} // namespace

TEST(Operators, Annihilation) {
    const CMat b2 = annihilation(FockSpace(2));
    EXPECT_EQ(b2(0, 1), cplx(1.0));
    EXPECT_EQ(b2(0, 0), cplx(0.0));
    EXPECT_EQ(b2(1, 0), cplx(0.0));
    const CMat b3 = annihilation(FockSpace(3));
    EXPECT_DOUBLE_EQ(b3(0, 1).real(), 1.0);
    EXPECT_DOUBLE_EQ(b3(1, 2).real(), std::sqrt(2.0));
    EXPECT_EQ((b3.array() != cplx(0.0)).count(), 2);
}

TEST(Operators, CommutatorOffTheEdge) {
    const int n = 12;
    const CMat b = annihilation(FockSpace(n));
    const CMat c = b * b.adjoint() - b.adjoint() * b;
    for (int i = 0; i < n - 1; ++i) EXPECT_NEAR(std::abs(c(i, i) - 1.0), 0.0, 1e-14);
    EXPECT_NEAR(c(n - 1, n - 1).real(), -(n - 1.0), 1e-12);
}

TEST(Hamiltonian, TwoLevel) {
    const ModelParams p{0.7, 1.0, 0.4, 0.5, 0.3, 0.1};
    const CMat h = hamiltonian(p, FockSpace(2));
    EXPECT_NEAR(std::abs(h(0, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(h(0, 1) - 0.5 * std::exp(I * 0.3)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(h(1, 0) - 0.5 * std::exp(-I * 0.3)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(h(1, 1) - (-0.7 + 1.0)), 0.0, 1e-15);
}

TEST(Hamiltonian, DiagonalWithoutDrives) {
    const ModelParams p{0.7, 0.3, 0.0, 0.0, 0.0, 0.1};
    const CMat h = hamiltonian(p, FockSpace(8));
    for (int n = 0; n < 8; ++n) EXPECT_NEAR(h(n, n).real(), (-0.7 + 0.3) * n + 0.15 * n * (n - 1), 1e-13);
    EXPECT_NEAR((h - CMat(h.diagonal().asDiagonal())).norm(), 0.0, 1e-15);
}

TEST(Hamiltonian, Hermitian) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 10; ++i) {
        const CMat h = hamiltonian(random_params(rng), FockSpace(50));
        EXPECT_LT(max_abs(h - h.adjoint()), 1e-12);
    }
}

TEST(Liouvillian, TracelessHermitianOutput) {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 5; ++i) {
        const FockSpace s(10);
        const SpMat L = liouvillian(random_params(rng), s);
        const CMat out = unvec(L * vec(random_hermitian_density(10, rng)), 10);
        EXPECT_LT(std::abs(out.trace()), 1e-10);
        EXPECT_LT(max_abs(out - out.adjoint()), 1e-10);
    }
}

TEST(Liouvillian, SinglePhotonDecay) {
    const FockSpace s(3);
    CMat rho = CMat::Zero(3, 3);
    rho(1, 1) = 1.0;
    const CMat out = unvec(liouvillian(ModelParams{0, 0, 0, 0, 0, 0.3}, s) * vec(rho), 3);
    CMat expect_out = CMat::Zero(3, 3);
    expect_out(0, 0) = 0.3;
    expect_out(1, 1) = -0.3;
    EXPECT_LT(max_abs(out - expect_out), 1e-15);
}

TEST(Liouvillian, TwoLevelConvention) {
    // |1><0| carries <b> and rotates like the classical amplitude, e^{(i delta - kappa/2) t}.
    const ModelParams p{1.3, 0, 0, 0, 0, 0.2};
    const FockSpace s(2);
    CMat rho = CMat::Zero(2, 2);
    rho(1, 0) = 1.0;
    const CMat out = unvec(liouvillian(p, s) * vec(rho), 2);
    EXPECT_NEAR(std::abs(out(1, 0) - cplx(-0.1, 1.3)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(out(0, 1)), 0.0, 1e-15);
}

TEST(SteadyState, Vacuum) {
    const FockSpace s(8);
    const auto d = steady_state(liouvillian(ModelParams{1.0, 1.0, 0, 0, 0, 0.1}, s), s);
    EXPECT_NEAR(d.rho(0, 0).real(), 1.0, 1e-12);
    EXPECT_LT(max_abs(d.rho) - 1.0, 1e-12);
    EXPECT_NEAR(rssp(d, 1.0), 0.0, 1e-12);
}

TEST(SteadyState, LinearCavityCoherent) {
    const ModelParams p{1.0, 0.0, 0.0, 1.0, 0.4, 0.1};
    const FockSpace s(30);
    const auto d = steady_state(liouvillian(p, s), s);
    const cplx beta0 = std::exp(-I * 0.4) / cplx(1.0, 0.05);
    const CVec psi = coherent_state(s, beta0);
    const double fidelity = (psi.adjoint() * d.rho * psi)(0, 0).real();
    EXPECT_GT(fidelity, 1.0 - 1e-8);
    EXPECT_NEAR(rssp(d, 1.0), std::norm(beta0), 1e-8);
    EXPECT_LT((liouvillian(p, s) * vec(d.rho)).norm(), 1e-10);
}

TEST(SteadyState, InvariantsOnReferencePoints) {
    for (double delta : {0.0, 1.0, 2.0, 3.0, 4.0}) {
        const ModelParams p{delta, 1.0, 0.4, 0.5, 0.0, 0.1};
        const auto d = steady_state_auto(p, 1.0);
        const auto c = check_density(d.rho);
        EXPECT_LT(c.hermiticity, 1e-12);
        EXPECT_LT(c.trace_error, 1e-12);
        EXPECT_GT(c.min_eigenvalue, -1e-10);
        EXPECT_LT(c.tail, 1e-8);
        EXPECT_LT((liouvillian(p, d.space) * vec(d.rho)).norm(), 1e-10);
        EXPECT_LE(d.space.dim, 40);
    }
}

TEST(Truncation, SmallWithoutDrive) {
    EXPECT_LE(choose_truncation(ModelParams{1.0, 1.0, 0.0, 0.0, 0.0, 0.1}, 1.0).dim, 12);
}

TEST(Truncation, GrowsWithAleph) {
    const auto n5 = choose_truncation(to_physical(ScaledParams{4.0, 1, 0.4, 1.5, 0, 0.1, 5.0}), 5.0).dim;
    const auto n20 = choose_truncation(to_physical(ScaledParams{4.0, 1, 0.4, 1.5, 0, 0.1, 20.0}), 20.0).dim;
    EXPECT_GT(n20, 3 * n5 / 2);
    // high branch n0 ~ 4.46 per unit aleph
    EXPECT_GT(n20, 20 * 4.4);
}

TEST(Truncation, CapRaisesResourceError) {
    TruncationOptions t;
    t.hard_cap = 20;
    try {
        choose_truncation(to_physical(ScaledParams{4.0, 1, 0.4, 1.5, 0, 0.1, 20.0}), 20.0, t);
        FAIL() << "expected a resource error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Resource);
    }
}

TEST(Spectrum, LinearCavityBranches) {
    const double delta = 0.8, kappa = 0.3;
    const FockSpace s(6);
    const auto spec = liouvillian_spectrum(liouvillian(ModelParams{delta, 0, 0, 0, 0, kappa}, s), s, 0);
    // every lambda_{nm} with n + m <= N - 1 must be present
    for (int n = 0; n < 6; ++n)
        for (int m = 0; n + m < 6; ++m) {
            const cplx target(-kappa * (n + m) / 2.0, delta * (n - m));
            double best = 1e9;
            for (Eigen::Index k = 0; k < spec.eigenvalues.size(); ++k)
                best = std::min(best, std::abs(spec.eigenvalues[k] - target));
            EXPECT_LT(best, 1e-8) << n << "," << m;
        }
}

TEST(Spectrum, KernelAndConjugation) {
    const ModelParams p{1.0, 1.0, 0.4, 0.5, 0.0, 0.1};
    const FockSpace s(12);
    const SpMat L = liouvillian(p, s);
    const auto spec = liouvillian_spectrum(L, s, 0);
    EXPECT_LT(std::abs(spec.eigenvalues[0]), 1e-10);
    const CMat r0 = spec.right_op(0) / spec.right_op(0).trace();
    const auto d = steady_state(L, s);
    EXPECT_LT(max_abs(r0 - d.rho), 1e-9);
    const CMat l0 = spec.left_op(0);
    EXPECT_LT(max_abs(l0 - l0(0, 0) * CMat::Identity(12, 12)), 1e-8);
    for (Eigen::Index k = 0; k < spec.eigenvalues.size(); ++k) {
        double best = 1e9;
        for (Eigen::Index j = 0; j < spec.eigenvalues.size(); ++j)
            best = std::min(best, std::abs(spec.eigenvalues[j] - std::conj(spec.eigenvalues[k])));
        EXPECT_LT(best, 1e-8);
        EXPECT_LE(spec.eigenvalues[k].real(), 1e-10);
    }
    EXPECT_LT(spec.biorthogonality_error, 1e-6);
}

TEST(Spectrum, IterativeMatchesDense) {
    const ModelParams p{2.0, 1.0, 0.4, 0.5, 0.0, 0.1};
    const FockSpace s(24);
    const SpMat L = liouvillian(p, s);
    const auto dense = liouvillian_spectrum(L, s, 0);
    SpectrumOptions opt;
    opt.dense_max_dim = 10;
    const auto sparse = liouvillian_spectrum(L, s, 12, opt);
    ASSERT_EQ(sparse.eigenvalues.size(), 12);
    EXPECT_EQ(sparse.method, "shift-invert-arnoldi");
    EXPECT_LT(sparse.max_residual, 1e-10);
    // real eigenvalues of this non-normal generator are conditioned at the 1e-8 level
    for (Eigen::Index k = 0; k < 12; ++k) {
        double best = 1e9;
        for (Eigen::Index j = 0; j < dense.eigenvalues.size(); ++j)
            best = std::min(best, std::abs(dense.eigenvalues[j] - sparse.eigenvalues[k]));
        EXPECT_LT(best, 1e-6);
    }
    // the returned modes are the twelve nearest the shift
    std::vector<double> dist(static_cast<size_t>(dense.eigenvalues.size()));
    for (Eigen::Index j = 0; j < dense.eigenvalues.size(); ++j)
        dist[static_cast<size_t>(j)] = std::abs(dense.eigenvalues[j] - opt.shift_offset);
    std::sort(dist.begin(), dist.end());
    for (Eigen::Index k = 0; k < 12; ++k) EXPECT_LE(std::abs(sparse.eigenvalues[k] - opt.shift_offset), dist[11] + 1e-6);
}

TEST(Wigner, Vacuum) {
    CMat rho = CMat::Zero(6, 6);
    rho(0, 0) = 1.0;
    for (cplx a : {cplx(0, 0), cplx(0.3, -0.2), cplx(-1, 0.5)})
        EXPECT_NEAR(wigner_point(rho, a), 2.0 / M_PI * std::exp(-2.0 * std::norm(a)), 1e-13);
}

TEST(Wigner, CoherentStateIsDisplacedGaussian) {
    const FockSpace s(40);
    const cplx beta(1.1, -0.7);
    const CVec psi = coherent_state(s, beta);
    const CMat rho = psi * psi.adjoint();
    for (cplx a : {beta, beta + cplx(0.3, 0.1), cplx(0, 0)})
        EXPECT_NEAR(wigner_point(rho, a), 2.0 / M_PI * std::exp(-2.0 * std::norm(a - beta)), 1e-10);
}

TEST(Wigner, GridNormalizationAndMaxima) {
    const double aleph = 5.0;
    const FockSpace s(60);
    const cplx b1(1.0, 0.5), b2(-1.0, -0.8);
    const CVec p1 = coherent_state(s, b1 * std::sqrt(aleph)), p2 = coherent_state(s, b2 * std::sqrt(aleph));
    const CMat rho = 0.6 * p1 * p1.adjoint() + 0.4 * p2 * p2.adjoint();
    const auto ax = linspace(-3.0, 3.0, 121);
    const auto w = wigner(rho, ax, ax, aleph);
    EXPECT_NEAR(w.integral, 1.0 / aleph, 1e-6);
    EXPECT_FALSE(w.boundary_warning);
    const auto pk = wigner_maxima(w, 0.1);
    ASSERT_EQ(pk.size(), 2u);
    EXPECT_NEAR(pk[0].x, 1.0, 1e-3);
    EXPECT_NEAR(pk[0].y, 0.5, 1e-3);
    EXPECT_NEAR(pk[1].x, -1.0, 1e-3);
    EXPECT_NEAR(pk[1].y, -0.8, 1e-3);
    EXPECT_NEAR(pk[0].value / pk[1].value, 1.5, 1e-6);
}

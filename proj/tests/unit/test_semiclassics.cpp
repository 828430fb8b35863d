#include "kerrflow/errors.hpp"
#include "kerrflow/semiclassics.hpp"

#include "../support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

using namespace kerrflow;

namespace {

ModelParams common(double delta, double f) { return ModelParams{delta, 1.0, 0.4, f, 0.0, 0.1}; }

int count(const std::vector<FixedPoint>& fps, FpClass c) {
    int n = 0;
    for (const auto& fp : fps) n += fp.fp_class == c;
    return n;
}

} // namespace

TEST(GpeRhs, Examples) {
    EXPECT_EQ(gpe_rhs(0.0, ModelParams{1, 1, 0.4, 0, 0, 0.1}), cplx(0.0, 0.0));
    const cplx r = gpe_rhs(0.0, ModelParams{0, 0, 0, 1, 0, 0.1});
    EXPECT_NEAR(r.real(), 0.0, 1e-15);
    EXPECT_NEAR(r.imag(), -1.0, 1e-15);
    EXPECT_NEAR(std::abs(gpe_rhs(1.0, ModelParams{1, 1, 0, 0, 0, 0})), 0.0, 1e-15);
}

TEST(GpeRhs, MatchesIndependentRealForm) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int i = 0; i < 200; ++i) {
        const ModelParams p{u(rng), std::abs(u(rng)), std::abs(u(rng)), std::abs(u(rng)), u(rng), 0.1 + std::abs(u(rng))};
        const oracle::Gpe o{p.delta, p.u, p.g, p.f, p.phi, p.kappa};
        const Eigen::Vector2d v(u(rng), u(rng));
        const cplx r = gpe_rhs(cplx(v[0], v[1]), p);
        const Eigen::Vector2d ro = o.rhs(v);
        EXPECT_NEAR(r.real(), ro[0], 1e-12);
        EXPECT_NEAR(r.imag(), ro[1], 1e-12);
    }
}

TEST(FixedPoints, UndrivenOrigin) {
    const auto fps = fixed_points(ModelParams{2.0, 1.0, 0.0, 0.0, 0.0, 0.1});
    ASSERT_EQ(fps.size(), 1u);
    EXPECT_LT(std::abs(fps[0].beta0), 1e-12);
}

TEST(FixedPoints, LinearCavity) {
    const ModelParams p{1.0, 0.0, 0.0, 1.0, 0.0, 0.1};
    const auto fps = fixed_points(p);
    ASSERT_EQ(fps.size(), 1u);
    // 1 / (1 + 0.05 i)
    EXPECT_NEAR(fps[0].beta0.real(), 0.9975062344139651, 1e-12);
    EXPECT_NEAR(fps[0].beta0.imag(), -0.04987531172069825, 1e-12);
    EXPECT_LT(std::abs(gpe_rhs(fps[0].beta0, p)), 1e-12);
}

TEST(FixedPoints, Region3aPoint) {
    const auto fps = fixed_points(common(0.7, 0.5));
    EXPECT_EQ(fps.size(), 3u);
    EXPECT_EQ(count(fps, FpClass::Attractor), 2);
    EXPECT_EQ(count(fps, FpClass::Saddle), 1);
    for (const auto& fp : fps)
        if (fp.fp_class == FpClass::Attractor) {
            EXPECT_EQ(fp.chirality, Chirality::CW);
        }
}

TEST(FixedPoints, Region3bPoint) {
    const auto fps = fixed_points(common(3.3, 1.5));
    EXPECT_EQ(fps.size(), 3u);
    int cw = 0, ccw = 0;
    for (const auto& fp : fps)
        if (fp.fp_class == FpClass::Attractor) {
            cw += fp.chirality == Chirality::CW;
            ccw += fp.chirality == Chirality::CCW;
        }
    EXPECT_EQ(cw, 1);
    EXPECT_EQ(ccw, 1);
}

TEST(FixedPoints, AgreeWithNewtonMultistart) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ud(-1.0, 6.0), uf(0.0, 2.0), ug(0.0, 0.8), uk(0.05, 0.5), up(0.0, 6.28);
    for (int i = 0; i < 60; ++i) {
        const ModelParams p{ud(rng), 1.0, ug(rng), uf(rng), up(rng), uk(rng)};
        const auto fps = fixed_points(p);
        const auto ref = oracle::newton_multistart({p.delta, p.u, p.g, p.f, p.phi, p.kappa});
        ASSERT_EQ(fps.size(), ref.size()) << "delta=" << p.delta << " f=" << p.f;
        for (const auto& z : ref) {
            double best = 1e9;
            for (const auto& fp : fps) best = std::min(best, std::abs(fp.beta0 - z));
            EXPECT_LT(best, 1e-6);
        }
    }
}

TEST(Linearize, PureDecay) {
    const Eigen::Matrix2d J = linearize(0.0, ModelParams{0, 0, 0, 0, 0, 0.1});
    EXPECT_NEAR((J - Eigen::Matrix2d::Identity() * -0.05).norm(), 0.0, 1e-15);
}

TEST(Linearize, DetunedDecayEigenvalues) {
    const Eigen::Matrix2d J = linearize(0.0, ModelParams{1.3, 0, 0, 0, 0, 0.1});
    const Eigen::Vector2cd ev = J.eigenvalues();
    for (int k = 0; k < 2; ++k) {
        EXPECT_NEAR(ev[k].real(), -0.05, 1e-14);
        EXPECT_NEAR(std::abs(ev[k].imag()), 1.3, 1e-14);
    }
}

TEST(Linearize, MatchesFiniteDifferences) {
    for (const auto& p : {common(0.7, 0.5), common(3.3, 1.5), common(4.0, 1.5), common(-0.5, 1.0)}) {
        const oracle::Gpe o{p.delta, p.u, p.g, p.f, p.phi, p.kappa};
        for (const auto& fp : fixed_points(p)) {
            const Eigen::Matrix2d fd = o.jacobian_fd({fp.beta0.real(), fp.beta0.imag()});
            EXPECT_LT((fd - fp.jacobian).cwiseAbs().maxCoeff(), 1e-5);
        }
    }
}

TEST(Classify, CanonicalMatrices) {
    Eigen::Matrix2d rot;
    rot << 0, -1, 1, 0;
    EXPECT_EQ(classify(rot, 1e-8).second, Chirality::CCW);
    Eigen::Matrix2d sad;
    sad << -1, 0, 0, 1;
    const auto c = classify(sad, 1e-8);
    EXPECT_EQ(c.first, FpClass::Saddle);
    EXPECT_EQ(c.second, Chirality::Undefined);
    Eigen::Matrix2d node;
    node << -1, 0, 0, -2;
    const auto n = classify(node, 1e-8);
    EXPECT_EQ(n.first, FpClass::Attractor);
    EXPECT_EQ(n.second, Chirality::NonSpiraling);
}

TEST(Classify, ChiralityAgreesWithWinding) {
    for (double d : {0.5, 1.0, -0.7, -2.0}) {
        Eigen::Matrix2d J;
        J << -0.05, d, -d, -0.05;
        const auto c = classify(J, 1e-8);
        EXPECT_EQ(c.first, FpClass::Attractor);
        const double turns = oracle::linear_winding(J, {1.0, 0.0}, 20.0, 20000);
        EXPECT_EQ(c.second, turns > 0 ? Chirality::CCW : Chirality::CW);
        EXPECT_GT(std::abs(turns), 1.0);
    }
}

TEST(Flow, AttractorCapturesItself) {
    const ModelParams p = common(0.7, 0.5);
    std::vector<cplx> att;
    for (const auto& fp : fixed_points(p))
        if (fp.fp_class == FpClass::Attractor) att.push_back(fp.beta0);
    for (size_t k = 0; k < att.size(); ++k) {
        const auto tr = integrate_flow(att[k], p, 10.0, att);
        ASSERT_TRUE(tr.attractor.has_value());
        EXPECT_EQ(*tr.attractor, static_cast<int>(k));
    }
}

TEST(Flow, DampedOscillatorConvergesToOrigin) {
    const ModelParams p{1.0, 1.0, 0.0, 0.0, 0.0, 0.5};
    for (cplx b : {cplx(1, 0), cplx(-0.5, 1.5), cplx(0.1, -0.3)}) {
        const auto tr = integrate_flow(b, p, 200.0);
        ASSERT_TRUE(tr.attractor.has_value());
        EXPECT_LT(std::abs(tr.beta.back()), 1e-3);
    }
}

TEST(Flow, BasinsSplitAcrossSeparatrix) {
    const ModelParams p = common(0.7, 0.5);
    std::vector<cplx> att;
    for (const auto& fp : fixed_points(p))
        if (fp.fp_class == FpClass::Attractor) att.push_back(fp.beta0);
    ASSERT_EQ(att.size(), 2u);
    std::set<int> seen;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            const cplx b(-2.0 + 0.4 * i, -2.0 + 0.4 * j);
            const auto tr = integrate_flow(b, p, 2000.0, att, {}, false);
            if (tr.attractor) seen.insert(*tr.attractor);
        }
    EXPECT_EQ(seen.size(), 2u);
}

TEST(FlowGraph, Labels) {
    EXPECT_EQ(flow_graph(ModelParams{1.0, 1.0, 0.0, 0.0, 0.0, 0.1}).region_label, Region::R1);
    EXPECT_TRUE(flow_graph(ModelParams{1.0, 1.0, 0.0, 0.0, 0.0, 0.1}).edges.empty());
    EXPECT_EQ(flow_graph(common(0.7, 0.5)).region_label, Region::R3a);
    EXPECT_EQ(flow_graph(common(3.3, 1.5)).region_label, Region::R3b);
}

TEST(PhaseDiagram, SingleCell) {
    PhaseGrid g{0.0, 1.4, 1, 0.0, 1.0, 1};
    const auto pd = phase_diagram(g, common(0, 0));
    ASSERT_EQ(pd.points.size(), 1u);
    EXPECT_DOUBLE_EQ(pd.points[0].delta, 0.7);
    EXPECT_DOUBLE_EQ(pd.points[0].f, 0.5);
    EXPECT_EQ(pd.points[0].region, Region::R3a);
}

TEST(PhaseDiagram, StrongDriveNegativeDetuningIsRegionOne) {
    PhaseGrid g{-1.0, -0.6, 4, 1.6, 2.0, 4};
    for (const auto& pt : phase_diagram(g, common(0, 0)).points) {
        EXPECT_EQ(pt.region, Region::R1);
        EXPECT_EQ(fixed_points(common(pt.delta, pt.f)).size(), 1u);
    }
}

TEST(PhaseDiagram, InvariantUnderAlephRescaling) {
    const double aleph = 7.0;
    for (double d : {0.7, 3.3, 2.0, 5.0})
        for (double f : {0.5, 1.5}) {
            const ModelParams scaled = to_physical(ScaledParams{d, 1.0, 0.4, f, 0.0, 0.1, aleph});
            // classical flow in rescaled amplitude
            ModelParams back = scaled;
            back.u *= aleph;
            back.f /= std::sqrt(aleph);
            EXPECT_EQ(flow_graph(back).region_label, flow_graph(common(d, f)).region_label);
            const auto a = fixed_points(scaled), b = fixed_points(common(d, f));
            ASSERT_EQ(a.size(), b.size());
            for (size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(std::abs(a[k].beta0) / std::sqrt(aleph), std::abs(b[k].beta0), 1e-8);
        }
}

TEST(PhaseDiagram, PoincareIndex) {
    PhaseGrid g{-1.0, 6.0, 21, 0.0, 2.0, 11};
    for (const auto& pt : phase_diagram(g, common(0, 0)).points)
        if (pt.region != Region::Unclassified) EXPECT_EQ(pt.n_attractors - pt.n_saddles, 1);
}

TEST(PhaseDiagram, RejectsEmptyGrid) {
    EXPECT_THROW(phase_diagram(PhaseGrid{0, 1, 0, 0, 1, 1}, common(0, 0)), Error);
}

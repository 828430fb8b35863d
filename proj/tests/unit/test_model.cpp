#include "kerrflow/errors.hpp"
#include "kerrflow/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace kerrflow;

TEST(Scaling, IdentityAtAlephOne) {
    const ModelParams p = to_physical(ScaledParams{0.3, 1.0, 0.4, 0.5, 0.0, 0.1, 1.0});
    EXPECT_DOUBLE_EQ(p.u, 1.0);
    EXPECT_DOUBLE_EQ(p.f, 0.5);
}

TEST(Scaling, AlephFour) {
    const ModelParams p = to_physical(ScaledParams{0.3, 1.0, 0.4, 0.5, 0.0, 0.1, 4.0});
    EXPECT_DOUBLE_EQ(p.u, 0.25);
    EXPECT_DOUBLE_EQ(p.f, 1.0);
    const ScaledParams s = to_scaled(p, 4.0);
    EXPECT_DOUBLE_EQ(s.tilde_u, 1.0);
    EXPECT_DOUBLE_EQ(s.tilde_f, 0.5);
}

TEST(Scaling, AlephTwentyRoundTrip) {
    const ModelParams p = to_physical(ScaledParams{4.0, 1.0, 0.4, 1.5, 0.0, 0.1, 20.0});
    EXPECT_NEAR(p.u, 0.05, 1e-15);
    EXPECT_NEAR(p.f, 6.708203932499369, 1e-12);
    const ScaledParams s = to_scaled(p, 20.0);
    EXPECT_NEAR(s.tilde_u, 1.0, 1e-14);
    EXPECT_NEAR(s.tilde_f, 1.5, 1e-14);
}

TEST(Scaling, RejectsNonPositiveAleph) {
    EXPECT_THROW(to_physical(ScaledParams{0, 1, 0, 0, 0, 0.1, 0.0}), Error);
    EXPECT_THROW(to_scaled(ModelParams{}, -1.0), Error);
}

TEST(Detuning, Resonance) { EXPECT_DOUBLE_EQ(detuning_from_frequencies(100.0, 100.0), 0.0); }

TEST(Detuning, SmallOffsetIsFirstOrder) {
    const double eps = 1e-6;
    EXPECT_NEAR(detuning_from_frequencies(100.0 * (1 + eps), 100.0), 100.0 * eps, 1e-9);
}

TEST(Detuning, DirectValue) { EXPECT_NEAR(detuning_from_frequencies(101.0, 100.0), 201.0 / 202.0, 1e-15); }

TEST(Validate, RejectsBadParameters) {
    EXPECT_THROW(validate(ModelParams{0, 1, 0, 1, 0, 0.0}), Error);
    EXPECT_THROW(validate(ModelParams{0, 1, 0, -1, 0, 0.1}), Error);
    EXPECT_THROW(validate(ModelParams{NAN, 1, 0, 1, 0, 0.1}), Error);
    EXPECT_NO_THROW(validate(ModelParams{0, 1, 0.4, 1, 0, 0.1}));
}

TEST(Validate, CanonicalizeFoldsNegativeDrive) {
    const ModelParams q = canonicalize(ModelParams{0, 1, 0, -1, 0, 0.1});
    EXPECT_DOUBLE_EQ(q.f, 1.0);
    EXPECT_NEAR(q.phi, M_PI, 1e-15);
}

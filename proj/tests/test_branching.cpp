#include <gtest/gtest.h>

#include <cmath>

#include "bfrog/branching.hpp"
#include "bfrog/errors.hpp"
#include "bfrog/percolation.hpp"

using namespace bfrog;

TEST(Branching, OffspringAtLeastTwoAndNearContact) {
    Rng rng(1);
    for (int i = 0; i < 500; ++i) {
        const auto o = sample_offspring(2, 0.7, 28.0, rng);
        EXPECT_GE(o.X, 2u);
        EXPECT_EQ(o.X, o.K + 2);
        ASSERT_EQ(o.positions.size(), o.X);
        EXPECT_EQ(o.positions.front(), (Point{}));
        EXPECT_NEAR(norm(o.positions.back()), 0.7, 1e-12);
        // Cluster members are chained by hops <= r, so they sit within (X-1) r.
        for (const auto& p : o.positions) EXPECT_LE(norm(p), 0.7 * static_cast<double>(o.X));
    }
}

TEST(Branching, OffspringLawMatchesClusterSize) {
    // K + 1 has the law of the origin cluster size.
    Rng a(2), b(3);
    double mk = 0, mc = 0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
        mk += static_cast<double>(sample_offspring(2, 0.7, 28.0, a).K + 1);
        mc += static_cast<double>(origin_cluster_size(2, 0.7, 28.0, b));
    }
    EXPECT_NEAR(mk / n, mc / n, 0.15 * mc / n);
}

TEST(Branching, TauIsPositiveAndCapped) {
    StepPolicy pol;
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const auto t = sample_tau(2, 0.7, 16.0, 1e3, pol, rng);
        EXPECT_GT(t.tau, 0.0);
        EXPECT_NEAR(dist(t.contact, t.center), 0.7, 1e-6);
    }
    const auto capped = sample_tau(2, 0.7, 16.0, 1e-6, pol, rng);
    EXPECT_TRUE(capped.capped || capped.tau <= 1e-6);
}

TEST(Branching, RecordStructure) {
    BranchingParams p;
    p.r = 0.6;
    p.gen_max = 3;
    p.seed = 5;
    const auto rec = simulate_branching(p);
    ASSERT_FALSE(rec.particles.empty());
    EXPECT_EQ(rec.generation_size(0), 1u);
    for (const auto& q : rec.particles) {
        EXPECT_LE(q.generation, 3);
        if (q.parent >= 0) {
            const auto& par = rec.particles[static_cast<std::size_t>(q.parent)];
            EXPECT_EQ(q.generation, par.generation + 1);
            EXPECT_NEAR(q.birth_time, par.birth_time + par.tau, 1e-9);
        }
        if (q.generation < 3) {
            EXPECT_FALSE(std::isnan(q.tau));
            EXPECT_GE(q.offspring, 2u);
        } else {
            EXPECT_TRUE(std::isnan(q.tau));
        }
    }
    std::uint64_t children = 0;
    for (const auto& q : rec.particles) children += q.offspring;
    EXPECT_EQ(children + 1, rec.particles.size());
}

TEST(Branching, DeterministicPerSeed) {
    BranchingParams p;
    p.gen_max = 2;
    p.seed = 9;
    const auto a = simulate_branching(p), b = simulate_branching(p);
    ASSERT_EQ(a.particles.size(), b.particles.size());
    for (std::size_t i = 0; i < a.particles.size(); ++i)
        EXPECT_EQ(a.particles[i].birth_time, b.particles[i].birth_time);
}

TEST(Branching, GenerationStats) {
    BranchingParams p;
    p.gen_max = 3;
    std::vector<BranchingRecord> recs;
    for (int s = 0; s < 5; ++s) {
        p.seed = 100 + s;
        recs.push_back(simulate_branching(p));
    }
    const auto g0 = generation_stats(recs, 0.0);
    for (int n : g0.max_generation) EXPECT_EQ(n, 0);
    for (double m : g0.max_displacement) EXPECT_EQ(m, 0.0);
    const auto g = generation_stats(recs, 1e9);
    for (int n : g.max_generation) EXPECT_EQ(n, 3);
}

TEST(Branching, ParamsValidated) {
    BranchingParams p;
    p.gen_max = -1;
    EXPECT_THROW(p.validate(), ConfigError);
}

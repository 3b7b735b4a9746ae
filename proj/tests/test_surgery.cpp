#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bfrog/stats.hpp"
#include "bfrog/surgery.hpp"

using namespace bfrog;

namespace {

const Region kWindow = Region::centered_cube(2, 10.0);

}  // namespace

TEST(Surgery, BallTrialBookkeeping) {
    SurgeryOptions opt;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto t = run_surgery_trial(kWindow, opt, s);
        if (!t.accepted) continue;
        // The boundary point sits on the sphere of area tau.
        EXPECT_NEAR(std::numbers::pi * norm(t.boundary_point) * norm(t.boundary_point), t.tau, 1e-9);
        ASSERT_EQ(t.mu_in_closure.size(), t.mu.size());
        ASSERT_EQ(t.nu_inside.size(), t.nu.size());
        std::size_t kept = 0, refill = 0;
        for (std::size_t i = 0; i < t.mu.size(); ++i) {
            const bool inside = norm(t.mu[i]) <= norm(t.boundary_point) + 1e-12;
            EXPECT_EQ(static_cast<bool>(t.mu_in_closure[i]), inside);
            kept += !t.mu_in_closure[i];
        }
        for (char c : t.nu_inside) refill += c;
        EXPECT_EQ(t.eta.size(), kept + refill);
        EXPECT_EQ(unspliced(t).size(), kept);
    }
}

TEST(Surgery, BallTauIsExponential) {
    SurgeryOptions opt;
    std::vector<double> tau;
    for (std::uint64_t s = 0; s < 3000; ++s) {
        const auto t = run_surgery_trial(kWindow, opt, s);
        if (t.accepted) tau.push_back(t.tau);
    }
    const auto ks = ks_one_sample(tau, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-x); });
    EXPECT_GT(ks.p_value, 0.001);
}

TEST(Surgery, SausageGrowthStaysNearTau) {
    SurgeryOptions opt;
    opt.growth = GrowthFamily::brownian_sausage;
    int accepted = 0;
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto t = run_surgery_trial(kWindow, opt, s);
        if (!t.accepted) continue;
        ++accepted;
        EXPECT_NEAR(t.lattice_area, t.tau, 4.0 * t.h * t.h + 1e-9);
        // Gap to the stamp that first covered the boundary cell.
        EXPECT_LE(t.boundary_gap, opt.sausage_r + t.h);
    }
    EXPECT_GT(accepted, 20);
}

TEST(Surgery, LatticeUnionArea) {
    const double a = lattice_union_area({Point{}}, 1.0, 0.01);
    EXPECT_NEAR(a, std::numbers::pi, 0.01);
    const double two = lattice_union_area({Point{}, Point{10, 0, 0}}, 1.0, 0.01);
    EXPECT_NEAR(two, 2.0 * std::numbers::pi, 0.02);
    EXPECT_NEAR(lattice_union_area({Point{}, Point{}}, 1.0, 0.01), a, 1e-12);
}

TEST(Surgery, CsrSuiteRejectsClusteredPatterns) {
    Rng rng(7);
    const std::vector<Region> windows{Region::box(2, {-1, -1, 0}, {1, 1, 0}),
                                      Region::box(2, {1, -1, 0}, {3, 1, 0})};
    std::vector<std::vector<Point>> poisson, clustered;
    for (int i = 0; i < 10000; ++i) {
        poisson.push_back(sample_ppp(Region::centered_cube(2, 8.0), 1.0, rng).points);
        std::vector<Point> c;
        const auto parents = sample_ppp(Region::centered_cube(2, 8.0), 0.5, rng);
        for (const auto& p : parents.points)
            for (int k = 0; k < 2; ++k) c.push_back(Point{p[0] + 0.1 * rng.normal(), p[1] + 0.1 * rng.normal(), 0});
        clustered.push_back(c);
    }
    EXPECT_TRUE(csr_test_suite(poisson, windows).pass);
    EXPECT_FALSE(csr_test_suite(clustered, windows).pass);
}

#include <gtest/gtest.h>

#include <cmath>

#include "bfrog/errors.hpp"
#include "bfrog/stats.hpp"

using namespace bfrog;

TEST(Stats, LinearFitExactLine) {
    const std::vector<double> x{1, 2, 3, 4, 5}, y{3, 5, 7, 9, 11};
    const auto f = linear_fit(x, y);
    EXPECT_NEAR(f.slope, 2.0, 1e-12);
    EXPECT_NEAR(f.intercept, 1.0, 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    const std::vector<double> flat{2, 2};
    EXPECT_ANY_THROW(linear_fit(flat, flat));
}

TEST(Stats, Quantiles) {
    EXPECT_NEAR(normal_quantile(0.975), 1.959964, 1e-5);
    EXPECT_NEAR(normal_cdf(1.959964), 0.975, 1e-6);
    EXPECT_NEAR(t_quantile(0.975, 10), 2.228139, 1e-5);
    EXPECT_NEAR(t_quantile(0.975, 1e6), 1.959964, 1e-4);
}

TEST(Stats, MeanVariancePearson) {
    const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1};
    EXPECT_DOUBLE_EQ(mean(a), 2.5);
    EXPECT_NEAR(variance(a), 5.0 / 3.0, 1e-12);
    EXPECT_NEAR(pearson(a, b), 1.0, 1e-12);
    EXPECT_NEAR(pearson(a, c), -1.0, 1e-12);
}

TEST(Stats, KsOneSampleUniform) {
    Rng rng(1);
    std::vector<double> u;
    for (int i = 0; i < 5000; ++i) u.push_back(rng.uniform());
    const auto ok = ks_one_sample(u, [](double x) { return std::clamp(x, 0.0, 1.0); });
    EXPECT_GT(ok.p_value, 0.01);
    const auto bad = ks_one_sample(u, [](double x) { return std::clamp(x * x, 0.0, 1.0); });
    EXPECT_LT(bad.p_value, 1e-6);
    EXPECT_NEAR(kolmogorov_q(1.36), 0.0494, 1e-3);
}

TEST(Stats, KsTwoSample) {
    Rng rng(2);
    std::vector<double> a, b, c;
    for (int i = 0; i < 3000; ++i) {
        a.push_back(rng.exponential());
        b.push_back(rng.exponential());
        c.push_back(rng.exponential(1.3));
    }
    EXPECT_GT(ks_two_sample(a, b).p_value, 0.01);
    EXPECT_LT(ks_two_sample(a, c).p_value, 1e-4);
    EXPECT_DOUBLE_EQ(ks_distance({0.0, 1.0}, {2.0, 3.0}), 1.0);
}

TEST(Stats, PoissonGof) {
    Rng rng(3);
    std::vector<std::uint64_t> good, over;
    for (int i = 0; i < 5000; ++i) {
        good.push_back(rng.poisson(4.0));
        over.push_back(rng.poisson(rng.uniform() < 0.5 ? 2.0 : 6.0));
    }
    EXPECT_GT(poisson_gof(good, 4.0).p_value, 0.01);
    EXPECT_LT(poisson_gof(over, 4.0).p_value, 1e-6);
}

TEST(Stats, SpeedFromSyntheticPassageTimes) {
    // T(0, x_n) = 3 n + noise: gamma_tilde = 3, gamma = 1/3.
    Rng rng(4);
    std::vector<std::vector<PassageSample>> reps;
    for (int i = 0; i < 10; ++i) {
        std::vector<PassageSample> rep;
        for (int n = 0; n <= 40; ++n) {
            PassageSample s;
            s.n = n;
            s.T = 3.0 * n + 0.1 * rng.normal();
            s.awake = true;
            rep.push_back(s);
        }
        reps.push_back(rep);
    }
    const auto e = estimate_speed(reps, 1.0);
    EXPECT_NEAR(e.gamma_tilde, 3.0, 0.01);
    EXPECT_NEAR(e.gamma, 1.0 / 3.0, 0.001);
    EXPECT_LT(e.ci_lo, 3.0);
    EXPECT_GT(e.ci_hi, 3.0);
    EXPECT_FALSE(e.partial);
    reps.resize(3);
    EXPECT_THROW(estimate_speed(reps, 1.0), PreconditionError);
    EXPECT_NO_THROW(estimate_speed(reps, 1.0, true));
}

TEST(Stats, GrowthExponentOfPowerLaw) {
    for (double alpha : {1.0, 1.5, 2.0}) {
        FrontSeries fs;
        for (double t = 0.1; t <= 20.0 + 1e-9; t += 0.1) fs.samples.emplace_back(t, 2.0 * std::pow(t, alpha));
        const auto f = growth_exponent_fit(fs);
        EXPECT_NEAR(f.alpha, alpha, 1e-9);
        EXPECT_NEAR(f.t_hi, 20.0, 1e-9);
        EXPECT_NEAR(f.t_lo, 20.0 / std::sqrt(10.0), 0.1);
    }
    FrontSeries short_series;
    for (double t = 1.0; t <= 5.0; t += 1.0) short_series.samples.emplace_back(t, t);
    EXPECT_ANY_THROW(growth_exponent_fit(short_series));
}

TEST(Stats, TailRateOfGeometric) {
    // P[X > k] = q^k, so c = -log q.
    Rng rng(5);
    const double q = 0.8;
    std::vector<std::uint64_t> xs;
    for (int i = 0; i < 50000; ++i) {
        std::uint64_t k = 0;
        while (rng.uniform() < q) ++k;
        xs.push_back(k);
    }
    const auto f = tail_exponent_fit(xs);
    EXPECT_NEAR(f.c, -std::log(q), 0.02);
    EXPECT_GT(f.r2, 0.98);
    xs.resize(100);
    EXPECT_ANY_THROW(tail_exponent_fit(xs));
}

TEST(Stats, PoissonWindowsAcceptPoissonRejectLattice) {
    Rng rng(6);
    const std::vector<Region> windows{Region::box(1, {-1.5, 0, 0}, {1.5, 0, 0}),
                                      Region::box(1, {2, 0, 0}, {5, 0, 0})};
    std::vector<WindowSample> good, lattice;
    for (int i = 0; i < 3000; ++i) {
        const auto ps = sample_ppp(Region::centered_cube(1, 20.0), 1.0, rng);
        good.push_back({ps.points, true});
        std::vector<Point> grid;
        const double shift = rng.uniform();
        for (int k = -10; k < 10; ++k) grid.push_back(Point{k + shift, 0, 0});
        lattice.push_back({grid, true});
    }
    good.push_back({{}, false});  // excluded
    const auto rg = poisson_window_test(good, windows);
    EXPECT_TRUE(rg.pass);
    EXPECT_EQ(rg.excluded, 1u);
    EXPECT_FALSE(poisson_window_test(lattice, windows).pass);
}

TEST(Stats, BrownianBoundsHold) {
    const auto checks = verify_bm_bounds(1.0, {1, 2}, 4000, 3, 200, 1);
    ASSERT_EQ(checks.size(), 4u);
    for (const auto& c : checks) {
        EXPECT_TRUE(c.pass) << c.name << " ell " << c.ell;
        EXPECT_LE(c.empirical, 1.0);
    }
    // P[max_{t<=1} |B| <= 1] is about 0.37.
    for (const auto& c : checks)
        if (c.ell == 1 && c.name.rfind("max_abs", 0) == 0) EXPECT_NEAR(c.empirical, 0.37, 0.04);
}

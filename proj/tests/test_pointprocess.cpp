#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bfrog/errors.hpp"
#include "bfrog/pointprocess.hpp"
#include "bfrog/stats.hpp"

using namespace bfrog;

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
    EXPECT_NE(Rng(42)(), Rng(43)());
}

TEST(Rng, DeriveSeedSeparatesStreams) {
    EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
    EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
    EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
}

TEST(Rng, UniformAndNormalMoments) {
    Rng rng(7);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        su += rng.uniform();
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.01);
}

TEST(Rng, PoissonMeanAndVariance) {
    Rng rng(11);
    for (double m : {0.5, 3.0, 40.0, 1000.0}) {
        std::vector<double> v;
        for (int i = 0; i < 40000; ++i) v.push_back(static_cast<double>(rng.poisson(m)));
        EXPECT_NEAR(mean(v), m, 5.0 * std::sqrt(m / 40000.0)) << m;
        EXPECT_NEAR(variance(v) / m, 1.0, 0.05) << m;
    }
}

TEST(Region, Volumes) {
    EXPECT_NEAR(ball_volume(1, 2.0), 4.0, 1e-12);
    EXPECT_NEAR(ball_volume(2, 1.0), std::numbers::pi, 1e-12);
    EXPECT_NEAR(ball_volume(3, 1.0), 4.0 / 3.0 * std::numbers::pi, 1e-12);
    auto reg = Region::centered_cube(2, 10.0);
    EXPECT_DOUBLE_EQ(reg.volume(), 100.0);
    reg.exclude({Point{}, 1.0});
    EXPECT_NEAR(reg.volume(), 100.0 - std::numbers::pi, 1e-12);
    EXPECT_FALSE(reg.contains(Point{0.5, 0.0, 0.0}));
    EXPECT_TRUE(reg.contains(Point{2.0, 0.0, 0.0}));
    EXPECT_FALSE(reg.contains(Point{6.0, 0.0, 0.0}));
}

TEST(Region, RejectsDegenerate) {
    EXPECT_THROW(Region::box(2, {0, 0, 0}, {0, 1, 0}).validate(), ConfigError);
    EXPECT_THROW(Region::centered_cube(4, 1.0).validate(), ConfigError);
}

TEST(SamplePpp, PointsInsideRegionAndCountsPoisson) {
    auto reg = Region::centered_cube(2, 6.0);
    reg.exclude({Point{}, 1.0});
    Rng rng(3);
    std::vector<std::uint64_t> counts;
    for (int i = 0; i < 4000; ++i) {
        const auto ps = sample_ppp(reg, 1.0, rng);
        for (const auto& p : ps.points) ASSERT_TRUE(reg.contains(p));
        counts.push_back(ps.size());
    }
    const auto gof = poisson_gof(counts, reg.volume());
    EXPECT_GT(gof.p_value, 0.001);
}

TEST(SpatialGrid, MatchesBruteForce) {
    for (int dim = 1; dim <= 3; ++dim) {
        Rng rng(100 + dim);
        const auto ps = sample_ppp(Region::centered_cube(dim, dim == 1 ? 200.0 : 20.0), 1.0, rng);
        const SpatialGrid grid(ps, 0.7);
        for (int q = 0; q < 100; ++q) {
            Point x{};
            for (int a = 0; a < dim; ++a) x[a] = rng.uniform(-12.0, 12.0);
            const double rho = rng.uniform(0.1, 3.0);
            const auto got = grid.query_within(x, rho);
            const auto want = brute_force_within(ps.points, x, rho);
            ASSERT_EQ(got.size(), want.size()) << "dim " << dim << " query " << q;
            for (std::size_t k = 0; k < got.size(); ++k) EXPECT_EQ(got[k].index, want[k].index);
        }
    }
}

TEST(SpatialGrid, EraseAndNearest) {
    Rng rng(5);
    const auto ps = sample_ppp(Region::centered_cube(2, 10.0), 1.0, rng);
    SpatialGrid grid(ps, 1.0);
    std::vector<Point> live = ps.points;
    std::vector<char> alive(ps.size(), 1);
    for (std::uint32_t i = 0; i < ps.size(); i += 3) {
        grid.erase(i);
        grid.erase(i);  // idempotent
        alive[i] = 0;
    }
    std::size_t n_alive = 0;
    for (char a : alive) n_alive += a;
    EXPECT_EQ(grid.size(), n_alive);
    for (int q = 0; q < 50; ++q) {
        const Point x{rng.uniform(-6, 6), rng.uniform(-6, 6), 0.0};
        const auto nb = grid.nearest(x, 2.0);
        double best = 2.0;
        std::int64_t best_i = -1;
        for (std::uint32_t i = 0; i < ps.size(); ++i)
            if (alive[i] && dist(ps[i], x) <= best) {
                if (best_i < 0 || dist(ps[i], x) < best) best_i = i;
                best = std::min(best, dist(ps[i], x));
            }
        if (best_i < 0) {
            EXPECT_FALSE(nb.has_value());
        } else {
            ASSERT_TRUE(nb.has_value());
            EXPECT_NEAR(nb->distance, best, 1e-12);
        }
    }
}

TEST(SpatialGrid, QueriesFarOutsideBoundsAreEmpty) {
    Rng rng(9);
    const auto ps = sample_ppp(Region::centered_cube(2, 5.0), 1.0, rng);
    const SpatialGrid grid(ps, 1.0);
    EXPECT_TRUE(grid.query_within(Point{1e6, -1e6, 0.0}, 3.0).empty());
    EXPECT_FALSE(grid.nearest(Point{1e6, 0.0, 0.0}, 1.0).has_value());
}

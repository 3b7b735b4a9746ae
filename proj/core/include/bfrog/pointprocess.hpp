#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bfrog/rng.hpp"

namespace bfrog {

/// Coordinates in up to three dimensions. Unused trailing axes stay zero, so
/// Euclidean distances are correct for any dimension 1..3.
using Point = std::array<double, 3>;

inline double dist2(const Point& a, const Point& b) noexcept {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}
double dist(const Point& a, const Point& b) noexcept;
double norm(const Point& a) noexcept;

/// Volume of the d-dimensional ball of radius rho.
double ball_volume(int dim, double rho);

struct Ball {
    Point center{};
    double radius = 0.0;
};

/// Axis-aligned box with an optional excluded ball.
struct Region {
    int dim = 2;
    Point lo{};
    Point hi{};
    std::optional<Ball> excluded;

    /// Cube [-side/2, side/2]^dim.
    static Region centered_cube(int dim, double side);
    static Region box(int dim, const Point& lo, const Point& hi);

    Region& exclude(const Ball& ball) {
        excluded = ball;
        return *this;
    }

    /// Throws ConfigError when the region is degenerate.
    void validate() const;
    double box_volume() const noexcept;
    /// Box volume minus the part of the excluded ball inside it. The excluded
    /// ball must lie entirely inside the box.
    double volume() const;
    bool in_box(const Point& p) const noexcept;
    bool contains(const Point& p) const noexcept;
};

struct PointSet {
    std::vector<Point> points;
    Region region;
    double intensity = 1.0;

    std::size_t size() const noexcept { return points.size(); }
    const Point& operator[](std::size_t i) const { return points[i]; }
    bool empty() const noexcept { return points.empty(); }
    int dim() const noexcept { return region.dim; }
};

/// Samples a homogeneous Poisson process: N ~ Poisson(intensity * volume),
/// then N i.i.d. uniform points (rejecting the excluded ball).
PointSet sample_ppp(const Region& region, double intensity, Rng& rng);

struct Neighbor {
    std::uint32_t index = 0;
    double distance = 0.0;
};

/// Uniform-grid bucket index over a fixed point list.
///
/// Cells cover the bounding box of the indexed points (or the given region);
/// queries anywhere in space are valid. Points can be erased, which is how the
/// frog simulation keeps an index of sleeping centers only.
class SpatialGrid {
public:
    SpatialGrid() = default;
    SpatialGrid(const PointSet& ps, double cell_size);
    SpatialGrid(int dim, std::span<const Point> points, double cell_size);

    int dim() const noexcept { return dim_; }
    double cell_size() const noexcept { return cell_; }
    /// Number of live points.
    std::size_t size() const noexcept { return live_; }
    /// Number of non-empty buckets.
    std::size_t bucket_count() const noexcept;
    const Point& point(std::uint32_t i) const { return points_[i]; }
    std::span<const Point> points() const noexcept { return points_; }
    bool contains(std::uint32_t i) const { return slot_[i] != kErased; }

    std::array<long, 3> cell_of(const Point& x) const noexcept;
    /// Indices stored in the bucket at the given integer cell (empty if none).
    std::span<const std::uint32_t> bucket(const std::array<long, 3>& cell) const;

    /// All live points at distance <= rho from x, sorted by distance then index.
    std::vector<Neighbor> query_within(const Point& x, double rho) const;
    /// Calls fn(index, squared_distance) for every live point within rho of x,
    /// in bucket order.
    template <class Fn>
    void for_each_within(const Point& x, double rho, Fn&& fn) const {
        const double rho2 = rho * rho;
        long lo[3], hi[3];
        cell_range(x, rho, lo, hi);
        for (long cz = lo[2]; cz <= hi[2]; ++cz)
            for (long cy = lo[1]; cy <= hi[1]; ++cy)
                for (long cx = lo[0]; cx <= hi[0]; ++cx)
                    for (std::uint32_t i : buckets_[flat(cx, cy, cz)]) {
                        const double d2 = dist2(points_[i], x);
                        if (d2 <= rho2) fn(i, d2);
                    }
    }
    /// Nearest live point within max_dist, if any.
    std::optional<Neighbor> nearest(const Point& x, double max_dist) const;

    /// Removes point i from the index; no-op if already removed.
    void erase(std::uint32_t i);

private:
    static constexpr std::uint32_t kErased = 0xffffffffu;

    long flat(long cx, long cy, long cz) const noexcept {
        return (cz * ny_ + cy) * nx_ + cx;
    }
    void setup(double cell_size, const Point& lo, const Point& hi);
    /// Local (0-based, clipped) cell range overlapping the cube around x.
    void cell_range(const Point& x, double rho, long lo[3], long hi[3]) const noexcept;
    void insert_all();

    int dim_ = 2;
    double cell_ = 1.0;
    double inv_cell_ = 1.0;
    std::array<long, 3> base_{};  // global index of local cell (0,0,0)
    long nx_ = 1, ny_ = 1, nz_ = 1;
    std::vector<Point> points_;
    std::vector<std::vector<std::uint32_t>> buckets_;
    std::vector<std::uint32_t> slot_;  // position within its bucket, or kErased
    std::vector<long> home_;           // flat bucket id of each point
    std::size_t live_ = 0;
};

SpatialGrid build_grid(const PointSet& ps, double cell_size);

/// Brute-force neighbor scan, used as an oracle in tests and for tiny inputs.
std::vector<Neighbor> brute_force_within(std::span<const Point> pts, const Point& x,
                                         double rho);

}  // namespace bfrog

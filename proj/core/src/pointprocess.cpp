#include "bfrog/pointprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bfrog/errors.hpp"

namespace bfrog {

double dist(const Point& a, const Point& b) noexcept { return std::sqrt(dist2(a, b)); }

double norm(const Point& a) noexcept { return std::sqrt(dist2(a, Point{})); }

double ball_volume(int dim, double rho) {
    switch (dim) {
        case 1: return 2.0 * rho;
        case 2: return std::numbers::pi * rho * rho;
        case 3: return 4.0 / 3.0 * std::numbers::pi * rho * rho * rho;
        default: throw ConfigError("dimension must be 1, 2 or 3");
    }
}

Region Region::centered_cube(int dim, double side) {
    Region reg;
    reg.dim = dim;
    for (int k = 0; k < dim && k < 3; ++k) {
        reg.lo[k] = -0.5 * side;
        reg.hi[k] = 0.5 * side;
    }
    return reg;
}

Region Region::box(int dim, const Point& lo, const Point& hi) {
    Region reg;
    reg.dim = dim;
    reg.lo = lo;
    reg.hi = hi;
    for (int k = dim; k < 3; ++k) reg.lo[k] = reg.hi[k] = 0.0;
    return reg;
}

void Region::validate() const {
    if (dim < 1 || dim > 3) throw ConfigError("region dimension must be 1, 2 or 3");
    for (int k = 0; k < dim; ++k) {
        if (!std::isfinite(lo[k]) || !std::isfinite(hi[k]) || !(lo[k] < hi[k])) {
            std::ostringstream os;
            os << "degenerate region along axis " << k << ": [" << lo[k] << ", " << hi[k] << "]";
            throw ConfigError(os.str());
        }
    }
    if (excluded) {
        const double rho = excluded->radius;
        if (!std::isfinite(rho) || rho < 0.0) throw ConfigError("excluded radius must be >= 0");
        for (int k = 0; k < dim; ++k) {
            if (excluded->center[k] - rho < lo[k] || excluded->center[k] + rho > hi[k])
                throw ConfigError("excluded ball must lie inside the box");
        }
    }
    if (!(volume() > 0.0)) throw ConfigError("region has zero volume");
}

double Region::box_volume() const noexcept {
    double v = 1.0;
    for (int k = 0; k < dim; ++k) v *= hi[k] - lo[k];
    return v;
}

double Region::volume() const {
    double v = box_volume();
    if (excluded) v -= ball_volume(dim, excluded->radius);
    return v;
}

bool Region::in_box(const Point& p) const noexcept {
    for (int k = 0; k < dim; ++k)
        if (p[k] < lo[k] || p[k] > hi[k]) return false;
    return true;
}

bool Region::contains(const Point& p) const noexcept {
    if (!in_box(p)) return false;
    if (excluded && dist2(p, excluded->center) <= excluded->radius * excluded->radius)
        return false;
    return true;
}

PointSet sample_ppp(const Region& region, double intensity, Rng& rng) {
    if (!std::isfinite(intensity) || intensity < 0.0)
        throw ConfigError("intensity must be finite and >= 0");
    region.validate();

    PointSet ps;
    ps.region = region;
    ps.intensity = intensity;
    const auto n = rng.poisson(intensity * region.volume());
    ps.points.reserve(n);
    const int d = region.dim;
    while (ps.points.size() < n) {
        Point p{};
        for (int k = 0; k < d; ++k) p[k] = rng.uniform(region.lo[k], region.hi[k]);
        if (region.excluded &&
            dist2(p, region.excluded->center) <= region.excluded->radius * region.excluded->radius)
            continue;
        ps.points.push_back(p);
    }
    return ps;
}

// ---------------------------------------------------------------------------
// SpatialGrid

namespace {

// Keeps the dense bucket array proportional to the number of points.
constexpr double kMaxCellsPerPoint = 8.0;
constexpr double kMinCellBudget = 4096.0;

}  // namespace

SpatialGrid::SpatialGrid(const PointSet& ps, double cell_size)
    : dim_(ps.dim()), points_(ps.points) {
    Point lo = ps.region.lo, hi = ps.region.hi;
    for (const auto& p : points_)
        for (int k = 0; k < dim_; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    setup(cell_size, lo, hi);
    insert_all();
}

SpatialGrid::SpatialGrid(int dim, std::span<const Point> points, double cell_size)
    : dim_(dim), points_(points.begin(), points.end()) {
    if (dim < 1 || dim > 3) throw ConfigError("grid dimension must be 1, 2 or 3");
    Point lo{}, hi{};
    if (!points_.empty()) {
        lo = hi = points_.front();
        for (const auto& p : points_)
            for (int k = 0; k < dim_; ++k) {
                lo[k] = std::min(lo[k], p[k]);
                hi[k] = std::max(hi[k], p[k]);
            }
    }
    setup(cell_size, lo, hi);
    insert_all();
}

void SpatialGrid::setup(double cell_size, const Point& lo, const Point& hi) {
    if (!(cell_size > 0.0) || !std::isfinite(cell_size))
        throw ConfigError("cell_size must be finite and > 0");
    const double budget =
        std::max(kMinCellBudget, kMaxCellsPerPoint * static_cast<double>(points_.size()));
    cell_ = cell_size;
    for (;;) {
        double cells = 1.0;
        for (int k = 0; k < dim_; ++k)
            cells *= std::floor(hi[k] / cell_) - std::floor(lo[k] / cell_) + 1.0;
        if (cells <= budget) break;
        cell_ *= 2.0;
    }
    inv_cell_ = 1.0 / cell_;
    long n[3] = {1, 1, 1};
    base_ = {0, 0, 0};
    for (int k = 0; k < dim_; ++k) {
        base_[k] = static_cast<long>(std::floor(lo[k] * inv_cell_));
        n[k] = static_cast<long>(std::floor(hi[k] * inv_cell_)) - base_[k] + 1;
    }
    nx_ = n[0];
    ny_ = n[1];
    nz_ = n[2];
    buckets_.assign(static_cast<std::size_t>(nx_ * ny_ * nz_), {});
}

void SpatialGrid::insert_all() {
    slot_.assign(points_.size(), kErased);
    home_.assign(points_.size(), 0);
    live_ = points_.size();
    for (std::uint32_t i = 0; i < points_.size(); ++i) {
        const auto c = cell_of(points_[i]);
        long local[3] = {0, 0, 0};
        for (int k = 0; k < dim_; ++k)
            local[k] = std::clamp(c[k] - base_[k], 0L, (k == 0 ? nx_ : k == 1 ? ny_ : nz_) - 1);
        const long f = flat(local[0], local[1], local[2]);
        home_[i] = f;
        slot_[i] = static_cast<std::uint32_t>(buckets_[f].size());
        buckets_[f].push_back(i);
    }
}

std::size_t SpatialGrid::bucket_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(
        buckets_.begin(), buckets_.end(), [](const auto& b) { return !b.empty(); }));
}

std::array<long, 3> SpatialGrid::cell_of(const Point& x) const noexcept {
    std::array<long, 3> c{0, 0, 0};
    for (int k = 0; k < dim_; ++k) c[k] = static_cast<long>(std::floor(x[k] * inv_cell_));
    return c;
}

std::span<const std::uint32_t> SpatialGrid::bucket(const std::array<long, 3>& cell) const {
    const long n[3] = {nx_, ny_, nz_};
    long local[3] = {0, 0, 0};
    for (int k = 0; k < dim_; ++k) {
        local[k] = cell[k] - base_[k];
        if (local[k] < 0 || local[k] >= n[k]) return {};
    }
    return buckets_[flat(local[0], local[1], local[2])];
}

void SpatialGrid::cell_range(const Point& x, double rho, long lo[3], long hi[3]) const noexcept {
    const long n[3] = {nx_, ny_, nz_};
    for (int k = 0; k < 3; ++k) {
        if (k >= dim_) {
            lo[k] = 0;
            hi[k] = 0;
            continue;
        }
        const double a = std::floor((x[k] - rho) * inv_cell_);
        const double b = std::floor((x[k] + rho) * inv_cell_);
        // Clamp in floating point first so far-away queries cannot overflow.
        const double la = std::clamp(a - static_cast<double>(base_[k]), -1.0,
                                     static_cast<double>(n[k]));
        const double lb = std::clamp(b - static_cast<double>(base_[k]), -1.0,
                                     static_cast<double>(n[k]));
        lo[k] = std::max(0L, static_cast<long>(la));
        hi[k] = std::min(n[k] - 1, static_cast<long>(lb));
    }
}

std::vector<Neighbor> SpatialGrid::query_within(const Point& x, double rho) const {
    std::vector<Neighbor> out;
    if (rho < 0.0) return out;
    for_each_within(x, rho, [&](std::uint32_t i, double d2) {
        out.push_back({i, std::sqrt(d2)});
    });
    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
    });
    return out;
}

std::optional<Neighbor> SpatialGrid::nearest(const Point& x, double max_dist) const {
    std::optional<Neighbor> best;
    double best2 = max_dist * max_dist;
    for_each_within(x, max_dist, [&](std::uint32_t i, double d2) {
        if (d2 < best2 || (d2 == best2 && (!best || i < best->index))) {
            best2 = d2;
            best = Neighbor{i, 0.0};
        }
    });
    if (best) best->distance = std::sqrt(best2);
    return best;
}

void SpatialGrid::erase(std::uint32_t i) {
    if (slot_[i] == kErased) return;
    auto& b = buckets_[home_[i]];
    const std::uint32_t s = slot_[i];
    const std::uint32_t moved = b.back();
    b[s] = moved;
    slot_[moved] = s;
    b.pop_back();
    slot_[i] = kErased;
    --live_;
}

SpatialGrid build_grid(const PointSet& ps, double cell_size) {
    return SpatialGrid(ps, cell_size);
}

std::vector<Neighbor> brute_force_within(std::span<const Point> pts, const Point& x, double rho) {
    std::vector<Neighbor> out;
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
        const double d2 = dist2(pts[i], x);
        if (d2 <= rho * rho) out.push_back({i, std::sqrt(d2)});
    }
    std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
    });
    return out;
}

}  // namespace bfrog

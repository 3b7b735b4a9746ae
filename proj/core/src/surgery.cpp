#include "bfrog/surgery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

#include "bfrog/errors.hpp"
#include "bfrog/stats.hpp"

namespace bfrog {

namespace {

constexpr long kMaxSausageSteps = 2'000'000;

double distance_to_box_boundary(const Region& w, const Point& x) {
    double m = std::numeric_limits<double>::infinity();
    for (int k = 0; k < w.dim; ++k) m = std::min({m, x[k] - w.lo[k], w.hi[k] - x[k]});
    return m;
}

void finish(SurgeryTrial& t) {
    t.eta.region = t.mu.region;
    t.eta.intensity = 1.0;
    for (std::size_t i = 0; i < t.mu.size(); ++i)
        if (!t.mu_in_closure[i]) t.eta.points.push_back(t.mu.points[i]);
    for (std::size_t i = 0; i < t.nu.size(); ++i)
        if (t.nu_inside[i]) t.eta.points.push_back(t.nu.points[i]);
}

void run_balls(SurgeryTrial& t, const Region& window) {
    const int d = window.dim;
    t.mu_in_closure.assign(t.mu.size(), 0);
    t.nu_inside.assign(t.nu.size(), 0);
    if (t.mu.empty()) return;
    std::uint32_t best = 0;
    double best_norm = std::numeric_limits<double>::infinity();
    for (std::uint32_t i = 0; i < t.mu.size(); ++i) {
        const double n = norm(t.mu.points[i]);
        if (n < best_norm) {
            best_norm = n;
            best = i;
        }
    }
    // Points beyond the inscribed ball may be beaten by unsampled points
    // outside the window.
    if (best_norm > distance_to_box_boundary(window, Point{})) return;
    t.accepted = true;
    t.tau = ball_volume(d, best_norm);
    t.boundary_index = best;
    t.boundary_point = t.mu.points[best];
    t.boundary_gap = 0.0;
    for (std::size_t i = 0; i < t.mu.size(); ++i)
        t.mu_in_closure[i] = norm(t.mu.points[i]) <= best_norm ? 1 : 0;
    for (std::size_t i = 0; i < t.nu.size(); ++i)
        t.nu_inside[i] = norm(t.nu.points[i]) < best_norm ? 1 : 0;
}

class SausageLattice {
public:
    SausageLattice(const Region& w, double h) : w_(w), h_(h) {
        nx_ = static_cast<long>(std::ceil((w.hi[0] - w.lo[0]) / h));
        ny_ = static_cast<long>(std::ceil((w.hi[1] - w.lo[1]) / h));
        occupied_.assign(static_cast<std::size_t>(nx_ * ny_), 0);
    }

    long nx() const { return nx_; }
    long ny() const { return ny_; }
    double h() const { return h_; }
    bool inside(long i, long j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }
    long id(long i, long j) const { return j * nx_ + i; }
    long id_of(const Point& p) const {
        const long i = static_cast<long>(std::floor((p[0] - w_.lo[0]) / h_));
        const long j = static_cast<long>(std::floor((p[1] - w_.lo[1]) / h_));
        return inside(i, j) ? id(i, j) : -1;
    }
    Point center(long i, long j) const {
        return {w_.lo[0] + (i + 0.5) * h_, w_.lo[1] + (j + 0.5) * h_, 0.0};
    }
    double x_lo(long i) const { return w_.lo[0] + i * h_; }
    bool occupied(long c) const { return occupied_[c] != 0; }
    void occupy(long c) { occupied_[c] = 1; }

private:
    Region w_;
    double h_;
    long nx_, ny_;
    std::vector<std::uint8_t> occupied_;
};

void run_sausage(SurgeryTrial& t, const Region& window, const SurgeryOptions& opt, Rng& path_rng) {
    if (window.dim != 2) throw ConfigError("brownian_sausage growth is implemented for d = 2");
    const double r = opt.sausage_r;
    const double h = opt.h > 0.0 ? opt.h : r / 20.0;
    const double dt = opt.sausage_dt > 0.0 ? opt.sausage_dt : (r / 4.0) * (r / 4.0) / 2.0;
    t.h = h;
    t.mu_in_closure.assign(t.mu.size(), 0);
    t.nu_inside.assign(t.nu.size(), 0);

    SausageLattice lat(window, h);
    std::unordered_map<long, std::vector<std::uint32_t>> mu_cells;
    for (std::uint32_t i = 0; i < t.mu.size(); ++i) mu_cells[lat.id_of(t.mu.points[i])].push_back(i);

    double area = 0.0;
    long hit_cell = -1;
    double hit_x = 0.0;
    Point stamp_center{};
    double stamp_radius = 0.0;

    // Adds one cell; returns true when a mu point enters the closure.
    auto add_cell = [&](long i, long j) {
        const long c = lat.id(i, j);
        const auto it = mu_cells.find(c);
        if (it != mu_cells.end()) {
            std::uint32_t first = it->second.front();
            for (auto m : it->second)
                if (t.mu.points[m][0] < t.mu.points[first][0]) first = m;
            const double x = t.mu.points[first][0];
            t.tau = area + h * (x - lat.x_lo(i));
            t.boundary_index = first;
            t.boundary_point = t.mu.points[first];
            hit_cell = c;
            hit_x = x;
            return true;
        }
        lat.occupy(c);
        area += h * h;
        return false;
    };

    // Phase 1: ball around the origin grown cell by cell up to radius r.
    {
        const long reach = static_cast<long>(std::ceil(r / h)) + 1;
        const long i0 = lat.id_of(Point{}) % lat.nx();
        const long j0 = lat.id_of(Point{}) / lat.nx();
        std::vector<std::tuple<double, long, long>> cells;
        for (long j = j0 - reach; j <= j0 + reach; ++j)
            for (long i = i0 - reach; i <= i0 + reach; ++i) {
                const Point c = lat.center(i, j);
                const double n = norm(c);
                if (n > r) continue;
                if (!lat.inside(i, j)) return;
                cells.emplace_back(n, j, i);
            }
        std::sort(cells.begin(), cells.end());
        for (const auto& [n, j, i] : cells) {
            stamp_radius = n;
            if (add_cell(i, j)) break;
        }
    }

    // Phase 2: balls of radius r along the Brownian path.
    Point x{};
    const double sd = std::sqrt(dt);
    for (long step = 0; hit_cell < 0 && step < kMaxSausageSteps; ++step) {
        x[0] += sd * path_rng.normal();
        x[1] += sd * path_rng.normal();
        const double lo0 = (x[0] - r - window.lo[0]) / h, hi0 = (x[0] + r - window.lo[0]) / h;
        const double lo1 = (x[1] - r - window.lo[1]) / h, hi1 = (x[1] + r - window.lo[1]) / h;
        if (lo0 < 0.0 || lo1 < 0.0 || hi0 >= lat.nx() || hi1 >= lat.ny()) return;  // left the window
        stamp_center = x;
        stamp_radius = r;
        for (long j = static_cast<long>(lo1); j <= static_cast<long>(hi1) && hit_cell < 0; ++j)
            for (long i = static_cast<long>(lo0); i <= static_cast<long>(hi0); ++i) {
                const long c = lat.id(i, j);
                if (lat.occupied(c) || dist2(lat.center(i, j), x) > r * r) continue;
                if (add_cell(i, j)) break;
            }
    }
    if (hit_cell < 0) return;

    t.accepted = true;
    t.lattice_area = t.tau;
    t.boundary_gap = std::abs(dist(t.boundary_point, stamp_center) - stamp_radius);
    for (std::size_t m = 0; m < t.mu.size(); ++m) {
        const long c = lat.id_of(t.mu.points[m]);
        t.mu_in_closure[m] =
            (lat.occupied(c) || (c == hit_cell && t.mu.points[m][0] <= hit_x)) ? 1 : 0;
    }
    for (std::size_t m = 0; m < t.nu.size(); ++m) {
        const long c = lat.id_of(t.nu.points[m]);
        t.nu_inside[m] = (lat.occupied(c) || (c == hit_cell && t.nu.points[m][0] < hit_x)) ? 1 : 0;
    }
}

}  // namespace

SurgeryTrial run_surgery_trial(const Region& window, const SurgeryOptions& opt, std::uint64_t seed) {
    window.validate();
    if (!window.contains(Point{})) throw ConfigError("surgery window must contain the origin");
    if (!(opt.nu_intensity >= 0.0)) throw ConfigError("nu intensity must be >= 0");
    SurgeryTrial t;
    Rng mu_rng(derive_seed(seed, 0));
    Rng nu_rng(derive_seed(seed, 1));
    Rng path_rng(derive_seed(seed, 2));
    Region plain = window;
    plain.excluded.reset();
    t.mu = sample_ppp(plain, 1.0, mu_rng);
    t.nu = sample_ppp(plain, opt.nu_intensity, nu_rng);
    if (opt.growth == GrowthFamily::concentric_balls)
        run_balls(t, plain);
    else
        run_sausage(t, plain, opt, path_rng);
    if (t.accepted) finish(t);
    return t;
}

PointSet unspliced(const SurgeryTrial& trial) {
    PointSet out;
    out.region = trial.mu.region;
    for (std::size_t i = 0; i < trial.mu.size(); ++i)
        if (!trial.mu_in_closure[i]) out.points.push_back(trial.mu.points[i]);
    return out;
}

double lattice_union_area(const std::vector<Point>& centers, double rho, double h) {
    if (centers.empty()) return 0.0;
    double lo0 = centers[0][0], hi0 = lo0, lo1 = centers[0][1], hi1 = lo1;
    for (const auto& c : centers) {
        lo0 = std::min(lo0, c[0]);
        hi0 = std::max(hi0, c[0]);
        lo1 = std::min(lo1, c[1]);
        hi1 = std::max(hi1, c[1]);
    }
    lo0 -= rho + h;
    lo1 -= rho + h;
    hi0 += rho + h;
    hi1 += rho + h;
    const Region box = Region::box(2, {lo0, lo1, 0.0}, {hi0, hi1, 0.0});
    SausageLattice lat(box, h);
    double area = 0.0;
    for (const auto& x : centers) {
        const long i_lo = static_cast<long>((x[0] - rho - lo0) / h), i_hi = static_cast<long>((x[0] + rho - lo0) / h);
        const long j_lo = static_cast<long>((x[1] - rho - lo1) / h), j_hi = static_cast<long>((x[1] + rho - lo1) / h);
        for (long j = j_lo; j <= j_hi; ++j)
            for (long i = i_lo; i <= i_hi; ++i) {
                if (!lat.inside(i, j)) continue;
                const long c = lat.id(i, j);
                if (lat.occupied(c) || dist2(lat.center(i, j), x) > rho * rho) continue;
                lat.occupy(c);
                area += h * h;
            }
    }
    return area;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t pair_count(const std::vector<Point>& pts, const Region& w, double s) {
    std::vector<Point> in;
    for (const auto& p : pts)
        if (w.contains(p)) in.push_back(p);
    std::uint64_t c = 0;
    for (std::size_t a = 0; a < in.size(); ++a)
        for (std::size_t b = a + 1; b < in.size(); ++b)
            if (dist2(in[a], in[b]) <= s * s) ++c;
    return c;
}

}  // namespace

CsrReport csr_test_suite(const std::vector<std::vector<Point>>& samples,
                         const std::vector<Region>& windows, const CsrOptions& opt) {
    if (samples.size() < opt.min_samples) throw PreconditionError("CSR suite needs more samples");
    if (windows.empty()) throw PreconditionError("CSR suite needs at least one window");
    CsrReport rep;
    const std::size_t W = windows.size();
    const double n = static_cast<double>(samples.size());

    std::vector<std::vector<std::uint64_t>> counts(W);
    std::vector<std::vector<double>> countsd(W);
    for (const auto& s : samples)
        for (std::size_t w = 0; w < W; ++w) {
            std::uint64_t c = 0;
            for (const auto& p : s)
                if (windows[w].contains(p)) ++c;
            counts[w].push_back(c);
            countsd[w].push_back(static_cast<double>(c));
        }

    // 2 p-value rows per window plus the pair-count row.
    const double alpha = opt.alpha / static_cast<double>(2 * W + 1);
    for (std::size_t w = 0; w < W; ++w) {
        const double vol = windows[w].volume();
        const auto gof = poisson_gof(counts[w], vol);
        rep.rows.push_back({"count_gof_w" + std::to_string(w), gof.statistic, gof.p_value,
                            gof.p_value > alpha});
        const double m = mean(countsd[w]);
        const double z = (m - vol) / std::sqrt(vol / n);
        const double p = 2.0 * (1.0 - normal_cdf(std::abs(z)));
        rep.rows.push_back({"count_mean_w" + std::to_string(w), m, p, p > alpha});
    }
    for (std::size_t a = 0; a < W; ++a)
        for (std::size_t b = a + 1; b < W; ++b) {
            const double c = pearson(countsd[a], countsd[b]);
            const double z = std::atanh(std::clamp(c, -0.999999, 0.999999)) * std::sqrt(n - 3.0);
            const double p = 2.0 * (1.0 - normal_cdf(std::abs(z)));
            rep.max_abs_corr = std::max(rep.max_abs_corr, std::abs(c));
            rep.rows.push_back({"count_corr_w" + std::to_string(a) + "_w" + std::to_string(b), c, p,
                                std::abs(c) < opt.max_abs_corr});
        }

    // Ripley-type pair count on window 0 against fresh unit PPPs.
    {
        Region w0 = windows[0];
        std::vector<double> obs, ref;
        for (const auto& s : samples) obs.push_back(static_cast<double>(pair_count(s, w0, opt.pair_distance)));
        for (std::size_t i = 0; i < samples.size(); ++i) {
            Rng rng(derive_seed(opt.reference_seed, i));
            const auto ps = sample_ppp(w0, 1.0, rng);
            ref.push_back(static_cast<double>(pair_count(ps.points, w0, opt.pair_distance)));
        }
        const double m1 = mean(obs), m2 = mean(ref);
        const double se = std::sqrt(variance(obs) / obs.size() + variance(ref) / ref.size());
        const double z = se > 0.0 ? (m1 - m2) / se : 0.0;
        const double p = 2.0 * (1.0 - normal_cdf(std::abs(z)));
        rep.rows.push_back({"ripley_pairs_w0", m1 - m2, p, p > alpha});
    }
    rep.pass = std::all_of(rep.rows.begin(), rep.rows.end(), [](const CsrRow& r) { return r.pass; });
    return rep;
}

}  // namespace bfrog

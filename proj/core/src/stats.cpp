#include "bfrog/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "bfrog/errors.hpp"
#include "bfrog/parallel.hpp"

namespace bfrog {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw PreconditionError("linear_fit: size mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw ComputationError("linear_fit: need at least two points");
    const double mx = mean(x), my = mean(y);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw ComputationError("linear_fit: x values are all equal");
    LinearFit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    const double sse = std::max(0.0, syy - f.slope * sxy);
    f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    f.slope_se = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
    return f;
}

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) return 0.0;
    const double mx = mean(x), my = mean(y);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double t_quantile(double p, double dof) {
    return boost::math::quantile(boost::math::students_t(dof), p);
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double normal_cdf(double x) { return boost::math::cdf(boost::math::normal(), x); }

TestResult poisson_gof(std::span<const std::uint64_t> counts, double poisson_mean) {
    TestResult res;
    const std::size_t n = counts.size();
    if (n == 0 || !(poisson_mean > 0.0)) return res;
    const boost::math::poisson_distribution<> pois(poisson_mean);
    const std::uint64_t kmax = *std::max_element(counts.begin(), counts.end());
    const auto top = static_cast<std::uint64_t>(
        std::max<double>(static_cast<double>(kmax), poisson_mean + 10.0 * std::sqrt(poisson_mean) + 10.0));

    std::vector<double> observed(top + 1, 0.0), expected(top + 1, 0.0);
    for (auto c : counts) observed[std::min(c, top)] += 1.0;
    const double N = static_cast<double>(n);
    for (std::uint64_t k = 0; k < top; ++k) expected[k] = N * boost::math::pdf(pois, static_cast<double>(k));
    expected[top] = N * boost::math::cdf(boost::math::complement(pois, static_cast<double>(top) - 1.0));

    // Merge bins left to right until each has expected >= 5; fold the last
    // partial bin into its predecessor.
    std::vector<double> ob, ex;
    double o = 0.0, e = 0.0;
    for (std::uint64_t k = 0; k <= top; ++k) {
        o += observed[k];
        e += expected[k];
        if (e >= 5.0) {
            ob.push_back(o);
            ex.push_back(e);
            o = e = 0.0;
        }
    }
    if (e > 0.0 || o > 0.0) {
        if (ex.empty()) {
            ob.push_back(o);
            ex.push_back(e);
        } else {
            ob.back() += o;
            ex.back() += e;
        }
    }
    if (ex.size() < 2) return res;
    double stat = 0.0;
    for (std::size_t i = 0; i < ex.size(); ++i) stat += (ob[i] - ex[i]) * (ob[i] - ex[i]) / ex[i];
    res.statistic = stat;
    res.dof = static_cast<double>(ex.size() - 1);
    res.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(res.dof), stat));
    return res;
}

double kolmogorov_q(double lambda) {
    if (lambda < 1e-3) return 1.0;
    if (lambda < 1.18) {
        // Small-lambda theta series; converges quickly here.
        const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
        double s = 0.0;
        for (int k = 1; k < 50; k += 2) s += std::pow(y, k * k);
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? term : -term);
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

TestResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf) {
    TestResult res;
    if (sample.empty()) return res;
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double D = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double F = cdf(sample[i]);
        D = std::max({D, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
    }
    const double sn = std::sqrt(n);
    res.statistic = D;
    res.p_value = kolmogorov_q((sn + 0.12 + 0.11 / sn) * D);
    return res;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) return 0.0;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double D = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        D = std::max(D, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return D;
}

TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    TestResult res;
    if (a.empty() || b.empty()) return res;
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double D = ks_distance(std::move(a), std::move(b));
    const double ne = std::sqrt(na * nb / (na + nb));
    res.statistic = D;
    res.p_value = kolmogorov_q((ne + 0.12 + 0.11 / ne) * D);
    return res;
}

// ---------------------------------------------------------------------------

SpeedEstimate estimate_speed(const std::vector<std::vector<PassageSample>>& replicas, double r,
                             bool allow_few) {
    const std::size_t min_reps = allow_few ? 2 : 5;
    if (replicas.size() < min_reps) throw PreconditionError("estimate_speed needs >= 5 replicas");
    SpeedEstimate est;
    est.r = r;
    est.replicas = replicas.size();
    std::vector<double> slopes;
    for (const auto& rep : replicas) {
        int n_max = 0;
        for (const auto& s : rep) n_max = std::max(n_max, s.n);
        const int n_lo = n_max / 2;
        if (n_lo < 1 || n_max < 2 * n_lo) throw PreconditionError("n range must span a factor >= 2");
        std::vector<double> xs, ys;
        for (const auto& s : rep) {
            if (s.n < n_lo) continue;
            if (!s.awake) {
                est.partial = true;
                continue;
            }
            xs.push_back(s.n);
            ys.push_back(s.T);
        }
        if (xs.size() >= 2) slopes.push_back(linear_fit(xs, ys).slope);
    }
    if (slopes.size() < 2) throw ComputationError("estimate_speed: too few usable replicas");
    est.gamma_tilde = mean(slopes);
    est.se = std::sqrt(variance(slopes) / static_cast<double>(slopes.size()));
    const double tq = t_quantile(0.975, static_cast<double>(slopes.size() - 1));
    est.ci_lo = est.gamma_tilde - tq * est.se;
    est.ci_hi = est.gamma_tilde + tq * est.se;
    est.gamma = est.gamma_tilde > 0.0 ? 1.0 / est.gamma_tilde
                                      : std::numeric_limits<double>::infinity();
    return est;
}

bool speeds_agree(const SpeedEstimate& a, const SpeedEstimate& b, double z) {
    return std::abs(a.gamma_tilde - b.gamma_tilde) <= z * std::sqrt(a.se * a.se + b.se * b.se);
}

ExponentFit growth_exponent_fit(const FrontSeries& front,
                                std::optional<std::pair<double, double>> window) {
    const auto& s = front.samples;
    if (s.size() < 2) throw PreconditionError("front series too short");
    double t_first = 0.0;
    for (const auto& [t, R] : s)
        if (t > 0.0) {
            t_first = t;
            break;
        }
    const double t_end = s.back().first;
    if (!(t_first > 0.0) || t_end < 10.0 * t_first * (1.0 - 1e-9))
        throw PreconditionError("front series must span at least one decade of t");
    const auto [lo, hi] = window.value_or(std::make_pair(t_end / std::sqrt(10.0), t_end));
    ExponentFit fit;
    fit.t_lo = lo;
    fit.t_hi = hi;
    std::vector<double> lx, ly;
    for (const auto& [t, R] : s) {
        if (t < lo || t > hi) continue;
        if (!(R > 0.0)) throw ComputationError("nonpositive R_t inside the fit window");
        lx.push_back(std::log(t));
        ly.push_back(std::log(R));
    }
    if (lx.size() < 2) throw PreconditionError("fit window contains fewer than two samples");
    const auto lf = linear_fit(lx, ly);
    fit.alpha = lf.slope;
    fit.r2 = lf.r2;
    fit.points = lx.size();
    return fit;
}

TailFit tail_exponent_fit(std::span<const std::uint64_t> samples, std::uint64_t min_samples,
                          std::uint64_t min_count) {
    if (samples.size() < min_samples) throw PreconditionError("tail fit needs more samples");
    std::vector<std::uint64_t> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    if (v.front() == v.back()) throw ComputationError("tail fit on degenerate (constant) samples");
    const std::uint64_t median = v[v.size() / 2];
    const double n = static_cast<double>(v.size());
    std::vector<double> ks, ls;
    for (std::uint64_t k = median; k <= v.back(); ++k) {
        const auto above = static_cast<std::uint64_t>(v.end() - std::upper_bound(v.begin(), v.end(), k));
        if (above < min_count) break;
        ks.push_back(static_cast<double>(k));
        ls.push_back(std::log(static_cast<double>(above) / n));
    }
    if (ks.size() < 10) throw ComputationError("tail support has fewer than 10 distinct k");
    const auto lf = linear_fit(ks, ls);
    TailFit fit;
    fit.c = -lf.slope;
    fit.r2 = lf.r2;
    fit.k_min = median;
    fit.k_max = static_cast<std::uint64_t>(ks.back());
    fit.points = ks.size();
    return fit;
}

PoissonWindowReport poisson_window_test(const std::vector<WindowSample>& samples,
                                        const std::vector<Region>& windows,
                                        const PoissonTestOptions& opt) {
    PoissonWindowReport rep;
    const std::size_t W = windows.size();
    std::vector<std::vector<std::uint64_t>> counts(W);
    for (const auto& s : samples) {
        if (!s.valid) {
            ++rep.excluded;
            continue;
        }
        ++rep.used;
        for (std::size_t w = 0; w < W; ++w) {
            std::uint64_t c = 0;
            for (const auto& p : s.positions)
                if (windows[w].contains(p)) ++c;
            counts[w].push_back(c);
        }
    }
    rep.exclusion_rate = samples.empty() ? 0.0
                                         : static_cast<double>(rep.excluded) /
                                               static_cast<double>(samples.size());
    const double alpha = opt.alpha / static_cast<double>(std::max<std::size_t>(1, W));
    rep.mean_ok = rep.dispersion_ok = rep.gof_ok = true;
    std::vector<std::vector<double>> as_double(W);
    const double n = static_cast<double>(rep.used);
    for (std::size_t w = 0; w < W; ++w) {
        WindowStats ws;
        ws.volume = windows[w].volume();
        as_double[w].assign(counts[w].begin(), counts[w].end());
        ws.mean = mean(as_double[w]);
        ws.variance = variance(as_double[w]);
        ws.dispersion = ws.mean > 0.0 ? ws.variance / ws.mean : 0.0;
        const double se = n > 1 && ws.mean > 0.0 ? std::sqrt(2.0 / (n - 1.0) + 1.0 / (ws.mean * n)) : 0.0;
        ws.dispersion_lo = ws.dispersion - 1.959963984540054 * se;
        ws.dispersion_hi = ws.dispersion + 1.959963984540054 * se;
        ws.gof = poisson_gof(counts[w], ws.volume);
        rep.mean_ok = rep.mean_ok && std::abs(ws.mean - ws.volume) <= opt.mean_rel_tol * ws.volume;
        rep.dispersion_ok = rep.dispersion_ok && ws.dispersion >= opt.dispersion_lo &&
                            ws.dispersion <= opt.dispersion_hi;
        rep.gof_ok = rep.gof_ok && ws.gof.p_value > alpha;
        rep.windows.push_back(ws);
    }
    rep.correlation.assign(W, std::vector<double>(W, 1.0));
    for (std::size_t a = 0; a < W; ++a)
        for (std::size_t b = a + 1; b < W; ++b) {
            const double c = pearson(as_double[a], as_double[b]);
            rep.correlation[a][b] = rep.correlation[b][a] = c;
            rep.max_abs_corr = std::max(rep.max_abs_corr, std::abs(c));
        }
    rep.corr_ok = rep.max_abs_corr < opt.max_abs_corr;
    rep.pass = rep.used > 0 && rep.mean_ok && rep.dispersion_ok && rep.gof_ok && rep.corr_ok;
    return rep;
}

std::vector<BoundCheck> verify_bm_bounds(double k, const std::vector<int>& ells,
                                         std::uint64_t replicas, std::uint64_t seed,
                                         int steps_per_k2, unsigned workers) {
    if (!(k > 0.0) || replicas < 1 || steps_per_k2 < 1 || ells.empty())
        throw ConfigError("invalid Brownian-bound parameters");
    const int max_ell = *std::max_element(ells.begin(), ells.end());
    if (*std::min_element(ells.begin(), ells.end()) < 1) throw ConfigError("ell must be >= 1");
    const double dt = k * k / steps_per_k2;
    const double sd = std::sqrt(dt);

    // Per replica: first step index at which |B| reaches k, and max B on [0, k^2].
    std::vector<long> exit_step(replicas, 0);
    std::vector<double> max_first(replicas, 0.0);
    parallel_for(replicas, workers, [&](std::uint64_t i) {
        Rng rng(derive_seed(seed, i));
        double x = 0.0, mx = 0.0;
        long exit = -1;
        const long total = static_cast<long>(max_ell) * steps_per_k2;
        for (long s = 0; s < total; ++s) {
            const double y = x + sd * rng.normal();
            const double span2 = (y - x) * (y - x);
            // Exact bridge maximum and (independently sampled) minimum.
            const double hi = 0.5 * (x + y + std::sqrt(span2 - 2.0 * dt * std::log(rng.uniform_pos())));
            const double lo = 0.5 * (x + y - std::sqrt(span2 - 2.0 * dt * std::log(rng.uniform_pos())));
            if (s < steps_per_k2) mx = std::max(mx, hi);
            if (exit < 0 && (hi >= k || lo <= -k)) exit = s;
            x = y;
            if (exit >= 0 && s >= steps_per_k2) break;
        }
        exit_step[i] = exit < 0 ? total : exit;
        max_first[i] = mx;
    });

    std::vector<BoundCheck> out;
    const double n = static_cast<double>(replicas);
    for (int ell : ells) {
        // Staying inside [-k, k] up to time l k^2 means no exit in the first l*steps steps.
        std::uint64_t stay = 0;
        for (auto e : exit_step)
            if (e >= static_cast<long>(ell) * steps_per_k2) ++stay;
        BoundCheck c;
        c.name = "max_abs_within_k_ell" + std::to_string(ell);
        c.ell = ell;
        c.empirical = static_cast<double>(stay) / n;
        c.sigma = std::sqrt(c.empirical * (1.0 - c.empirical) / n);
        c.bound = std::pow(0.7, ell);
        c.replicas = replicas;
        c.pass = c.empirical <= c.bound + 3.0 * c.sigma;
        out.push_back(c);
    }
    for (int ell : ells) {
        std::uint64_t above = 0;
        for (double m : max_first)
            if (m >= ell * k) ++above;
        BoundCheck c;
        c.name = "max_exceeds_ell_k_ell" + std::to_string(ell);
        c.ell = ell;
        c.empirical = static_cast<double>(above) / n;
        c.sigma = std::sqrt(c.empirical * (1.0 - c.empirical) / n);
        c.bound = 2.0 * std::exp(-0.5 * ell * ell);
        c.replicas = replicas;
        c.pass = c.empirical <= c.bound + 3.0 * c.sigma;
        out.push_back(c);
    }
    return out;
}

}  // namespace bfrog

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bfrog/frogsim.hpp"
#include "bfrog/pointprocess.hpp"

namespace bfrog {

// ---------------------------------------------------------------------------
// Basic estimators and tests

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_se = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope x. Needs >= 2 distinct x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> x);
/// Unbiased sample variance (0 for fewer than 2 values).
double variance(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);
/// Two-sided Student-t quantile, e.g. t_quantile(0.975, dof).
double t_quantile(double p, double dof);
double normal_quantile(double p);
double normal_cdf(double x);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double dof = 0.0;
};

/// Chi-square goodness of fit of integer counts against Poisson(mean). Bins
/// are merged from both tails until every expected count is >= 5.
TestResult poisson_gof(std::span<const std::uint64_t> counts, double poisson_mean);
/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);
/// One-sample KS against a continuous CDF.
TestResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf);
/// Two-sample KS.
TestResult ks_two_sample(std::vector<double> a, std::vector<double> b);
/// Largest |F_a - F_b| between two empirical CDFs.
double ks_distance(std::vector<double> a, std::vector<double> b);

// ---------------------------------------------------------------------------
// Model quantities

struct SpeedEstimate {
    double gamma_tilde = 0.0;  // time per unit length
    double gamma = 0.0;        // 1 / gamma_tilde (infinity when gamma_tilde == 0)
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double se = 0.0;
    double r = 0.0;
    std::size_t replicas = 0;
    bool partial = false;  // some targets were never awakened
};

/// gamma_tilde = mean over replicas of the least-squares slope of T against n
/// over the largest-n half; 95% CI from the replicate spread.
/// Requires >= 5 replicas (>= 2 if allow_few) and an n range spanning a factor >= 2.
SpeedEstimate estimate_speed(const std::vector<std::vector<PassageSample>>& replicas, double r,
                             bool allow_few = false);
/// Estimates agree when |difference| <= z * sqrt(se_a^2 + se_b^2).
bool speeds_agree(const SpeedEstimate& a, const SpeedEstimate& b, double z = 1.959963984540054);

struct ExponentFit {
    double alpha = 0.0;
    double r2 = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
    std::size_t points = 0;
};

/// Slope of log R_t against log t. Default window: the trailing half-decade
/// [t_end / sqrt(10), t_end]. The series must span at least a decade of t.
ExponentFit growth_exponent_fit(const FrontSeries& front,
                                std::optional<std::pair<double, double>> window = std::nullopt);

struct TailFit {
    double c = 0.0;  // decay rate: P[X > k] ~ exp(-c k)
    double r2 = 0.0;
    std::uint64_t k_min = 0;
    std::uint64_t k_max = 0;
    std::size_t points = 0;
};

/// Least squares of log empirical P[X > k] against k over k >= median,
/// keeping only k whose survival count is at least min_count.
TailFit tail_exponent_fit(std::span<const std::uint64_t> samples, std::uint64_t min_samples = 10000,
                          std::uint64_t min_count = 5);

struct WindowSample {
    std::vector<Point> positions;
    bool valid = true;  // false if the front had not passed the windows
};

struct WindowStats {
    double volume = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double dispersion = 0.0;
    double dispersion_lo = 0.0;
    double dispersion_hi = 0.0;
    TestResult gof;
};

struct PoissonTestOptions {
    double alpha = 0.01;  // Bonferroni-corrected across windows
    double dispersion_lo = 0.8;
    double dispersion_hi = 1.2;
    double max_abs_corr = 0.05;
    double mean_rel_tol = 0.10;
};

struct PoissonWindowReport {
    std::vector<WindowStats> windows;
    std::vector<std::vector<double>> correlation;
    double max_abs_corr = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;
    double exclusion_rate = 0.0;
    bool mean_ok = false;
    bool dispersion_ok = false;
    bool gof_ok = false;
    bool corr_ok = false;
    bool pass = false;
};

/// Per-window counts across replicas tested against Poisson(window volume).
PoissonWindowReport poisson_window_test(const std::vector<WindowSample>& samples,
                                        const std::vector<Region>& windows,
                                        const PoissonTestOptions& opt = {});

struct BoundCheck {
    std::string name;
    int ell = 0;
    double empirical = 0.0;
    double sigma = 0.0;
    double bound = 0.0;
    std::uint64_t replicas = 0;
    bool pass = false;
};

/// Monte Carlo check of the Brownian bounds
///   P[max_{t <= l k^2} |B_t| <= k] <= 0.7^l
///   P[max_{t <= k^2} B_t >= l k] <= 2 exp(-l^2 / 2)
/// for one-dimensional B. Paths are stepped on a grid of steps_per_k2 steps
/// per k^2 with exact Brownian-bridge maxima inside each step.
/// Verdicts pass iff empirical <= bound + 3 sigma_hat.
std::vector<BoundCheck> verify_bm_bounds(double k, const std::vector<int>& ells,
                                         std::uint64_t replicas, std::uint64_t seed,
                                         int steps_per_k2 = 400, unsigned workers = 1);

}  // namespace bfrog

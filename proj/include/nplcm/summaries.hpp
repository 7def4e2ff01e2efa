#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nplcm/mcmc.hpp"
#include "nplcm/simulate.hpp"

namespace nplcm {

// Type-7 (linear interpolation) sample quantile; the single quantile
// definition used for every credible interval in the project.
double quantile_type7(std::vector<double> values, double p);

// Visit every retained draw (all chains, in chain order) as a ParamState.
void for_each_draw(const DrawsStore& draws, const BoundModel& bm,
                   const std::function<void(const ParamState&)>& fn);

struct BandRow {
    int grid_row = 0;
    int series = 0;  // cause or pathogen index (0-based)
    double mean = 0.0, lo = 0.0, hi = 0.0;
};

std::string bands_to_csv(const std::vector<BandRow>& rows, const std::string& series_label,
                         const std::vector<std::string>& series_names);

// Posterior mean and equal-tailed 95% band of pi_l(x) per grid row and cause.
std::vector<BandRow> pef_curve(const DrawsStore& draws, const BoundModel& bm, const Matrix& x_grid);

// Raw per-draw PEFs per grid row (total draws x L each), for scoring.
std::vector<Matrix> pef_draws_at(const DrawsStore& draws, const BoundModel& bm, const Matrix& x_grid);

// Overall PEFs: per draw, the empirical average of pi(X_i) over case rows.
struct OverallPef {
    Matrix draws;  // total draws x L
    std::vector<double> mean, lo, hi;
};
OverallPef overall_pef(const DrawsStore& draws, const BoundModel& bm, const Dataset& ds);

// Case and control marginal positive-rate bands per pathogen over paired
// (x, w) grid rows. Requires singleton causes (see positive_rate_curve).
struct RateBandRow {
    int grid_row = 0;
    int pathogen = 0;
    double case_mean = 0, case_lo = 0, case_hi = 0;
    double ctrl_mean = 0, ctrl_lo = 0, ctrl_hi = 0;
};
std::vector<RateBandRow> fitted_positive_rate_curves(const DrawsStore& draws, const BoundModel& bm,
                                                     const Matrix& x_grid, const Matrix& w_grid);
std::string rate_bands_to_csv(const std::vector<RateBandRow>& rows,
                              const std::vector<std::string>& pathogen_names);

// Posterior-averaged individual etiology probabilities for selected cases.
Matrix ief_summary(const DrawsStore& draws, const BoundModel& bm, const Dataset& ds,
                   const std::vector<int>& case_rows);

// Posterior log-odds-ratio of cause vs ref_cause between two covariate rows.
struct ContrastSummary {
    double mean = 0, lo = 0, hi = 0;
};
ContrastSummary log_odds_contrast(const DrawsStore& draws, const BoundModel& bm,
                                  std::span<const double> x_a, std::span<const double> x_b, int cause,
                                  int ref_cause);

// Mean posterior squared error of pi_l(X_i) against the generation truth.
std::vector<double> pmse_per_cause(const DrawsStore& draws, const BoundModel& bm, const Dataset& ds,
                                   const TruthRecord& truth);

// ---- replication harness metrics -------------------------------------------

struct TargetSummary {
    std::string name;  // e.g. "overall.A" or "site1.C"
    double post_mean = 0;
    double lo = 0, hi = 0;
    double truth = 0;
    double pmse = std::numeric_limits<double>::quiet_NaN();
};

struct MetricRow {
    std::string name;
    int n_reps = 0;
    double mean_bias_pct = 0, median_bias_pct = 0;
    double coverage = 0, coverage_lo = 0, coverage_hi = 0;  // with binomial 95% CI
    double mean_post_mean = 0;
    double mean_pmse = std::numeric_limits<double>::quiet_NaN();
};

// Aggregate per-target bias / coverage / PMSE across replications. Every
// replication must report the same target list.
std::vector<MetricRow> replication_metrics(const std::vector<std::vector<TargetSummary>>& reps);

std::string metrics_to_json(const std::vector<MetricRow>& rows);
std::string metrics_to_csv(const std::vector<MetricRow>& rows);

}  // namespace nplcm

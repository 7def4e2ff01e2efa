#include "nplcm/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

namespace nplcm {

using nlohmann::json;

double quantile_type7(std::vector<double> values, double p) {
    require(!values.empty(), "quantile: empty sample");
    require(p >= 0.0 && p <= 1.0, "quantile: p outside [0,1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const size_t lo = static_cast<size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

void for_each_draw(const DrawsStore& draws, const BoundModel& bm,
                   const std::function<void(const ParamState&)>& fn) {
    for (int c = 0; c < draws.n_chains(); ++c) {
        const Matrix& m = draws.chains[c];
        for (int r = 0; r < m.rows; ++r) fn(unpack_state(bm, m.row(r)));
    }
}

namespace {

int required_raw_width(const BoundFormula& f) {
    int w = 0;
    for (const auto& t : f.terms)
        if (t.spec.kind != TermSpec::Kind::Intercept) w = std::max(w, t.spec.column + 1);
    return w;
}

BandRow summarize_band(int grid_row, int series, std::vector<double> draws) {
    BandRow b;
    b.grid_row = grid_row;
    b.series = series;
    double s = 0.0;
    for (double v : draws) s += v;
    b.mean = s / static_cast<double>(draws.size());
    b.lo = quantile_type7(draws, 0.025);
    b.hi = quantile_type7(std::move(draws), 0.975);
    return b;
}

}  // namespace

std::string bands_to_csv(const std::vector<BandRow>& rows, const std::string& series_label,
                         const std::vector<std::string>& series_names) {
    std::ostringstream os;
    os << "grid_row," << series_label << ",mean,lo,hi\n";
    for (const auto& r : rows) {
        os << r.grid_row << "," << series_names.at(r.series) << "," << r.mean << "," << r.lo << ","
           << r.hi << "\n";
    }
    return os.str();
}

std::vector<Matrix> pef_draws_at(const DrawsStore& draws, const BoundModel& bm, const Matrix& x_grid) {
    require(x_grid.cols >= required_raw_width(bm.x_formula),
            "pef_curve: grid columns mismatch the stored formula");
    const int total = draws.n_chains() * draws.n_draws();
    std::vector<Matrix> out(x_grid.rows, Matrix(total, bm.n_causes));
    int b = 0;
    for_each_draw(draws, bm, [&](const ParamState& st) {
        for (int r = 0; r < x_grid.rows; ++r) {
            const auto pi = etiology_probs_at(bm, st, x_grid.row(r));
            for (int l = 0; l < bm.n_causes; ++l) out[r](b, l) = pi[l];
        }
        ++b;
    });
    return out;
}

std::vector<BandRow> pef_curve(const DrawsStore& draws, const BoundModel& bm, const Matrix& x_grid) {
    const auto per_row = pef_draws_at(draws, bm, x_grid);
    std::vector<BandRow> out;
    for (int r = 0; r < x_grid.rows; ++r)
        for (int l = 0; l < bm.n_causes; ++l) out.push_back(summarize_band(r, l, per_row[r].col(l)));
    return out;
}

OverallPef overall_pef(const DrawsStore& draws, const BoundModel& bm, const Dataset& ds) {
    require(ds.n_cases() > 0, "overall_pef: no case rows");
    // weight each unique case covariate row by its case count
    std::vector<double> wts(bm.x_formula.unique_raw.size(), 0.0);
    int n1 = 0;
    for (int i = 0; i < ds.n_subjects; ++i)
        if (ds.y[i] == 1) {
            wts[bm.x_formula.row_of[i]] += 1.0;
            ++n1;
        }
    for (auto& w : wts) w /= n1;

    const int total = draws.n_chains() * draws.n_draws();
    OverallPef out;
    out.draws = Matrix(total, bm.n_causes);
    int b = 0;
    for_each_draw(draws, bm, [&](const ParamState& st) {
        for (size_t r = 0; r < wts.size(); ++r) {
            if (wts[r] == 0.0) continue;
            const auto pi = etiology_probs_row(bm, st, static_cast<int>(r));
            for (int l = 0; l < bm.n_causes; ++l) out.draws(b, l) += wts[r] * pi[l];
        }
        ++b;
    });
    out.mean.resize(bm.n_causes);
    out.lo.resize(bm.n_causes);
    out.hi.resize(bm.n_causes);
    for (int l = 0; l < bm.n_causes; ++l) {
        auto col = out.draws.col(l);
        double s = 0.0;
        for (double v : col) s += v;
        out.mean[l] = s / total;
        out.lo[l] = quantile_type7(col, 0.025);
        out.hi[l] = quantile_type7(std::move(col), 0.975);
    }
    return out;
}

std::vector<RateBandRow> fitted_positive_rate_curves(const DrawsStore& draws, const BoundModel& bm,
                                                     const Matrix& x_grid, const Matrix& w_grid) {
    require(x_grid.rows == w_grid.rows, "rate curves: x and w grids must pair up");
    const int total = draws.n_chains() * draws.n_draws();
    const int J = bm.n_pathogens;
    std::vector<Matrix> case_draws(x_grid.rows, Matrix(total, J));
    std::vector<Matrix> ctrl_draws(x_grid.rows, Matrix(total, J));
    int b = 0;
    for_each_draw(draws, bm, [&](const ParamState& st) {
        for (int r = 0; r < x_grid.rows; ++r)
            for (int j = 0; j < J; ++j) {
                case_draws[r](b, j) =
                    positive_rate_curve(bm, st, x_grid.row(r), w_grid.row(r), j, Side::Case);
                ctrl_draws[r](b, j) =
                    positive_rate_curve(bm, st, x_grid.row(r), w_grid.row(r), j, Side::Control);
            }
        ++b;
    });
    std::vector<RateBandRow> out;
    for (int r = 0; r < x_grid.rows; ++r)
        for (int j = 0; j < J; ++j) {
            RateBandRow row;
            row.grid_row = r;
            row.pathogen = j;
            const auto cb = summarize_band(r, j, case_draws[r].col(j));
            const auto xb = summarize_band(r, j, ctrl_draws[r].col(j));
            row.case_mean = cb.mean;
            row.case_lo = cb.lo;
            row.case_hi = cb.hi;
            row.ctrl_mean = xb.mean;
            row.ctrl_lo = xb.lo;
            row.ctrl_hi = xb.hi;
            out.push_back(row);
        }
    return out;
}

std::string rate_bands_to_csv(const std::vector<RateBandRow>& rows,
                              const std::vector<std::string>& pathogen_names) {
    std::ostringstream os;
    os << "grid_row,pathogen,case_mean,case_lo,case_hi,ctrl_mean,ctrl_lo,ctrl_hi\n";
    for (const auto& r : rows)
        os << r.grid_row << "," << pathogen_names.at(r.pathogen) << "," << r.case_mean << ","
           << r.case_lo << "," << r.case_hi << "," << r.ctrl_mean << "," << r.ctrl_lo << ","
           << r.ctrl_hi << "\n";
    return os.str();
}

Matrix ief_summary(const DrawsStore& draws, const BoundModel& bm, const Dataset& ds,
                   const std::vector<int>& case_rows) {
    for (int i : case_rows) {
        require(i >= 0 && i < ds.n_subjects, "ief_summary: case index out of range");
        require(ds.y[i] == 1, "ief_summary: row is not a case");
    }
    const int total = draws.n_chains() * draws.n_draws();
    Matrix out(static_cast<int>(case_rows.size()), bm.n_causes);
    for_each_draw(draws, bm, [&](const ParamState& st) {
        for (size_t c = 0; c < case_rows.size(); ++c) {
            const auto ief = individual_etiology(bm, st, ds, case_rows[c]);
            for (int l = 0; l < bm.n_causes; ++l) out(static_cast<int>(c), l) += ief[l];
        }
    });
    for (auto& v : out.v) v /= total;
    return out;
}

ContrastSummary log_odds_contrast(const DrawsStore& draws, const BoundModel& bm,
                                  std::span<const double> x_a, std::span<const double> x_b, int cause,
                                  int ref_cause) {
    std::vector<double> samples;
    for_each_draw(draws, bm, [&](const ParamState& st) {
        const auto la = etiology_logits_at(bm, st, x_a);
        const auto lb = etiology_logits_at(bm, st, x_b);
        samples.push_back((la[cause] - la[ref_cause]) - (lb[cause] - lb[ref_cause]));
    });
    ContrastSummary out;
    double s = 0.0;
    for (double v : samples) s += v;
    out.mean = s / static_cast<double>(samples.size());
    out.lo = quantile_type7(samples, 0.025);
    out.hi = quantile_type7(std::move(samples), 0.975);
    return out;
}

std::vector<double> pmse_per_cause(const DrawsStore& draws, const BoundModel& bm, const Dataset& ds,
                                   const TruthRecord& truth) {
    // per unique case row: count, sum pi0, sum pi0^2 (per cause)
    const int u = static_cast<int>(bm.x_formula.unique_raw.size());
    const int L = bm.n_causes;
    std::vector<double> cnt(u, 0.0);
    Matrix s1(u, L), s2(u, L);
    int n1 = 0;
    for (int i = 0; i < ds.n_subjects; ++i) {
        if (ds.y[i] != 1) continue;
        const int r = bm.x_formula.row_of[i];
        cnt[r] += 1.0;
        ++n1;
        for (int l = 0; l < L; ++l) {
            s1(r, l) += truth.pi0(i, l);
            s2(r, l) += truth.pi0(i, l) * truth.pi0(i, l);
        }
    }
    std::vector<double> pmse(L, 0.0);
    int total = 0;
    for_each_draw(draws, bm, [&](const ParamState& st) {
        for (int r = 0; r < u; ++r) {
            if (cnt[r] == 0.0) continue;
            const auto pi = etiology_probs_row(bm, st, r);
            for (int l = 0; l < L; ++l)
                pmse[l] += cnt[r] * pi[l] * pi[l] - 2.0 * pi[l] * s1(r, l) + s2(r, l);
        }
        ++total;
    });
    for (auto& v : pmse) v /= static_cast<double>(total) * n1;
    return pmse;
}

std::vector<MetricRow> replication_metrics(const std::vector<std::vector<TargetSummary>>& reps) {
    require(!reps.empty(), "replication_metrics: no replications");
    const size_t n_targets = reps[0].size();
    for (const auto& r : reps) {
        require(r.size() == n_targets, "replication_metrics: inconsistent target counts");
        for (size_t t = 0; t < n_targets; ++t)
            require(r[t].name == reps[0][t].name, "replication_metrics: inconsistent target names");
    }

    std::vector<MetricRow> out;
    const int R = static_cast<int>(reps.size());
    for (size_t t = 0; t < n_targets; ++t) {
        MetricRow row;
        row.name = reps[0][t].name;
        row.n_reps = R;
        std::vector<double> biases;
        int covered = 0;
        double pm_sum = 0.0, pmse_sum = 0.0;
        int pmse_n = 0;
        for (const auto& r : reps) {
            const auto& s = r[t];
            biases.push_back(100.0 * (s.post_mean - s.truth) / s.truth);
            if (s.truth >= s.lo && s.truth <= s.hi) ++covered;
            pm_sum += s.post_mean;
            if (!std::isnan(s.pmse)) {
                pmse_sum += s.pmse;
                ++pmse_n;
            }
        }
        double bsum = 0.0;
        for (double b : biases) bsum += b;
        row.mean_bias_pct = bsum / R;
        row.median_bias_pct = quantile_type7(biases, 0.5);
        row.coverage = static_cast<double>(covered) / R;
        const double se = std::sqrt(std::max(0.0, row.coverage * (1.0 - row.coverage) / R));
        row.coverage_lo = std::max(0.0, row.coverage - 1.96 * se);
        row.coverage_hi = std::min(1.0, row.coverage + 1.96 * se);
        row.mean_post_mean = pm_sum / R;
        if (pmse_n > 0) row.mean_pmse = pmse_sum / pmse_n;
        out.push_back(row);
    }
    return out;
}

std::string metrics_to_json(const std::vector<MetricRow>& rows) {
    json j = json::array();
    for (const auto& r : rows) {
        json row;
        row["target"] = r.name;
        row["n_reps"] = r.n_reps;
        row["mean_bias_pct"] = r.mean_bias_pct;
        row["median_bias_pct"] = r.median_bias_pct;
        row["coverage"] = r.coverage;
        row["coverage_ci"] = {r.coverage_lo, r.coverage_hi};
        row["mean_post_mean"] = r.mean_post_mean;
        if (!std::isnan(r.mean_pmse)) row["mean_pmse"] = r.mean_pmse;
        j.push_back(row);
    }
    return j.dump(2);
}

std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream os;
    os << "target,n_reps,mean_bias_pct,median_bias_pct,coverage,coverage_lo,coverage_hi,"
          "mean_post_mean,mean_pmse\n";
    for (const auto& r : rows)
        os << r.name << "," << r.n_reps << "," << r.mean_bias_pct << "," << r.median_bias_pct << ","
           << r.coverage << "," << r.coverage_lo << "," << r.coverage_hi << "," << r.mean_post_mean
           << "," << r.mean_pmse << "\n";
    return os.str();
}

}  // namespace nplcm

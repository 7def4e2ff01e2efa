#pragma once

#include <span>
#include <string>
#include <vector>

#include "nplcm/common.hpp"
#include "nplcm/data.hpp"
#include "nplcm/priors.hpp"
#include "nplcm/splines.hpp"

namespace nplcm {

enum class Side { Case, Control };

// True/false positive rates. theta/psi are J x K over subclasses; theta_ss
// holds the silver-standard sensitivities (specificity is exact by model).
struct RateParams {
    Matrix theta;
    Matrix psi;
    std::vector<double> theta_ss;
};

// Flat coefficient vector for one additive predictor (one etiology class or
// one stick-breaking step); layout is defined by the bound formula.
struct RegressionComponent {
    std::vector<double> coefs;
};

struct ParamState {
    RateParams rates;
    std::vector<RegressionComponent> etiology;  // L components
    std::vector<RegressionComponent> nu;        // K-1 control stick steps
    std::vector<RegressionComponent> eta;       // K-1 case stick steps
    std::vector<double> mu_star;                // K-1 nonnegative raw intercepts
    std::vector<double> tau0;                   // K-1 intercept precisions
    SmoothingState smoothing;

    // mu_{k0} = sum_{j<=k} mu*_j (cumulative weights u == 1)
    double mu0(int k) const {
        double s = 0.0;
        for (int j = 0; j <= k; ++j) s += mu_star[j];
        return s;
    }
};

// Latent allocations: disease_class is -1 for controls and the 0-based cause
// index for cases; subclass is 0-based for every subject.
struct LatentState {
    std::vector<int> disease_class;
    std::vector<int> subclass;
};

// A formula bound to data: standardization, spline bases, coefficient layout,
// Metropolis blocks, and a design cache over the distinct covariate rows.
struct BoundTerm {
    TermSpec spec;
    double mean = 0.0;
    double scale = 1.0;
    SplineBasis basis;  // spline terms only
    int offset = 0;
    int width = 1;
};

struct BoundFormula {
    std::vector<BoundTerm> terms;
    int n_coef = 0;

    struct Block {
        std::vector<int> indices;  // coefficient positions updated together
        int spline_term = -1;      // index among this formula's spline terms; -1 = linear group
    };
    std::vector<Block> blocks;

    Matrix design;                                // n_unique x n_coef
    std::vector<int> row_of;                      // subject -> unique row (-1 out of scope)
    std::vector<std::vector<double>> unique_raw;  // distinct raw covariate rows

    int n_spline_terms() const {
        int s = 0;
        for (const auto& t : terms) s += (t.spec.kind == TermSpec::Kind::Spline);
        return s;
    }

    // Design row for an arbitrary raw covariate row (prediction grids).
    // Spline inputs outside the training range are clamped; each clamp
    // increments *clamp_count when provided.
    std::vector<double> design_row(std::span<const double> raw, int* clamp_count = nullptr) const;
};

struct BoundModel {
    ModelSpec spec;
    PriorConfig priors;  // tpr vectors sized to J / J_ss
    int n_pathogens = 0;
    int n_causes = 0;
    int n_subclasses = 0;
    int n_ss = 0;
    std::vector<int> ss_to_pathogen;
    BoundFormula x_formula;  // bound over case rows
    BoundFormula w_formula;  // bound over all rows
};

BoundModel bind_model(const Dataset& ds, const ModelSpec& spec, const PriorConfig& priors);

// ---- elementary model operations ----------------------------------------

double bernoulli_product(std::span<const int8_t> m, std::span<const double> s);
double log_bernoulli_product(std::span<const int8_t> m, std::span<const double> s);

// Weights from break fractions: w_k = g_k prod_{s<k}(1-g_s); the last weight
// takes the remaining stick so the vector sums to one exactly.
std::vector<double> stick_break(std::span<const double> g);

std::vector<double> softmax_probs(std::span<const double> phi);

// Per-pathogen positive rates in subclass k of a disease class: TPR on the
// causative set, FPR elsewhere (NoS uses the FPR column unchanged).
std::vector<double> class_positive_rates(const CauseSpec& causes, int cause, const RateParams& rates,
                                         int k);

// ---- covariate-dependent evaluations ------------------------------------

std::vector<double> etiology_logits_at(const BoundModel& bm, const ParamState& st,
                                       std::span<const double> x_row);
std::vector<double> etiology_probs_at(const BoundModel& bm, const ParamState& st,
                                      std::span<const double> x_row);
std::vector<double> subclass_weights_at(const BoundModel& bm, const ParamState& st,
                                        std::span<const double> w_row, Side side);

// Evaluations over the bound data (cached unique rows).
std::vector<double> etiology_probs_row(const BoundModel& bm, const ParamState& st, int unique_x_row);
void subclass_log_weights_row(const BoundModel& bm, const ParamState& st, int unique_w_row, Side side,
                              std::span<double> out);

// ---- likelihoods ----------------------------------------------------------

double control_loglik(const BoundModel& bm, const ParamState& st, const Dataset& ds);

// log P(M_i, SS_i | I_i = cause, W_i); -inf when a positive silver-standard
// measurement sits outside the cause set (perfect specificity).
double case_cell_loglik(const BoundModel& bm, const ParamState& st, const Dataset& ds, int i,
                        int cause);

double case_loglik(const BoundModel& bm, const ParamState& st, const Dataset& ds);
double total_loglik(const BoundModel& bm, const ParamState& st, const Dataset& ds);

// Marginal positive-rate curve for a single-pathogen cause. Throws when the
// pathogen participates in any non-singleton cause; use the enumeration
// marginal for those.
double positive_rate_curve(const BoundModel& bm, const ParamState& st, std::span<const double> x_row,
                           std::span<const double> w_row, int pathogen, Side side);

// Enumeration-based case marginal P(M_j = 1 | x, w, Y=1) valid for any cause
// specification.
double marginal_positive_rate_enum(const BoundModel& bm, const ParamState& st,
                                   std::span<const double> x_row, std::span<const double> w_row,
                                   int pathogen);

// Posterior cause probabilities for one case at the current parameters.
std::vector<double> individual_etiology(const BoundModel& bm, const ParamState& st, const Dataset& ds,
                                        int i);

// ---- no-covariate nested model (separate code path for nesting checks) ----

double nocov_loglik(const Dataset& ds, const CauseSpec& causes, std::span<const double> pi,
                    std::span<const double> nu, std::span<const double> eta, const RateParams& rates);

}  // namespace nplcm

#include "nplcm/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace nplcm {

namespace {

constexpr double kProbFloor = 1e-12;

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

// Collect distinct covariate rows among the in-scope subjects.
void build_unique_rows(const Matrix& design, const std::vector<int8_t>& y, bool cases_only,
                       BoundFormula& bf) {
    const int n = design.rows;
    bf.row_of.assign(n, -1);
    std::map<std::vector<double>, int> seen;
    for (int i = 0; i < n; ++i) {
        if (cases_only && y[i] == 0) continue;
        std::vector<double> row(design.row(i).begin(), design.row(i).end());
        auto [it, inserted] = seen.emplace(std::move(row), static_cast<int>(bf.unique_raw.size()));
        if (inserted) bf.unique_raw.push_back(it->first);
        bf.row_of[i] = it->second;
    }
}

BoundFormula bind_formula(const FormulaSpec& formula, const Matrix& design,
                          const std::vector<int8_t>& y, bool cases_only) {
    BoundFormula bf;
    int offset = 0;
    std::vector<int> linear_idx;
    for (const auto& t : formula.terms) {
        BoundTerm bt;
        bt.spec = t;
        bt.offset = offset;
        if (t.kind == TermSpec::Kind::Spline) {
            std::vector<double> col;
            for (int i = 0; i < design.rows; ++i)
                if (!cases_only || y[i] == 1) col.push_back(design(i, t.column));
            const Standardized std_col = standardize_continuous(col);
            bt.mean = std_col.mean;
            bt.scale = std_col.scale;
            bt.basis = build_basis(std_col.values, t.df);
            bt.width = t.df;
            BoundFormula::Block blk;
            blk.spline_term = bf.n_spline_terms();
            for (int c = 0; c < t.df; ++c) blk.indices.push_back(offset + c);
            bf.blocks.push_back(std::move(blk));
        } else {
            bt.width = 1;
            linear_idx.push_back(offset);
        }
        offset += bt.width;
        bf.terms.push_back(std::move(bt));
    }
    bf.n_coef = offset;
    if (!linear_idx.empty()) {
        BoundFormula::Block blk;
        blk.spline_term = -1;
        blk.indices = std::move(linear_idx);
        bf.blocks.push_back(std::move(blk));
    }

    build_unique_rows(design, y, cases_only, bf);
    const int u = static_cast<int>(bf.unique_raw.size());
    bf.design = Matrix(u, bf.n_coef);
    for (int r = 0; r < u; ++r) {
        const auto row = bf.design_row(bf.unique_raw[r]);
        std::copy(row.begin(), row.end(), bf.design.row(r).begin());
    }
    return bf;
}

}  // namespace

std::vector<double> BoundFormula::design_row(std::span<const double> raw, int* clamp_count) const {
    std::vector<double> out(n_coef, 0.0);
    for (const auto& t : terms) {
        switch (t.spec.kind) {
            case TermSpec::Kind::Intercept:
                out[t.offset] = 1.0;
                break;
            case TermSpec::Kind::Linear:
                out[t.offset] = raw[t.spec.column];
                break;
            case TermSpec::Kind::Spline: {
                const double z = (raw[t.spec.column] - t.mean) / t.scale;
                if (clamp_count && (z < t.basis.knots.front() || z > t.basis.knots.back()))
                    ++(*clamp_count);
                const auto b = t.basis.centered_row(z);
                std::copy(b.begin(), b.end(), out.begin() + t.offset);
                break;
            }
        }
    }
    return out;
}

BoundModel bind_model(const Dataset& ds, const ModelSpec& spec, const PriorConfig& priors) {
    ds.validate();
    spec.cause_spec.validate(ds.n_pathogens, /*min_causes=*/1);
    spec.validate(ds.x_design.cols, ds.w_design.cols);

    BoundModel bm;
    bm.spec = spec;
    bm.priors = priors;
    bm.n_pathogens = ds.n_pathogens;
    bm.n_causes = spec.cause_spec.n_causes();
    bm.n_subclasses = spec.k_subclasses;
    bm.n_ss = spec.ss_enabled ? ds.ss.cols : 0;
    bm.ss_to_pathogen = ds.ss_to_pathogen;

    auto size_beta = [](std::vector<BetaParams>& v, int n, BetaParams fill) {
        if (v.empty()) v.assign(n, fill);
        if (static_cast<int>(v.size()) == 1 && n > 1) v.assign(n, v[0]);
        require(static_cast<int>(v.size()) == n, "prior vector size mismatch");
    };
    size_beta(bm.priors.tpr_brs, ds.n_pathogens, BetaParams{7.13, 1.32});
    if (bm.n_ss > 0) size_beta(bm.priors.tpr_ss, bm.n_ss, BetaParams{7.59, 58.97});

    bm.x_formula = bind_formula(spec.etiology_formula, ds.x_design, ds.y, /*cases_only=*/true);
    bm.w_formula = bind_formula(spec.subclass_formula, ds.w_design, ds.y, /*cases_only=*/false);
    return bm;
}

double bernoulli_product(std::span<const int8_t> m, std::span<const double> s) {
    require(m.size() == s.size(), "bernoulli_product: length mismatch");
    double p = 1.0;
    for (size_t j = 0; j < m.size(); ++j) p *= m[j] ? s[j] : (1.0 - s[j]);
    return p;
}

double log_bernoulli_product(std::span<const int8_t> m, std::span<const double> s) {
    require(m.size() == s.size(), "bernoulli_product: length mismatch");
    double lp = 0.0;
    for (size_t j = 0; j < m.size(); ++j) {
        const double sj = clamp_prob(s[j]);
        lp += m[j] ? std::log(sj) : std::log1p(-sj);
    }
    return lp;
}

std::vector<double> stick_break(std::span<const double> g) {
    std::vector<double> w(g.size() + 1, 0.0);
    double remaining = 1.0;
    for (size_t k = 0; k < g.size(); ++k) {
        require(g[k] >= 0.0 && g[k] <= 1.0, "stick_break: fraction outside [0,1]");
        w[k] = g[k] * remaining;
        remaining *= (1.0 - g[k]);
    }
    w[g.size()] = remaining;
    return w;
}

std::vector<double> softmax_probs(std::span<const double> phi) {
    for (double p : phi) require(std::isfinite(p), "softmax: non-finite linear predictor");
    double m = kNegInf;
    for (double p : phi) m = std::max(m, p);
    std::vector<double> out(phi.size());
    double s = 0.0;
    for (size_t l = 0; l < phi.size(); ++l) {
        out[l] = std::exp(phi[l] - m);
        s += out[l];
    }
    for (auto& o : out) o /= s;
    return out;
}

std::vector<double> class_positive_rates(const CauseSpec& causes, int cause, const RateParams& rates,
                                         int k) {
    const int J = rates.theta.rows;
    std::vector<double> p(J);
    for (int j = 0; j < J; ++j) p[j] = rates.psi(j, k);
    for (int j : causes.causes.at(cause)) p[j] = rates.theta(j, k);
    return p;
}

namespace {

// alpha_k = mu_{k0} + design . coefs for one stick step.
double stick_alpha(const ParamState& st, std::span<const double> w_design_row, Side side, int k) {
    const auto& comp = (side == Side::Case) ? st.eta[k] : st.nu[k];
    double a = st.mu0(k);
    for (size_t c = 0; c < comp.coefs.size(); ++c) a += w_design_row[c] * comp.coefs[c];
    return a;
}

void log_stick_weights(const BoundModel& bm, const ParamState& st,
                       std::span<const double> w_design_row, Side side, std::span<double> out) {
    const int K = bm.n_subclasses;
    double cum = 0.0;  // sum of log(1 - g(alpha_s)), s < k
    for (int k = 0; k < K - 1; ++k) {
        const double a = stick_alpha(st, w_design_row, side, k);
        require(std::isfinite(a), "subclass weights: non-finite linear predictor");
        out[k] = log_logistic(a) + cum;
        cum += log_logistic(-a);
    }
    out[K - 1] = cum;
}

}  // namespace

std::vector<double> etiology_logits_at(const BoundModel& bm, const ParamState& st,
                                       std::span<const double> x_row) {
    const auto d = bm.x_formula.design_row(x_row);
    std::vector<double> phi(bm.n_causes, 0.0);
    for (int l = 0; l < bm.n_causes; ++l) {
        double s = 0.0;
        for (size_t c = 0; c < d.size(); ++c) s += d[c] * st.etiology[l].coefs[c];
        phi[l] = s;
    }
    return phi;
}

std::vector<double> etiology_probs_at(const BoundModel& bm, const ParamState& st,
                                      std::span<const double> x_row) {
    return softmax_probs(etiology_logits_at(bm, st, x_row));
}

std::vector<double> subclass_weights_at(const BoundModel& bm, const ParamState& st,
                                        std::span<const double> w_row, Side side) {
    const int K = bm.n_subclasses;
    if (K == 1) return {1.0};
    const auto d = bm.w_formula.design_row(w_row);
    std::vector<double> g(K - 1);
    for (int k = 0; k < K - 1; ++k) {
        const double a = stick_alpha(st, d, side, k);
        require(std::isfinite(a), "subclass weights: non-finite linear predictor");
        g[k] = logistic(a);
    }
    return stick_break(g);
}

std::vector<double> etiology_probs_row(const BoundModel& bm, const ParamState& st, int unique_x_row) {
    std::vector<double> phi(bm.n_causes);
    const auto d = bm.x_formula.design.row(unique_x_row);
    for (int l = 0; l < bm.n_causes; ++l) {
        double s = 0.0;
        for (int c = 0; c < bm.x_formula.n_coef; ++c) s += d[c] * st.etiology[l].coefs[c];
        phi[l] = s;
    }
    return softmax_probs(phi);
}

void subclass_log_weights_row(const BoundModel& bm, const ParamState& st, int unique_w_row, Side side,
                              std::span<double> out) {
    if (bm.n_subclasses == 1) {
        out[0] = 0.0;
        return;
    }
    log_stick_weights(bm, st, bm.w_formula.design.row(unique_w_row), side, out);
}

double control_loglik(const BoundModel& bm, const ParamState& st, const Dataset& ds) {
    require(ds.n_controls() > 0, "control_loglik: empty control set");
    const int K = bm.n_subclasses;
    const int J = bm.n_pathogens;

    // cache subclass log-weights per unique covariate row
    const int u = static_cast<int>(bm.w_formula.unique_raw.size());
    Matrix logw(u, K);
    for (int r = 0; r < u; ++r) subclass_log_weights_row(bm, st, r, Side::Control, logw.row(r));

    KahanSum total;
    std::vector<double> terms(K);
    for (int i = 0; i < ds.n_subjects; ++i) {
        if (ds.y[i] != 0) continue;
        const int r = bm.w_formula.row_of[i];
        for (int k = 0; k < K; ++k) {
            double lp = logw(r, k);
            for (int j = 0; j < J; ++j) {
                const double psi = clamp_prob(st.rates.psi(j, k));
                lp += ds.brs(i, j) ? std::log(psi) : std::log1p(-psi);
            }
            terms[k] = lp;
        }
        total.add(log_sum_exp(terms));
    }
    return total.value();
}

namespace {

double ss_loglik_for_cause(const BoundModel& bm, const ParamState& st, const Dataset& ds, int i,
                           int cause) {
    double lp = 0.0;
    for (int j = 0; j < bm.n_ss; ++j) {
        const int v = ds.ss(i, j);
        if (v < 0) continue;  // missing contributes nothing
        const bool causative = bm.spec.cause_spec.contains(cause, bm.ss_to_pathogen[j]);
        if (causative) {
            const double t = clamp_prob(st.rates.theta_ss[j]);
            lp += v ? std::log(t) : std::log1p(-t);
        } else if (v == 1) {
            return kNegInf;  // perfectly specific: no false positives
        }
    }
    return lp;
}

}  // namespace

double case_cell_loglik(const BoundModel& bm, const ParamState& st, const Dataset& ds, int i,
                        int cause) {
    require(ds.y[i] == 1, "case_cell_loglik: subject is not a case");
    const int K = bm.n_subclasses;
    const double ss_lp = ss_loglik_for_cause(bm, st, ds, i, cause);
    if (!std::isfinite(ss_lp)) return kNegInf;

    std::vector<double> logw(K);
    subclass_log_weights_row(bm, st, bm.w_formula.row_of[i], Side::Case, logw);
    std::vector<double> terms(K);
    for (int k = 0; k < K; ++k) {
        const auto p = class_positive_rates(bm.spec.cause_spec, cause, st.rates, k);
        double lp = logw[k];
        for (int j = 0; j < bm.n_pathogens; ++j) {
            const double pj = clamp_prob(p[j]);
            lp += ds.brs(i, j) ? std::log(pj) : std::log1p(-pj);
        }
        terms[k] = lp;
    }
    return log_sum_exp(terms) + ss_lp;
}

double case_loglik(const BoundModel& bm, const ParamState& st, const Dataset& ds) {
    require(ds.n_cases() > 0, "case_loglik: empty case set");
    KahanSum total;
    std::vector<double> terms(bm.n_causes);
    for (int i = 0; i < ds.n_subjects; ++i) {
        if (ds.y[i] != 1) continue;
        const auto pi = etiology_probs_row(bm, st, bm.x_formula.row_of[i]);
        for (int l = 0; l < bm.n_causes; ++l)
            terms[l] = std::log(clamp_prob(pi[l])) + case_cell_loglik(bm, st, ds, i, l);
        total.add(log_sum_exp(terms));
    }
    return total.value();
}

double total_loglik(const BoundModel& bm, const ParamState& st, const Dataset& ds) {
    return case_loglik(bm, st, ds) + control_loglik(bm, st, ds);
}

namespace {

// The printed positive-rate formula needs pathogen j to appear only as the
// singleton cause {j}.
int singleton_cause_index(const CauseSpec& cs, int pathogen) {
    int singleton = -1;
    for (int l = 0; l < cs.n_causes(); ++l) {
        const auto& c = cs.causes[l];
        const bool has = std::find(c.begin(), c.end(), pathogen) != c.end();
        if (!has) continue;
        if (c.size() == 1) {
            singleton = l;
        } else {
            return -1;
        }
    }
    return singleton;
}

}  // namespace

double positive_rate_curve(const BoundModel& bm, const ParamState& st, std::span<const double> x_row,
                           std::span<const double> w_row, int pathogen, Side side) {
    const int K = bm.n_subclasses;
    if (side == Side::Control) {
        const auto nu = subclass_weights_at(bm, st, w_row, Side::Control);
        double rate = 0.0;
        for (int k = 0; k < K; ++k) rate += nu[k] * st.rates.psi(pathogen, k);
        return rate;
    }
    const int l = singleton_cause_index(bm.spec.cause_spec, pathogen);
    if (l < 0)
        throw std::invalid_argument(
            "positive_rate_curve: pathogen is not a singleton cause; use the enumeration-based "
            "marginal (marginal_positive_rate_enum)");
    const auto pi = etiology_probs_at(bm, st, x_row);
    const auto eta = subclass_weights_at(bm, st, w_row, Side::Case);
    double tpr_part = 0.0, fpr_part = 0.0;
    for (int k = 0; k < K; ++k) {
        tpr_part += eta[k] * st.rates.theta(pathogen, k);
        fpr_part += eta[k] * st.rates.psi(pathogen, k);
    }
    return pi[l] * tpr_part + (1.0 - pi[l]) * fpr_part;
}

double marginal_positive_rate_enum(const BoundModel& bm, const ParamState& st,
                                   std::span<const double> x_row, std::span<const double> w_row,
                                   int pathogen) {
    const auto pi = etiology_probs_at(bm, st, x_row);
    const auto eta = subclass_weights_at(bm, st, w_row, Side::Case);
    double rate = 0.0;
    for (int l = 0; l < bm.n_causes; ++l) {
        const bool causative = bm.spec.cause_spec.contains(l, pathogen);
        for (int k = 0; k < bm.n_subclasses; ++k) {
            const double p =
                causative ? st.rates.theta(pathogen, k) : st.rates.psi(pathogen, k);
            rate += pi[l] * eta[k] * p;
        }
    }
    return rate;
}

std::vector<double> individual_etiology(const BoundModel& bm, const ParamState& st, const Dataset& ds,
                                        int i) {
    require(i >= 0 && i < ds.n_subjects, "individual_etiology: case index out of range");
    require(ds.y[i] == 1, "individual_etiology: subject is not a case");
    const auto pi = etiology_probs_row(bm, st, bm.x_formula.row_of[i]);
    std::vector<double> lw(bm.n_causes);
    for (int l = 0; l < bm.n_causes; ++l)
        lw[l] = std::log(clamp_prob(pi[l])) + case_cell_loglik(bm, st, ds, i, l);
    const double lse = log_sum_exp(lw);
    if (!std::isfinite(lse))
        throw std::runtime_error("individual_etiology: data inconsistent with cause spec");
    std::vector<double> out(bm.n_causes);
    for (int l = 0; l < bm.n_causes; ++l) out[l] = std::exp(lw[l] - lse);
    return out;
}

double nocov_loglik(const Dataset& ds, const CauseSpec& causes, std::span<const double> pi,
                    std::span<const double> nu, std::span<const double> eta,
                    const RateParams& rates) {
    const int J = ds.n_pathogens;
    const int K = rates.psi.cols;
    const int L = causes.n_causes();
    require(static_cast<int>(pi.size()) == L, "nocov_loglik: pi size mismatch");
    require(static_cast<int>(nu.size()) == K && static_cast<int>(eta.size()) == K,
            "nocov_loglik: weight size mismatch");

    KahanSum total;
    for (int i = 0; i < ds.n_subjects; ++i) {
        if (ds.y[i] == 0) {
            double cell = 0.0;
            for (int k = 0; k < K; ++k) {
                double prod = nu[k];
                for (int j = 0; j < J; ++j)
                    prod *= ds.brs(i, j) ? rates.psi(j, k) : (1.0 - rates.psi(j, k));
                cell += prod;
            }
            total.add(std::log(cell));
        } else {
            double cell = 0.0;
            for (int l = 0; l < L; ++l) {
                double mix = 0.0;
                for (int k = 0; k < K; ++k) {
                    double prod = eta[k];
                    for (int j = 0; j < J; ++j) {
                        const double p =
                            causes.contains(l, j) ? rates.theta(j, k) : rates.psi(j, k);
                        prod *= ds.brs(i, j) ? p : (1.0 - p);
                    }
                    mix += prod;
                }
                double ss_factor = 1.0;
                for (int jss = 0; jss < ds.ss.cols; ++jss) {
                    const int v = ds.ss(i, jss);
                    if (v < 0) continue;
                    const bool causative = causes.contains(l, ds.ss_to_pathogen[jss]);
                    if (causative)
                        ss_factor *= v ? rates.theta_ss[jss] : (1.0 - rates.theta_ss[jss]);
                    else if (v == 1)
                        ss_factor = 0.0;
                }
                cell += pi[l] * mix * ss_factor;
            }
            total.add(std::log(cell));
        }
    }
    return total.value();
}

}  // namespace nplcm

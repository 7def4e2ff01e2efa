#include "nplcm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "nplcm/rng.hpp"

namespace nplcm {

using nlohmann::json;

namespace {

std::vector<std::string> letter_names(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('A' + i)));
    return out;
}

// Simulation-I temporal shapes on the standardized date scale.
double sim1_wave(double t) { return std::sin(8.0 * M_PI * (t - 0.5) / 7.0); }
double sim1_ramp(double t) { return 4.0 * std::exp(3.0 * t) / (1.0 + std::exp(3.0 * t)) - 0.5; }

std::vector<double> sim1_pi(const TruthConfig& tc, int stratum, double t) {
    const double ind = (stratum == 0) ? 1.0 : 0.0;
    const int L = tc.n_causes();
    std::vector<double> g(L - 1);
    g[0] = logistic(tc.stick_betas[0] * ind + sim1_wave(t));
    g[1] = logistic(tc.stick_betas[1] * ind + sim1_ramp(t));
    for (int l = 2; l < L - 1; ++l) g[l] = logistic(tc.stick_betas[7] * ind);
    return stick_break(g);
}

std::vector<double> sim1_nu(const TruthConfig& tc, int stratum, double t) {
    const double ind = (stratum == 0) ? 1.0 : 0.0;
    const double nu1 = logistic(tc.gamma_nu1 * ind + sim1_ramp(t));
    return {nu1, 1.0 - nu1};
}

std::vector<double> truth_pi(const TruthConfig& tc, int stratum, double t) {
    if (tc.etiology_form == TruthConfig::EtiologyForm::Sim1Sticks) return sim1_pi(tc, stratum, t);
    std::vector<double> out(tc.pi_table.cols);
    for (int l = 0; l < tc.pi_table.cols; ++l) out[l] = tc.pi_table(stratum, l);
    return out;
}

std::vector<double> truth_weights(const TruthConfig& tc, Side side, int stratum, double t) {
    switch (tc.subclass_form) {
        case TruthConfig::SubclassForm::Constant:
            return side == Side::Case ? tc.eta_const : tc.nu_const;
        case TruthConfig::SubclassForm::StratumLogit: {
            const double d = (stratum == 1) ? 1.0 : 0.0;
            const auto& g = (side == Side::Case) ? tc.gamma_eta : tc.gamma_nu;
            const double w1 = logistic(g[0] + g[1] * d);
            return {w1, 1.0 - w1};
        }
        case TruthConfig::SubclassForm::Sim1Curves:
            // cases mirror the control curves in time
            return sim1_nu(tc, stratum, side == Side::Case ? -t : t);
    }
    throw std::logic_error("unreachable");
}

}  // namespace

SimOutput generate(const TruthConfig& tc) {
    require(tc.n_pathogens >= 1, "generate: need pathogens");
    require(tc.n_strata >= 1, "generate: need at least one stratum");
    require(static_cast<int>(tc.n_cases.size()) == tc.n_strata &&
                static_cast<int>(tc.n_controls.size()) == tc.n_strata,
            "generate: stratum size vectors must match n_strata");
    for (int s = 0; s < tc.n_strata; ++s)
        require(tc.n_cases[s] >= 1 && tc.n_controls[s] >= 1, "generate: empty stratum");

    RngStream rng(tc.seed);
    const int J = tc.n_pathogens;
    const int K = tc.k_subclasses;
    const int L = tc.n_causes();
    const int Jss = static_cast<int>(tc.ss_pathogens.size());

    int n_total = 0;
    for (int s = 0; s < tc.n_strata; ++s) n_total += tc.n_cases[s] + tc.n_controls[s];

    std::vector<int> stratum(n_total);
    std::vector<int8_t> y(n_total);
    {
        int i = 0;
        for (int s = 0; s < tc.n_strata; ++s) {
            for (int c = 0; c < tc.n_cases[s]; ++c, ++i) {
                stratum[i] = s;
                y[i] = 1;
            }
            for (int c = 0; c < tc.n_controls[s]; ++c, ++i) {
                stratum[i] = s;
                y[i] = 0;
            }
        }
    }

    std::vector<double> dates(n_total, 0.0), t_std(n_total, 0.0);
    if (tc.date_window_days > 0) {
        for (int i = 0; i < n_total; ++i)
            dates[i] = 1.0 + rng.uniform_int(tc.date_window_days);
        t_std = standardize_continuous(dates).values;
    }

    Dataset ds;
    ds.n_subjects = n_total;
    ds.n_pathogens = J;
    ds.pathogen_names = letter_names(J);
    for (int j : tc.ss_pathogens) {
        ds.ss_names.push_back(ds.pathogen_names[j]);
        ds.ss_to_pathogen.push_back(j);
    }
    ds.y = y;
    ds.brs = BinMatrix(n_total, J);
    ds.ss = BinMatrix(n_total, Jss, -1);

    std::vector<std::string> cov_names;
    for (int s = 2; s <= tc.n_strata; ++s) cov_names.push_back("s" + std::to_string(s));
    if (tc.date_window_days > 0) cov_names.push_back("t");
    const int n_cov = static_cast<int>(cov_names.size());
    ds.x_names = cov_names;
    ds.w_names = cov_names;
    ds.x_design = Matrix(n_total, n_cov);
    ds.w_design = Matrix(n_total, n_cov);
    for (int i = 0; i < n_total; ++i) {
        int c = 0;
        for (int s = 2; s <= tc.n_strata; ++s, ++c) {
            const double v = (stratum[i] == s - 1) ? 1.0 : 0.0;
            ds.w_design(i, c) = v;
            if (y[i] == 1) ds.x_design(i, c) = v;
        }
        if (tc.date_window_days > 0) {
            ds.w_design(i, c) = dates[i];
            if (y[i] == 1) ds.x_design(i, c) = dates[i];
        }
    }

    TruthRecord rec;
    rec.disease_class.assign(n_total, -1);
    rec.subclass.assign(n_total, 0);
    rec.pi0 = Matrix(n_total, L);
    rec.pi_star0.assign(L, 0.0);

    for (int i = 0; i < n_total; ++i) {
        const int s = stratum[i];
        const double t = t_std[i];
        int z;
        if (y[i] == 1) {
            const auto pi = truth_pi(tc, s, t);
            const int cause = rng.categorical(pi);
            rec.disease_class[i] = cause;
            for (int l = 0; l < L; ++l) {
                rec.pi0(i, l) = pi[l];
                rec.pi_star0[l] += pi[l];
            }
            const auto eta = (K == 1) ? std::vector<double>{1.0}
                                      : truth_weights(tc, Side::Case, s, t);
            z = rng.categorical(eta);
            rec.subclass[i] = z;
            for (int j = 0; j < J; ++j) {
                const bool causative =
                    std::find(tc.causes[cause].begin(), tc.causes[cause].end(), j) !=
                    tc.causes[cause].end();
                const double p = causative ? tc.theta(j, z) : tc.psi(j, z);
                ds.brs(i, j) = static_cast<int8_t>(rng.bernoulli(p));
            }
            for (int jss = 0; jss < Jss; ++jss) {
                const int pj = tc.ss_pathogens[jss];
                const bool causative =
                    std::find(tc.causes[cause].begin(), tc.causes[cause].end(), pj) !=
                    tc.causes[cause].end();
                ds.ss(i, jss) =
                    static_cast<int8_t>(causative ? rng.bernoulli(tc.theta_ss[jss]) : 0);
            }
        } else {
            const auto nu = (K == 1) ? std::vector<double>{1.0}
                                     : truth_weights(tc, Side::Control, s, t);
            z = rng.categorical(nu);
            rec.subclass[i] = z;
            for (int j = 0; j < J; ++j)
                ds.brs(i, j) = static_cast<int8_t>(rng.bernoulli(tc.psi(j, z)));
        }
    }
    int n1 = 0;
    for (auto yi : y) n1 += yi;
    for (auto& v : rec.pi_star0) v /= n1;

    rec.pi_stratum0 = Matrix(tc.n_strata, L);
    for (int s = 0; s < tc.n_strata; ++s) {
        const auto pi = truth_pi(tc, s, 0.0);
        for (int l = 0; l < L; ++l) rec.pi_stratum0(s, l) = pi[l];
    }

    ds.validate();
    return {std::move(ds), std::move(rec)};
}

void simulate_measurements(const BoundModel& bm, const ParamState& st, Dataset& ds, RngStream& rng) {
    const int K = bm.n_subclasses;
    std::vector<double> logw(K);
    for (int i = 0; i < ds.n_subjects; ++i) {
        if (ds.y[i] == 1) {
            const auto pi = etiology_probs_row(bm, st, bm.x_formula.row_of[i]);
            const int cause = rng.categorical(pi);
            subclass_log_weights_row(bm, st, bm.w_formula.row_of[i], Side::Case, logw);
            const int z = rng.categorical_log(logw);
            const auto p = class_positive_rates(bm.spec.cause_spec, cause, st.rates, z);
            for (int j = 0; j < bm.n_pathogens; ++j)
                ds.brs(i, j) = static_cast<int8_t>(rng.bernoulli(p[j]));
            for (int jss = 0; jss < bm.n_ss; ++jss) {
                const bool causative = bm.spec.cause_spec.contains(cause, bm.ss_to_pathogen[jss]);
                ds.ss(i, jss) =
                    static_cast<int8_t>(causative ? rng.bernoulli(st.rates.theta_ss[jss]) : 0);
            }
        } else {
            subclass_log_weights_row(bm, st, bm.w_formula.row_of[i], Side::Control, logw);
            const int z = rng.categorical_log(logw);
            for (int j = 0; j < bm.n_pathogens; ++j)
                ds.brs(i, j) = static_cast<int8_t>(rng.bernoulli(st.rates.psi(j, z)));
        }
    }
}

// ---------------------------------------------------------------------------
// study designs

TruthConfig scenario_simulation_I() {
    TruthConfig tc;
    tc.name = "sim1";
    tc.n_pathogens = 9;
    tc.k_subclasses = 2;
    for (int j = 0; j < 9; ++j) tc.causes.push_back({j});
    tc.theta = Matrix(9, 2, 0.95);
    tc.psi = Matrix(9, 2);
    for (int j = 0; j < 9; ++j) {
        tc.psi(j, 0) = 0.5;
        tc.psi(j, 1) = 0.05;
    }
    tc.etiology_form = TruthConfig::EtiologyForm::Sim1Sticks;
    tc.stick_betas.assign(8, 0.1);
    tc.subclass_form = TruthConfig::SubclassForm::Sim1Curves;
    tc.gamma_nu1 = 0.1;
    tc.n_strata = 2;
    tc.n_cases = {500, 500};
    tc.n_controls = {500, 500};
    tc.date_window_days = 300;
    return tc;
}

int simulation_II_grid_size() { return 48; }

TruthConfig scenario_simulation_II(int grid_index) {
    require(grid_index >= 0 && grid_index < 48, "simulation II grid index out of range");
    const int ip = grid_index % 2;
    const int it = (grid_index / 2) % 2;
    const int ib = (grid_index / 4) % 2;
    const int in = (grid_index / 8) % 2;
    const int il = (grid_index / 16) % 3;

    const int L = (il == 0) ? 3 : (il == 1 ? 6 : 9);
    const int n_side = (in == 0) ? 250 : 500;
    const double theta = (it == 0) ? 0.95 : 0.8;
    const double psi2 = (ip == 0) ? 0.05 : 0.15;

    // period-3 coefficient patterns, repeated out to L causes
    const std::array<double, 3> b0 = (ib == 0) ? std::array<double, 3>{0.0, 0.0, 0.0}
                                               : std::array<double, 3>{1.0, 0.0, 1.0};
    const std::array<double, 3> b1 = (ib == 0) ? std::array<double, 3>{-1.5, 0.0, -1.5}
                                               : std::array<double, 3>{-1.5, 1.0, -1.5};

    TruthConfig tc;
    tc.name = "sim2";
    tc.n_pathogens = L;
    tc.k_subclasses = 2;
    for (int j = 0; j < L; ++j) tc.causes.push_back({j});
    tc.theta = Matrix(L, 2, theta);
    tc.psi = Matrix(L, 2);
    for (int j = 0; j < L; ++j) {
        tc.psi(j, 0) = 0.5;
        tc.psi(j, 1) = psi2;
    }

    tc.etiology_form = TruthConfig::EtiologyForm::StratumTable;
    tc.pi_table = Matrix(2, L);
    std::vector<double> phi1(L), phi2(L);
    for (int l = 0; l < L; ++l) {
        phi1[l] = b0[l % 3];
        phi2[l] = b0[l % 3] + b1[l % 3];
    }
    const auto pi1 = softmax_probs(phi1);
    const auto pi2 = softmax_probs(phi2);
    for (int l = 0; l < L; ++l) {
        tc.pi_table(0, l) = pi1[l];
        tc.pi_table(1, l) = pi2[l];
    }

    tc.subclass_form = TruthConfig::SubclassForm::StratumLogit;
    tc.gamma_nu = {-0.5, 1.5};
    tc.gamma_eta = {1.0, -1.5};

    tc.n_strata = 2;
    tc.n_cases = {n_side, n_side};
    tc.n_controls = {n_side, n_side};
    return tc;
}

TruthConfig scenario_no_covariate_validity(int grid_index) {
    TruthConfig tc = scenario_simulation_II(grid_index);
    tc.name = "sim2_novalidity";
    tc.gamma_eta = {0.0, 0.0};  // case subclass weights constant in covariates
    return tc;
}

TruthConfig scenario_seven_sites(bool strong_signal) {
    TruthConfig tc;
    tc.name = strong_signal ? "seven_sites_strong" : "seven_sites_weak";
    tc.n_pathogens = 6;
    tc.k_subclasses = 1;
    for (int j = 0; j < 6; ++j) tc.causes.push_back({j});
    const double th = strong_signal ? 0.99 : 0.55;
    const double ps = strong_signal ? 0.01 : 0.45;
    tc.theta = Matrix(6, 1, th);
    tc.psi = Matrix(6, 1, ps);

    tc.etiology_form = TruthConfig::EtiologyForm::StratumTable;
    const double table[7][6] = {
        {0.5, 0.2, 0.15, 0.05, 0.05, 0.05},  {0.2, 0.5, 0.15, 0.05, 0.05, 0.05},
        {0.2, 0.15, 0.5, 0.05, 0.05, 0.05},  {0.2, 0.15, 0.05, 0.5, 0.05, 0.05},
        {0.2, 0.15, 0.05, 0.05, 0.5, 0.05},  {0.2, 0.15, 0.05, 0.05, 0.05, 0.5},
        {0.05, 0.2, 0.15, 0.5, 0.05, 0.05}};
    tc.pi_table = Matrix(7, 6);
    for (int s = 0; s < 7; ++s)
        for (int l = 0; l < 6; ++l) tc.pi_table(s, l) = table[s][l];

    tc.subclass_form = TruthConfig::SubclassForm::Constant;
    tc.nu_const = {1.0};
    tc.eta_const = {1.0};
    tc.n_strata = 7;
    tc.n_cases.assign(7, 500);
    tc.n_controls.assign(7, 500);
    return tc;
}

TruthConfig scenario_by_name(const std::string& name, int grid_index) {
    if (name == "sim1") return scenario_simulation_I();
    if (name == "sim2") return scenario_simulation_II(grid_index);
    if (name == "sim2_novalidity") return scenario_no_covariate_validity(grid_index);
    if (name == "seven_sites_strong") return scenario_seven_sites(true);
    if (name == "seven_sites_weak") return scenario_seven_sites(false);
    throw std::invalid_argument("unknown scenario: " + name);
}

// ---------------------------------------------------------------------------
// analysis configurations

namespace {

DataSchema schema_for(const TruthConfig& tc) {
    DataSchema sc;
    sc.pathogens = letter_names(tc.n_pathogens);
    for (int j : tc.ss_pathogens) sc.ss_pathogens.push_back(sc.pathogens[j]);
    for (int s = 2; s <= tc.n_strata; ++s) sc.x_columns.push_back("s" + std::to_string(s));
    if (tc.date_window_days > 0) sc.x_columns.push_back("t");
    sc.w_columns = sc.x_columns;
    return sc;
}

void fill_causes(ModelConfig& cfg, const TruthConfig& tc) {
    cfg.model.cause_spec.causes = tc.causes;
    for (const auto& c : tc.causes) {
        std::string lab;
        for (int p : c) lab += (lab.empty() ? "" : "+") + cfg.schema.pathogens[p];
        cfg.model.cause_spec.labels.push_back(c.empty() ? "NoS" : lab);
    }
}

}  // namespace

ModelConfig default_fit_config(const TruthConfig& tc) {
    ModelConfig cfg;
    cfg.schema = schema_for(tc);
    fill_causes(cfg, tc);
    cfg.model.ss_enabled = !tc.ss_pathogens.empty();

    const bool sim1 = tc.name == "sim1";
    const bool seven = tc.name.rfind("seven_sites", 0) == 0;

    FormulaSpec& ef = cfg.model.etiology_formula;
    FormulaSpec& sf = cfg.model.subclass_formula;
    ef.terms.push_back({TermSpec::Kind::Intercept, -1, 0});
    const int n_dummies = tc.n_strata - 1;
    for (int c = 0; c < n_dummies; ++c) ef.terms.push_back({TermSpec::Kind::Linear, c, 0});
    if (tc.date_window_days > 0) ef.terms.push_back({TermSpec::Kind::Spline, n_dummies, 7});

    if (seven) {
        cfg.model.k_subclasses = 1;
        cfg.priors.tpr_brs.assign(1, BetaParams{6.0, 2.0});
    } else {
        cfg.model.k_subclasses = sim1 ? 7 : 3;
        cfg.priors.tpr_brs.assign(1, BetaParams{7.13, 1.32});
        sf.terms.push_back({TermSpec::Kind::Intercept, -1, 0});
        for (int c = 0; c < n_dummies; ++c) sf.terms.push_back({TermSpec::Kind::Linear, c, 0});
        if (tc.date_window_days > 0) sf.terms.push_back({TermSpec::Kind::Spline, n_dummies, 5});
    }
    if (!tc.ss_pathogens.empty()) cfg.priors.tpr_ss.assign(1, BetaParams{7.59, 58.97});
    return cfg;
}

ModelConfig nocov_fit_config(const TruthConfig& tc) {
    ModelConfig cfg = default_fit_config(tc);
    cfg.model.etiology_formula.terms.clear();
    cfg.model.etiology_formula.terms.push_back({TermSpec::Kind::Intercept, -1, 0});
    cfg.model.subclass_formula.terms.clear();
    if (cfg.model.k_subclasses > 1)
        cfg.model.subclass_formula.terms.push_back({TermSpec::Kind::Intercept, -1, 0});
    return cfg;
}

// ---------------------------------------------------------------------------
// serialization

std::string truth_config_to_json(const TruthConfig& tc) {
    json j;
    j["schema_version"] = 1;
    j["name"] = tc.name;
    j["n_pathogens"] = tc.n_pathogens;
    j["k_subclasses"] = tc.k_subclasses;
    j["causes"] = tc.causes;
    j["theta"] = tc.theta.v;
    j["psi"] = tc.psi.v;
    j["ss_pathogens"] = tc.ss_pathogens;
    j["theta_ss"] = tc.theta_ss;
    j["etiology_form"] =
        tc.etiology_form == TruthConfig::EtiologyForm::StratumTable ? "stratum_table" : "sim1_sticks";
    j["pi_table"] = tc.pi_table.v;
    j["pi_table_rows"] = tc.pi_table.rows;
    j["stick_betas"] = tc.stick_betas;
    switch (tc.subclass_form) {
        case TruthConfig::SubclassForm::Constant: j["subclass_form"] = "constant"; break;
        case TruthConfig::SubclassForm::StratumLogit: j["subclass_form"] = "stratum_logit"; break;
        case TruthConfig::SubclassForm::Sim1Curves: j["subclass_form"] = "sim1_curves"; break;
    }
    j["nu_const"] = tc.nu_const;
    j["eta_const"] = tc.eta_const;
    j["gamma_nu"] = tc.gamma_nu;
    j["gamma_eta"] = tc.gamma_eta;
    j["gamma_nu1"] = tc.gamma_nu1;
    j["n_strata"] = tc.n_strata;
    j["n_cases"] = tc.n_cases;
    j["n_controls"] = tc.n_controls;
    j["date_window_days"] = tc.date_window_days;
    j["seed"] = tc.seed;
    return j.dump(2);
}

TruthConfig truth_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    require(j.at("schema_version").get<int>() == 1, "unsupported truth schema version");
    TruthConfig tc;
    tc.name = j.value("name", std::string("custom"));
    tc.n_pathogens = j.at("n_pathogens").get<int>();
    tc.k_subclasses = j.at("k_subclasses").get<int>();
    tc.causes = j.at("causes").get<std::vector<std::vector<int>>>();
    const int L = tc.n_causes();
    tc.theta = Matrix(tc.n_pathogens, tc.k_subclasses);
    tc.theta.v = j.at("theta").get<std::vector<double>>();
    tc.psi = Matrix(tc.n_pathogens, tc.k_subclasses);
    tc.psi.v = j.at("psi").get<std::vector<double>>();
    tc.ss_pathogens = j.value("ss_pathogens", std::vector<int>{});
    tc.theta_ss = j.value("theta_ss", std::vector<double>{});
    tc.etiology_form = j.value("etiology_form", std::string("stratum_table")) == "sim1_sticks"
                           ? TruthConfig::EtiologyForm::Sim1Sticks
                           : TruthConfig::EtiologyForm::StratumTable;
    const auto pv = j.value("pi_table", std::vector<double>{});
    const int prows = j.value("pi_table_rows", 0);
    if (prows > 0) {
        tc.pi_table = Matrix(prows, L);
        tc.pi_table.v = pv;
    }
    tc.stick_betas = j.value("stick_betas", std::vector<double>{});
    const std::string sform = j.value("subclass_form", std::string("constant"));
    tc.subclass_form = sform == "stratum_logit" ? TruthConfig::SubclassForm::StratumLogit
                      : sform == "sim1_curves"  ? TruthConfig::SubclassForm::Sim1Curves
                                                : TruthConfig::SubclassForm::Constant;
    tc.nu_const = j.value("nu_const", std::vector<double>{});
    tc.eta_const = j.value("eta_const", std::vector<double>{});
    if (j.contains("gamma_nu")) {
        tc.gamma_nu[0] = j["gamma_nu"].at(0).get<double>();
        tc.gamma_nu[1] = j["gamma_nu"].at(1).get<double>();
    }
    if (j.contains("gamma_eta")) {
        tc.gamma_eta[0] = j["gamma_eta"].at(0).get<double>();
        tc.gamma_eta[1] = j["gamma_eta"].at(1).get<double>();
    }
    tc.gamma_nu1 = j.value("gamma_nu1", 0.1);
    tc.n_strata = j.at("n_strata").get<int>();
    tc.n_cases = j.at("n_cases").get<std::vector<int>>();
    tc.n_controls = j.at("n_controls").get<std::vector<int>>();
    tc.date_window_days = j.value("date_window_days", 0);
    tc.seed = j.value("seed", 0ULL);
    return tc;
}

void store_truth_record(const TruthRecord& rec, const Dataset& ds, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write truth record: " + csv_path);
    const int L = rec.pi0.cols;
    out << "row,y,disease_class,subclass";
    for (int l = 1; l <= L; ++l) out << ",pi0_" << l;
    out << "\n";
    for (int i = 0; i < ds.n_subjects; ++i) {
        out << i << "," << static_cast<int>(ds.y[i]) << ",";
        if (rec.disease_class[i] >= 0) out << rec.disease_class[i] + 1;
        out << "," << rec.subclass[i] + 1;
        for (int l = 0; l < L; ++l) {
            char buf[40];
            snprintf(buf, sizeof(buf), "%.17g", rec.pi0(i, l));
            out << "," << buf;
        }
        out << "\n";
    }
}

}  // namespace nplcm

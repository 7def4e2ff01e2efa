#include "nplcm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace nplcm {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

int parse_binary(const std::string& s, const std::string& what) {
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw std::invalid_argument("non-binary value '" + s + "' in " + what + " column");
}

double parse_number(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (...) {
        throw std::invalid_argument("cannot parse numeric value '" + s + "' in " + what + " column");
    }
}

std::string format_double(double v) {
    char buf[40];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

TermSpec term_from_json(const json& j, const std::vector<std::string>& columns) {
    TermSpec t;
    const std::string type = j.at("type").get<std::string>();
    if (type == "intercept") {
        t.kind = TermSpec::Kind::Intercept;
        return t;
    }
    const std::string col = j.at("column").get<std::string>();
    const auto it = std::find(columns.begin(), columns.end(), col);
    require(it != columns.end(), "formula column '" + col + "' not declared in schema");
    t.column = static_cast<int>(it - columns.begin());
    if (type == "linear") {
        t.kind = TermSpec::Kind::Linear;
    } else if (type == "spline") {
        t.kind = TermSpec::Kind::Spline;
        t.df = j.at("df").get<int>();
    } else {
        throw std::invalid_argument("unknown formula term type '" + type + "'");
    }
    return t;
}

json term_to_json(const TermSpec& t, const std::vector<std::string>& columns) {
    json j;
    switch (t.kind) {
        case TermSpec::Kind::Intercept:
            j["type"] = "intercept";
            break;
        case TermSpec::Kind::Linear:
            j["type"] = "linear";
            j["column"] = columns.at(t.column);
            break;
        case TermSpec::Kind::Spline:
            j["type"] = "spline";
            j["column"] = columns.at(t.column);
            j["df"] = t.df;
            break;
    }
    return j;
}

}  // namespace

void Dataset::validate() const {
    require(n_pathogens >= 1, "at least one pathogen required");
    require(n_subjects >= 2, "at least two subjects required");
    require(static_cast<int>(y.size()) == n_subjects, "case indicator length mismatch");
    require(brs.rows == n_subjects && brs.cols == n_pathogens, "brs dimension mismatch");
    const int n1 = n_cases();
    if (n1 == 0) throw std::invalid_argument("at least one case required");
    if (n1 == n_subjects) throw std::invalid_argument("at least one control required");

    for (int i = 0; i < n_subjects; ++i)
        for (int j = 0; j < n_pathogens; ++j)
            require(brs(i, j) == 0 || brs(i, j) == 1, "non-binary bronze-standard value");

    require(ss.rows == 0 || ss.rows == n_subjects, "ss dimension mismatch");
    require(static_cast<int>(ss_names.size()) == ss.cols, "ss name count mismatch");
    require(ss_to_pathogen.size() == ss_names.size(), "ss pathogen map mismatch");
    for (int i = 0; i < ss.rows; ++i)
        for (int j = 0; j < ss.cols; ++j) {
            const int v = ss(i, j);
            require(v == 0 || v == 1 || v == -1, "invalid silver-standard value");
            if (y[i] == 0 && v != -1) throw std::invalid_argument("silver-standard on control");
        }

    require(x_design.rows == n_subjects || x_design.rows == 0, "x design dimension mismatch");
    require(w_design.rows == n_subjects || w_design.rows == 0, "w design dimension mismatch");
    for (int i = 0; i < x_design.rows; ++i)
        if (y[i] == 0)
            for (int c = 0; c < x_design.cols; ++c)
                require(x_design(i, c) == 0.0, "control row has nonzero etiology covariate");
}

void CauseSpec::validate(int n_pathogens, int min_causes) const {
    require(n_causes() >= min_causes, "cause list must have at least two entries");
    std::set<std::vector<int>> seen;
    for (const auto& c : causes) {
        for (int j : c) require(j >= 0 && j < n_pathogens, "cause pathogen index out of range");
        std::vector<int> sorted = c;
        std::sort(sorted.begin(), sorted.end());
        require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
                "duplicate pathogen inside a cause");
        require(seen.insert(sorted).second, "duplicate cause subsets");
    }
    require(labels.empty() || labels.size() == causes.size(), "cause label count mismatch");
}

void ModelSpec::validate(int p, int q) const {
    require(k_subclasses >= 1, "k_subclasses must be >= 1");
    auto check_formula = [](const FormulaSpec& f, int width, const char* which) {
        for (const auto& t : f.terms) {
            if (t.kind == TermSpec::Kind::Intercept) continue;
            require(t.column >= 0 && t.column < width,
                    std::string(which) + " formula column index out of range");
            if (t.kind == TermSpec::Kind::Spline)
                require(t.df >= 4, std::string(which) + " spline df must be >= 4");
        }
    };
    check_formula(etiology_formula, p, "etiology");
    check_formula(subclass_formula, q, "subclass");
}

Dataset load_dataset(const std::string& csv_path, const DataSchema& schema) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + csv_path);

    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty dataset file");
    const auto cols = split_csv_line(header);
    std::map<std::string, int> col_index;
    for (size_t c = 0; c < cols.size(); ++c) col_index[cols[c]] = static_cast<int>(c);

    auto find_col = [&](const std::string& name) {
        const auto it = col_index.find(name);
        require(it != col_index.end(), "dataset missing column '" + name + "'");
        return it->second;
    };

    const int y_col = find_col("y");
    std::vector<int> brs_cols, ss_cols, x_cols, w_cols;
    for (const auto& p : schema.pathogens) brs_cols.push_back(find_col("brs_" + p));
    for (const auto& p : schema.ss_pathogens) ss_cols.push_back(find_col("ss_" + p));
    for (const auto& c : schema.x_columns) x_cols.push_back(find_col(c));
    for (const auto& c : schema.w_columns) w_cols.push_back(find_col(c));

    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        require(fields.size() == cols.size(), "ragged CSV row");
        rows.push_back(std::move(fields));
    }

    const int n = static_cast<int>(rows.size());
    const int J = static_cast<int>(schema.pathogens.size());
    const int Jss = static_cast<int>(schema.ss_pathogens.size());

    Dataset ds;
    ds.n_subjects = n;
    ds.n_pathogens = J;
    ds.pathogen_names = schema.pathogens;
    ds.ss_names = schema.ss_pathogens;
    for (const auto& sp : schema.ss_pathogens) {
        const auto it = std::find(schema.pathogens.begin(), schema.pathogens.end(), sp);
        require(it != schema.pathogens.end(), "ss pathogen '" + sp + "' not among pathogens");
        ds.ss_to_pathogen.push_back(static_cast<int>(it - schema.pathogens.begin()));
    }
    ds.brs = BinMatrix(n, J);
    ds.ss = BinMatrix(n, Jss, -1);
    ds.y.resize(n);
    ds.x_design = Matrix(n, static_cast<int>(x_cols.size()));
    ds.w_design = Matrix(n, static_cast<int>(w_cols.size()));
    ds.x_names = schema.x_columns;
    ds.w_names = schema.w_columns;

    for (int i = 0; i < n; ++i) {
        const auto& f = rows[i];
        ds.y[i] = static_cast<int8_t>(parse_binary(f[y_col], "y"));
        for (int j = 0; j < J; ++j) {
            const std::string& v = f[brs_cols[j]];
            if (v.empty())
                throw std::invalid_argument("missing bronze-standard measurement (row " +
                                            std::to_string(i + 2) + ")");
            ds.brs(i, j) = static_cast<int8_t>(parse_binary(v, "brs_" + schema.pathogens[j]));
        }
        for (int j = 0; j < Jss; ++j) {
            const std::string& v = f[ss_cols[j]];
            if (v.empty()) {
                ds.ss(i, j) = -1;
            } else {
                const int b = parse_binary(v, "ss_" + schema.ss_pathogens[j]);
                if (ds.y[i] == 0) throw std::invalid_argument("silver-standard on control");
                ds.ss(i, j) = static_cast<int8_t>(b);
            }
        }
        for (size_t c = 0; c < x_cols.size(); ++c) {
            const double v = parse_number(f[x_cols[c]], schema.x_columns[c]);
            ds.x_design(i, static_cast<int>(c)) = (ds.y[i] == 0) ? 0.0 : v;
        }
        for (size_t c = 0; c < w_cols.size(); ++c)
            ds.w_design(i, static_cast<int>(c)) = parse_number(f[w_cols[c]], schema.w_columns[c]);
    }

    ds.validate();
    return ds;
}

void store_dataset(const Dataset& ds, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + csv_path);

    out << "y";
    for (const auto& p : ds.pathogen_names) out << ",brs_" << p;
    for (const auto& p : ds.ss_names) out << ",ss_" << p;
    for (const auto& c : ds.x_names) out << "," << c;
    for (const auto& c : ds.w_names) out << "," << c;
    out << "\n";

    for (int i = 0; i < ds.n_subjects; ++i) {
        out << static_cast<int>(ds.y[i]);
        for (int j = 0; j < ds.brs.cols; ++j) out << "," << static_cast<int>(ds.brs(i, j));
        for (int j = 0; j < ds.ss.cols; ++j) {
            out << ",";
            if (ds.ss(i, j) >= 0) out << static_cast<int>(ds.ss(i, j));
        }
        for (int c = 0; c < ds.x_design.cols; ++c) out << "," << format_double(ds.x_design(i, c));
        for (int c = 0; c < ds.w_design.cols; ++c) out << "," << format_double(ds.w_design(i, c));
        out << "\n";
    }
}

Standardized standardize_continuous(std::span<const double> column) {
    require(column.size() >= 2, "standardize: need at least 2 values");
    const double n = static_cast<double>(column.size());
    double mean = 0.0;
    for (double v : column) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0)) throw std::invalid_argument("degenerate continuous covariate");
    Standardized out;
    out.mean = mean;
    out.scale = sd;
    out.values.resize(column.size());
    for (size_t i = 0; i < column.size(); ++i) out.values[i] = (column[i] - mean) / sd;
    return out;
}

std::string model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["schema_version"] = 1;
    j["pathogens"] = cfg.schema.pathogens;
    j["ss_pathogens"] = cfg.schema.ss_pathogens;
    j["x_columns"] = cfg.schema.x_columns;
    j["w_columns"] = cfg.schema.w_columns;

    json causes = json::array();
    for (size_t l = 0; l < cfg.model.cause_spec.causes.size(); ++l) {
        json c = json::array();
        for (int p : cfg.model.cause_spec.causes[l]) c.push_back(cfg.schema.pathogens.at(p));
        causes.push_back(c);
    }
    j["causes"] = causes;
    if (!cfg.model.cause_spec.labels.empty()) j["cause_labels"] = cfg.model.cause_spec.labels;

    j["k_subclasses"] = cfg.model.k_subclasses;
    j["ss_enabled"] = cfg.model.ss_enabled;
    json ef = json::array(), sf = json::array();
    for (const auto& t : cfg.model.etiology_formula.terms) ef.push_back(term_to_json(t, cfg.schema.x_columns));
    for (const auto& t : cfg.model.subclass_formula.terms) sf.push_back(term_to_json(t, cfg.schema.w_columns));
    j["etiology_formula"] = ef;
    j["subclass_formula"] = sf;

    json pr;
    auto beta_pair = [](const BetaParams& b) { return json::array({b.a, b.b}); };
    json tpr = json::array();
    for (const auto& b : cfg.priors.tpr_brs) tpr.push_back(beta_pair(b));
    pr["tpr_brs"] = tpr;
    json tprss = json::array();
    for (const auto& b : cfg.priors.tpr_ss) tprss.push_back(beta_pair(b));
    pr["tpr_ss"] = tprss;
    pr["fpr"] = beta_pair(cfg.priors.fpr);
    pr["s0"] = cfg.priors.s0;
    pr["nu_df"] = cfg.priors.nu_df;
    pr["k_beta"] = cfg.priors.k_beta;
    pr["a_tau"] = cfg.priors.a_tau;
    pr["b_tau"] = cfg.priors.b_tau;
    pr["ap_tau"] = cfg.priors.ap_tau;
    pr["bp_tau"] = cfg.priors.bp_tau;
    pr["a_rho_sub"] = cfg.priors.a_rho_sub;
    pr["b_rho_sub"] = cfg.priors.b_rho_sub;
    pr["a_rho_pi"] = cfg.priors.a_rho_pi;
    pr["b_rho_pi"] = cfg.priors.b_rho_pi;
    pr["gamma_sd"] = cfg.priors.gamma_sd;
    j["priors"] = pr;
    return j.dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
    const json j = json::parse(text);
    ModelConfig cfg;
    cfg.schema.pathogens = j.at("pathogens").get<std::vector<std::string>>();
    if (j.contains("ss_pathogens")) cfg.schema.ss_pathogens = j["ss_pathogens"].get<std::vector<std::string>>();
    if (j.contains("x_columns")) cfg.schema.x_columns = j["x_columns"].get<std::vector<std::string>>();
    if (j.contains("w_columns")) cfg.schema.w_columns = j["w_columns"].get<std::vector<std::string>>();

    for (const auto& c : j.at("causes")) {
        std::vector<int> cause;
        for (const auto& name : c) {
            const std::string s = name.get<std::string>();
            const auto it = std::find(cfg.schema.pathogens.begin(), cfg.schema.pathogens.end(), s);
            require(it != cfg.schema.pathogens.end(), "cause pathogen '" + s + "' not declared");
            cause.push_back(static_cast<int>(it - cfg.schema.pathogens.begin()));
        }
        cfg.model.cause_spec.causes.push_back(std::move(cause));
    }
    if (j.contains("cause_labels")) {
        cfg.model.cause_spec.labels = j["cause_labels"].get<std::vector<std::string>>();
    } else {
        for (const auto& c : cfg.model.cause_spec.causes) {
            std::string lab;
            for (int p : c) lab += (lab.empty() ? "" : "+") + cfg.schema.pathogens[p];
            cfg.model.cause_spec.labels.push_back(c.empty() ? "NoS" : lab);
        }
    }

    cfg.model.k_subclasses = j.at("k_subclasses").get<int>();
    cfg.model.ss_enabled = j.value("ss_enabled", !cfg.schema.ss_pathogens.empty());
    for (const auto& t : j.at("etiology_formula"))
        cfg.model.etiology_formula.terms.push_back(term_from_json(t, cfg.schema.x_columns));
    if (j.contains("subclass_formula"))
        for (const auto& t : j["subclass_formula"])
            cfg.model.subclass_formula.terms.push_back(term_from_json(t, cfg.schema.w_columns));

    if (j.contains("priors")) {
        const auto& pr = j["priors"];
        auto get_pair = [](const json& a) { return BetaParams{a.at(0).get<double>(), a.at(1).get<double>()}; };
        if (pr.contains("tpr_brs"))
            for (const auto& a : pr["tpr_brs"]) cfg.priors.tpr_brs.push_back(get_pair(a));
        if (pr.contains("tpr_ss"))
            for (const auto& a : pr["tpr_ss"]) cfg.priors.tpr_ss.push_back(get_pair(a));
        if (pr.contains("fpr")) cfg.priors.fpr = get_pair(pr["fpr"]);
        cfg.priors.s0 = pr.value("s0", cfg.priors.s0);
        cfg.priors.nu_df = pr.value("nu_df", cfg.priors.nu_df);
        cfg.priors.k_beta = pr.value("k_beta", cfg.priors.k_beta);
        cfg.priors.a_tau = pr.value("a_tau", cfg.priors.a_tau);
        cfg.priors.b_tau = pr.value("b_tau", cfg.priors.b_tau);
        cfg.priors.ap_tau = pr.value("ap_tau", cfg.priors.ap_tau);
        cfg.priors.bp_tau = pr.value("bp_tau", cfg.priors.bp_tau);
        cfg.priors.a_rho_sub = pr.value("a_rho_sub", cfg.priors.a_rho_sub);
        cfg.priors.b_rho_sub = pr.value("b_rho_sub", cfg.priors.b_rho_sub);
        cfg.priors.a_rho_pi = pr.value("a_rho_pi", cfg.priors.a_rho_pi);
        cfg.priors.b_rho_pi = pr.value("b_rho_pi", cfg.priors.b_rho_pi);
        cfg.priors.gamma_sd = pr.value("gamma_sd", cfg.priors.gamma_sd);
    }

    cfg.model.cause_spec.validate(static_cast<int>(cfg.schema.pathogens.size()));
    cfg.model.validate(static_cast<int>(cfg.schema.x_columns.size()),
                       static_cast<int>(cfg.schema.w_columns.size()));

    const auto& p = cfg.priors;
    auto positive = [](double v) { return v > 0.0; };
    bool ok = positive(p.fpr.a) && positive(p.fpr.b) && positive(p.s0) && positive(p.nu_df) &&
              positive(p.k_beta) && positive(p.a_tau) && positive(p.b_tau) && positive(p.ap_tau) &&
              positive(p.bp_tau) && positive(p.a_rho_sub) && positive(p.b_rho_sub) &&
              positive(p.a_rho_pi) && positive(p.b_rho_pi) && positive(p.gamma_sd);
    for (const auto& b : p.tpr_brs) ok = ok && positive(b.a) && positive(b.b);
    for (const auto& b : p.tpr_ss) ok = ok && positive(b.a) && positive(b.b);
    require(ok, "prior hyperparameters must be positive");
    return cfg;
}

ModelConfig load_model_config(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw std::runtime_error("cannot open model config: " + json_path);
    std::stringstream buf;
    buf << in.rdbuf();
    return model_config_from_json(buf.str());
}

void store_model_config(const ModelConfig& cfg, const std::string& json_path) {
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot write model config: " + json_path);
    out << model_config_to_json(cfg) << "\n";
}

}  // namespace nplcm

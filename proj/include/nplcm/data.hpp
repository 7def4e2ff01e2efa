#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nplcm/common.hpp"
#include "nplcm/priors.hpp"

namespace nplcm {

// Case-control measurement data plus covariate designs. Immutable after
// construction/validation; shared read-only by the samplers.
struct Dataset {
    int n_subjects = 0;
    int n_pathogens = 0;

    std::vector<std::string> pathogen_names;  // J bronze-standard assays
    std::vector<std::string> ss_names;        // silver-standard subset (may be empty)
    std::vector<int> ss_to_pathogen;          // ss index -> pathogen index

    BinMatrix brs;          // N x J in {0,1}
    BinMatrix ss;           // N x J_ss in {0,1,-1}; control rows all -1
    std::vector<int8_t> y;  // case indicator

    Matrix x_design;  // N x p etiology covariates; control rows forced to zero
    Matrix w_design;  // N x q subclass-weight covariates
    std::vector<std::string> x_names;
    std::vector<std::string> w_names;

    int n_cases() const {
        int c = 0;
        for (auto yi : y) c += yi;
        return c;
    }
    int n_controls() const { return n_subjects - n_cases(); }

    void validate() const;
};

// Ordered cause list; each cause is a set of pathogen indices. The empty set
// is the "Not Specified" cause (no targeted pathogen is causative).
struct CauseSpec {
    std::vector<std::vector<int>> causes;
    std::vector<std::string> labels;

    int n_causes() const { return static_cast<int>(causes.size()); }
    bool is_nos(int l) const { return causes[l].empty(); }
    bool contains(int l, int pathogen) const {
        for (int j : causes[l])
            if (j == pathogen) return true;
        return false;
    }
    // Loaded configurations need L >= 2; internal fits may pass min_causes = 1
    // for degenerate setups.
    void validate(int n_pathogens, int min_causes = 2) const;
};

struct TermSpec {
    enum class Kind { Intercept, Linear, Spline };
    Kind kind = Kind::Linear;
    int column = -1;  // design column; unused for Intercept
    int df = 0;       // spline degrees of freedom
};

struct FormulaSpec {
    std::vector<TermSpec> terms;
    int n_spline_terms() const {
        int s = 0;
        for (const auto& t : terms) s += (t.kind == TermSpec::Kind::Spline);
        return s;
    }
};

struct ModelSpec {
    CauseSpec cause_spec;
    int k_subclasses = 1;
    FormulaSpec etiology_formula;  // columns refer to x_design
    FormulaSpec subclass_formula;  // columns refer to w_design
    bool ss_enabled = false;

    void validate(int p, int q) const;
};

// Column mapping from a CSV file into a Dataset.
struct DataSchema {
    std::vector<std::string> pathogens;
    std::vector<std::string> ss_pathogens;  // subset of `pathogens`
    std::vector<std::string> x_columns;
    std::vector<std::string> w_columns;
};

// Model configuration document: schema + model + priors, as read from JSON.
struct ModelConfig {
    DataSchema schema;
    ModelSpec model;
    PriorConfig priors;
};

Dataset load_dataset(const std::string& csv_path, const DataSchema& schema);
void store_dataset(const Dataset& ds, const std::string& csv_path);

// Center and scale to sample mean 0 / sd 1 (n-1 denominator). Returns the
// transform so prediction grids can be mapped identically.
struct Standardized {
    std::vector<double> values;
    double mean = 0.0;
    double scale = 1.0;
};
Standardized standardize_continuous(std::span<const double> column);

ModelConfig load_model_config(const std::string& json_path);
void store_model_config(const ModelConfig& cfg, const std::string& json_path);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace nplcm

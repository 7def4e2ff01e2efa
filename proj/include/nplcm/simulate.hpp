#pragma once

#include <array>
#include <string>
#include <vector>

#include "nplcm/data.hpp"
#include "nplcm/model.hpp"

namespace nplcm {

// Ground-truth configuration for the data generators. Etiology and subclass
// weight truths come in the functional families used by the study designs;
// arbitrary per-stratum tables cover the discrete-covariate scenarios.
struct TruthConfig {
    std::string name = "custom";
    int n_pathogens = 0;
    int k_subclasses = 1;
    std::vector<std::vector<int>> causes;  // usually singletons

    Matrix theta;  // J x K
    Matrix psi;    // J x K
    std::vector<int> ss_pathogens;
    std::vector<double> theta_ss;

    enum class EtiologyForm { StratumTable, Sim1Sticks };
    EtiologyForm etiology_form = EtiologyForm::StratumTable;
    Matrix pi_table;                  // n_strata x L (StratumTable)
    std::vector<double> stick_betas;  // discrete shifts for the stick logits (Sim1Sticks)

    enum class SubclassForm { Constant, StratumLogit, Sim1Curves };
    SubclassForm subclass_form = SubclassForm::Constant;
    std::vector<double> nu_const;                    // Constant: K weights
    std::vector<double> eta_const;
    std::array<double, 2> gamma_nu{-0.5, 1.5};       // StratumLogit: control break (icpt, stratum-2)
    std::array<double, 2> gamma_eta{1.0, -1.5};      // StratumLogit: case break
    double gamma_nu1 = 0.1;                          // Sim1Curves: discrete shift in nu_1

    int n_strata = 1;
    std::vector<int> n_cases;     // per stratum
    std::vector<int> n_controls;  // per stratum
    int date_window_days = 0;     // > 0 adds a continuous enrollment-date covariate

    uint64_t seed = 0;

    int n_causes() const { return static_cast<int>(causes.size()); }
};

// Per-subject generation record kept out of the fitting path for scoring.
struct TruthRecord {
    std::vector<int> disease_class;  // -1 for controls, 0-based cause for cases
    std::vector<int> subclass;       // 0-based
    Matrix pi0;                      // N x L; zero rows for controls
    std::vector<double> pi_star0;    // true overall PEFs (empirical average over cases)
    Matrix pi_stratum0;              // n_strata x L true PEFs at each stratum (date at center)
};

struct SimOutput {
    Dataset dataset;
    TruthRecord truth;
};

SimOutput generate(const TruthConfig& truth);

// Regenerate the measurement matrices in-place for fixed covariates and
// given parameters (used by the joint-distribution sampler checks and for
// truth-vs-fit consistency tests).
void simulate_measurements(const BoundModel& bm, const ParamState& st, Dataset& ds, RngStream& rng);

// ---- study designs ---------------------------------------------------------

TruthConfig scenario_simulation_I();
TruthConfig scenario_simulation_II(int grid_index);  // 0..47
TruthConfig scenario_seven_sites(bool strong_signal);
TruthConfig scenario_no_covariate_validity(int grid_index);
int simulation_II_grid_size();

// Scenario lookup by CLI name ("sim1", "sim2", "seven_sites_strong", ...).
TruthConfig scenario_by_name(const std::string& name, int grid_index);

// Analysis configurations attached to each design: the regression model the
// study fits, and the covariate-free comparator.
ModelConfig default_fit_config(const TruthConfig& truth);
ModelConfig nocov_fit_config(const TruthConfig& truth);

// ---- serialization ----------------------------------------------------------

std::string truth_config_to_json(const TruthConfig& truth);
TruthConfig truth_config_from_json(const std::string& text);
void store_truth_record(const TruthRecord& rec, const Dataset& ds, const std::string& csv_path);

}  // namespace nplcm

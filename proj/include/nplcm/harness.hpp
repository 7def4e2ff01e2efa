#pragma once

#include <functional>

#include "nplcm/summaries.hpp"

namespace nplcm {

// One replication study: generate -> fit -> score, fanned out over seeded
// replications. Per-replication seeds derive from (seed, rep), so results are
// independent of scheduling and of the number of parallel workers.
struct ReplicateOptions {
    TruthConfig truth;
    ModelConfig fit;
    ChainConfig chains;
    int reps = 30;
    int parallel = 1;
    uint64_t seed = 0;
    bool overall_targets = true;
    bool stratum_targets = false;  // per-stratum PEFs (discrete designs only)
};

struct ReplicateResult {
    std::vector<std::vector<TargetSummary>> per_rep;
    std::vector<MetricRow> metrics;
};

ReplicateResult run_replication_study(const ReplicateOptions& opt,
                                      const std::function<void(int rep)>& on_rep_done = nullptr);

// Fit one simulated dataset and score it against its truth record.
std::vector<TargetSummary> fit_and_score(const SimOutput& sim, const ModelConfig& fit,
                                         const ChainConfig& chains, bool overall_targets,
                                         bool stratum_targets);

}  // namespace nplcm

#pragma once

#include <span>
#include <string>
#include <vector>

#include "nplcm/mcmc.hpp"

namespace nplcm {

struct GelmanRubinResult {
    double rc = 1.0;
    bool flagged = false;
    bool degenerate = false;  // zero pooled variance; rc reported as 1.0
};

// Potential scale reduction factor, basic form without the d.f. correction:
// Rc = sqrt((W + B/n) / W) with W the mean within-chain variance and B/n the
// variance of the chain means. Identical chains give exactly 1.
GelmanRubinResult gelman_rubin(const std::vector<std::vector<double>>& chains);

struct GewekeResult {
    double z = 0.0;
    bool flagged = false;
};

// Z-score comparing the means of the first frac_a and last frac_b of a trace,
// with spectral-density-at-zero variance estimates (Bartlett window,
// bandwidth floor(sqrt(segment length))).
GewekeResult geweke(std::span<const double> trace, double frac_a = 0.10, double frac_b = 0.50);

// Effective sample size across chains (initial positive sequence truncation).
double effective_sample_size(const std::vector<std::vector<double>>& chains);

struct ParamDiagnostics {
    std::string param;
    double rc = 1.0;
    std::vector<double> geweke_z;  // per chain
    double ess = 0.0;
    bool flagged = false;
    bool degenerate = false;
};

// Per-parameter convergence report over a DrawsStore; `filter` is a substring
// match on parameter names (empty matches all).
std::vector<ParamDiagnostics> diagnostics_report(const DrawsStore& draws, const std::string& filter);

std::string diagnostics_to_json(const std::vector<ParamDiagnostics>& report);
std::string diagnostics_to_table(const std::vector<ParamDiagnostics>& report);

}  // namespace nplcm

#pragma once

#include <utility>
#include <vector>

#include "nplcm/common.hpp"
#include "nplcm/rng.hpp"

namespace nplcm {

struct BetaParams {
    double a = 1.0;
    double b = 1.0;
};

// Hyperparameters for every prior in the model. Defaults follow the
// reference configuration used throughout the simulation harness.
struct PriorConfig {
    std::vector<BetaParams> tpr_brs;  // per pathogen; sized when binding
    std::vector<BetaParams> tpr_ss;   // per silver-standard pathogen
    BetaParams fpr{1.0, 1.0};

    // selective-stopping intercept prior: mu* ~ N+(0, 1/tau0), tau0 ~ Gamma(nu/2, nu*s0^2/2)
    double s0 = 10.0;
    double nu_df = 1.0;

    double k_beta = 4.0;  // precision of the first B-spline coefficient

    // smoothing-precision mixture: Gamma(a_tau, b_tau) vs InvPareto(ap_tau, bp_tau)
    double a_tau = 3.0;
    double b_tau = 2.0;
    double ap_tau = 1.5;
    double bp_tau = 400.0;

    // smoothness-indicator hyperpriors, one Beta per block family
    double a_rho_sub = 0.5;
    double b_rho_sub = 1.0;
    double a_rho_pi = 1.0;
    double b_rho_pi = 0.5;

    double gamma_sd = 3.0;  // sd of the N(0, gamma_sd^2) prior on linear coefficients

    double intercept_gamma_shape() const { return 0.5 * nu_df; }
    double intercept_gamma_rate() const { return 0.5 * nu_df * s0 * s0; }
};

// Per-(component, spline-term) smoothing state: precision tau, flexibility
// indicator xi, plus the family-level inclusion probabilities.
struct SmoothingState {
    Matrix tau_pi;  // L x (#etiology spline terms)
    Matrix xi_pi;
    Matrix tau_nu;  // (K-1) x (#subclass spline terms)
    Matrix xi_nu;
    Matrix tau_eta;
    Matrix xi_eta;
    double rho_pi = 0.5;
    double rho_sub = 0.5;
};

// Solve for Beta(a,b) whose CDF hits p_lo at q_lo and p_hi at q_hi.
// Damped Newton on (log a, log b) with a numeric Jacobian; throws if the
// residual quantile error cannot be brought under 1e-8.
std::pair<double, double> beta_from_quantiles(double q_lo, double q_hi,
                                              double p_lo = 0.025, double p_hi = 0.975);

// Half-normal N+(0, 1/tau0) log-density (includes the truncation constant).
double intercept_prior_logpdf(double mu_star, double tau0);

// Gamma(nu/2, nu*s0^2/2) hyperprior log-density for the intercept precision.
double intercept_hyper_logpdf(double tau0, double nu_df, double s0);

// First-order random-walk P-spline prior: increments N(0,1/tau), first
// coefficient N(0,1/k_beta). `penalty` must be the quadratic form b'Kb.
double spline_prior_logpdf(std::span<const double> beta, double tau, double k_beta);

double spline_penalty_quadform(std::span<const double> beta);

double inv_pareto_logpdf(double tau, double a, double b);

// Two-component smoothing-precision mixture, density and sampler.
double smoothing_mixture_logpdf(double tau, int xi, const PriorConfig& pc);
double smoothing_mixture_sample(int xi, const PriorConfig& pc, RngStream& rng);

// log of int tau^((C-1)/2) exp(-tau q/2) p(tau | xi) dtau: the smoothing
// precision integrated out of the random-walk prior, per mixture component.
// Collapsing tau (and xi) out of the coefficient updates is what lets the
// sampler hop between the flexible and constant regimes.
double log_smooth_component_marginal(double q, int n_coef, int xi, const PriorConfig& pc);

// Normalized marginal P-spline prior log-density with (tau, xi) integrated
// out given the inclusion probability rho.
double log_spline_marginal_prior(std::span<const double> beta, double rho, const PriorConfig& pc);

// P(xi = 1 | beta, rho) under the collapsed smoothing mixture.
double smoothness_indicator_prob(double q, int n_coef, double rho, const PriorConfig& pc);

double smoothness_hyper_logpdf(double rho, double a_rho, double b_rho);

// Conjugate Beta update for the smoothness inclusion probability.
BetaParams smoothness_hyper_posterior(double a_rho, double b_rho, int n_flexible, int n_constant);

}  // namespace nplcm

#pragma once

namespace nplcm {

double log_beta_fn(double a, double b);

// Regularized incomplete beta I_x(a,b) = P(X <= x) for X ~ Beta(a,b).
double beta_cdf(double x, double a, double b);

// Inverse of beta_cdf in x for fixed (a,b).
double beta_quantile(double p, double a, double b);

// Regularized lower incomplete gamma P(a,x) = P(X <= x) for X ~ Gamma(a,1).
double gamma_cdf_unit(double a, double x);

double gamma_cdf(double x, double shape, double rate);

// Inverse of gamma_cdf in x for fixed (shape, rate).
double gamma_quantile(double p, double shape, double rate);

double normal_cdf(double z);

double beta_logpdf(double x, double a, double b);
double gamma_logpdf(double x, double shape, double rate);

}  // namespace nplcm

#include "nplcm/priors.hpp"

#include <array>
#include <cmath>

#include "nplcm/special.hpp"

namespace nplcm {

namespace {

std::array<double, 2> quantile_residual(double la, double lb, double q_lo, double q_hi,
                                        double p_lo, double p_hi) {
    const double a = std::exp(la);
    const double b = std::exp(lb);
    return {beta_cdf(q_lo, a, b) - p_lo, beta_cdf(q_hi, a, b) - p_hi};
}

double norm2(const std::array<double, 2>& f) { return std::sqrt(f[0] * f[0] + f[1] * f[1]); }

}  // namespace

std::pair<double, double> beta_from_quantiles(double q_lo, double q_hi, double p_lo, double p_hi) {
    require(q_lo > 0.0 && q_hi < 1.0 && q_lo < q_hi, "beta_from_quantiles: need 0 < q_lo < q_hi < 1");
    require(p_lo > 0.0 && p_hi < 1.0 && p_lo < p_hi, "beta_from_quantiles: need 0 < p_lo < p_hi < 1");

    // moment-matched start: treat (q_lo, q_hi) as a normal-approximation interval
    const double mid = 0.5 * (q_lo + q_hi);
    const double zspan = 3.92 * (p_hi - p_lo) / 0.95;  // rough width scaling
    const double sd = std::max(1e-4, (q_hi - q_lo) / std::max(1.0, zspan));
    double n = mid * (1.0 - mid) / (sd * sd) - 1.0;
    n = std::max(n, 0.5);
    double la = std::log(std::max(mid * n, 1e-3));
    double lb = std::log(std::max((1.0 - mid) * n, 1e-3));

    auto f = quantile_residual(la, lb, q_lo, q_hi, p_lo, p_hi);
    constexpr int kMaxIter = 200;
    constexpr double kTol = 1e-10;  // residual in CDF units; well under the 1e-8 contract
    for (int it = 0; it < kMaxIter; ++it) {
        if (norm2(f) < kTol) break;
        const double h = 1e-6;
        auto fa1 = quantile_residual(la + h, lb, q_lo, q_hi, p_lo, p_hi);
        auto fa0 = quantile_residual(la - h, lb, q_lo, q_hi, p_lo, p_hi);
        auto fb1 = quantile_residual(la, lb + h, q_lo, q_hi, p_lo, p_hi);
        auto fb0 = quantile_residual(la, lb - h, q_lo, q_hi, p_lo, p_hi);
        const double j00 = (fa1[0] - fa0[0]) / (2 * h), j01 = (fb1[0] - fb0[0]) / (2 * h);
        const double j10 = (fa1[1] - fa0[1]) / (2 * h), j11 = (fb1[1] - fb0[1]) / (2 * h);
        const double det = j00 * j11 - j01 * j10;

        double da, db;
        if (std::fabs(det) > 1e-300) {
            da = -(j11 * f[0] - j01 * f[1]) / det;
            db = -(-j10 * f[0] + j00 * f[1]) / det;
        } else {
            da = -f[0];
            db = -f[1];
        }
        // cap the step and damp until the residual shrinks
        const double cap = 2.0;
        const double scale = std::max({1.0, std::fabs(da) / cap, std::fabs(db) / cap});
        da /= scale;
        db /= scale;
        double step = 1.0;
        bool moved = false;
        for (int d = 0; d < 40; ++d) {
            auto fn = quantile_residual(la + step * da, lb + step * db, q_lo, q_hi, p_lo, p_hi);
            if (norm2(fn) < norm2(f)) {
                la += step * da;
                lb += step * db;
                f = fn;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;  // stuck; residual check below decides
    }
    if (norm2(f) > 1e-8) throw std::runtime_error("beta_from_quantiles: no convergence");
    return {std::exp(la), std::exp(lb)};
}

double intercept_prior_logpdf(double mu_star, double tau0) {
    require(tau0 > 0.0, "intercept_prior_logpdf: tau0 must be positive");
    if (mu_star < 0.0) throw std::invalid_argument("intercept_prior_logpdf: mu* must be nonnegative");
    return std::log(2.0) + 0.5 * std::log(tau0 / (2.0 * M_PI)) - 0.5 * tau0 * mu_star * mu_star;
}

double intercept_hyper_logpdf(double tau0, double nu_df, double s0) {
    return gamma_logpdf(tau0, 0.5 * nu_df, 0.5 * nu_df * s0 * s0);
}

double spline_penalty_quadform(std::span<const double> beta) {
    double q = 0.0;
    for (size_t c = 1; c < beta.size(); ++c) {
        const double d = beta[c] - beta[c - 1];
        q += d * d;
    }
    return q;
}

double spline_prior_logpdf(std::span<const double> beta, double tau, double k_beta) {
    require(tau > 0.0, "spline_prior_logpdf: tau must be positive");
    const int c = static_cast<int>(beta.size());
    require(c >= 1, "spline_prior_logpdf: empty coefficient vector");
    const double q = spline_penalty_quadform(beta);
    double lp = 0.5 * std::log(k_beta / (2.0 * M_PI)) - 0.5 * k_beta * beta[0] * beta[0];
    lp += 0.5 * (c - 1) * std::log(tau / (2.0 * M_PI)) - 0.5 * tau * q;
    return lp;
}

double inv_pareto_logpdf(double tau, double a, double b) {
    if (tau <= 0.0 || tau > b) return kNegInf;
    return std::log(a / b) + (a - 1.0) * std::log(tau / b);
}

double smoothing_mixture_logpdf(double tau, int xi, const PriorConfig& pc) {
    if (tau <= 0.0) return kNegInf;
    if (xi == 1) return gamma_logpdf(tau, pc.a_tau, pc.b_tau);
    return inv_pareto_logpdf(tau, pc.ap_tau, pc.bp_tau);
}

double smoothing_mixture_sample(int xi, const PriorConfig& pc, RngStream& rng) {
    if (xi == 1) return rng.gamma(pc.a_tau, pc.b_tau);
    return rng.inv_pareto(pc.ap_tau, pc.bp_tau);
}

double log_smooth_component_marginal(double q, int n_coef, int xi, const PriorConfig& pc) {
    require(q >= 0.0, "smooth marginal: negative quadratic form");
    const double h = 0.5 * (n_coef - 1);
    if (xi == 1) {
        const double s = pc.a_tau + h;
        return pc.a_tau * std::log(pc.b_tau) - std::lgamma(pc.a_tau) + std::lgamma(s) -
               s * std::log(pc.b_tau + 0.5 * q);
    }
    const double s = pc.ap_tau + h;
    const double r = 0.5 * q;
    const double x = r * pc.bp_tau;
    const double head = std::log(pc.ap_tau) - pc.ap_tau * std::log(pc.bp_tau);
    if (x < 1e-280) {
        // r -> 0 limit of the truncated integral: b'^s / s
        return head + s * std::log(pc.bp_tau) - std::log(s);
    }
    return head + std::lgamma(s) - s * std::log(r) + std::log(gamma_cdf_unit(s, x));
}

double smoothness_indicator_prob(double q, int n_coef, double rho, const PriorConfig& pc) {
    const double l1 = std::log(rho) + log_smooth_component_marginal(q, n_coef, 1, pc);
    const double l0 = std::log1p(-rho) + log_smooth_component_marginal(q, n_coef, 0, pc);
    return 1.0 / (1.0 + std::exp(l0 - l1));
}

double log_spline_marginal_prior(std::span<const double> beta, double rho, const PriorConfig& pc) {
    const int c = static_cast<int>(beta.size());
    const double q = spline_penalty_quadform(beta);
    const double l1 = std::log(rho) + log_smooth_component_marginal(q, c, 1, pc);
    const double l0 = std::log1p(-rho) + log_smooth_component_marginal(q, c, 0, pc);
    const double lmix = std::max(l0, l1) + std::log1p(std::exp(-std::fabs(l1 - l0)));
    return 0.5 * std::log(pc.k_beta / (2.0 * M_PI)) - 0.5 * pc.k_beta * beta[0] * beta[0] -
           0.5 * (c - 1) * std::log(2.0 * M_PI) + lmix;
}

double smoothness_hyper_logpdf(double rho, double a_rho, double b_rho) {
    require(rho > 0.0 && rho < 1.0, "smoothness_hyper_logpdf: rho outside (0,1)");
    return beta_logpdf(rho, a_rho, b_rho);
}

BetaParams smoothness_hyper_posterior(double a_rho, double b_rho, int n_flexible, int n_constant) {
    return {a_rho + n_flexible, b_rho + n_constant};
}

}  // namespace nplcm

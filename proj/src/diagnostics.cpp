#include "nplcm/diagnostics.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace nplcm {

namespace {

double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sample_var(std::span<const double> x) {
    const double m = mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / (static_cast<double>(x.size()) - 1.0);
}

// Bartlett-windowed estimate of the spectral density at zero divided by n,
// i.e. the long-run variance of the segment mean.
double spectral_var_of_mean(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    const double m = mean_of(x);
    const int bw = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
    std::vector<double> c(bw, 0.0);
    for (int t = 0; t < bw; ++t) {
        double s = 0.0;
        for (int i = 0; i + t < n; ++i) s += (x[i] - m) * (x[i + t] - m);
        c[t] = s / n;
    }
    if (c[0] <= 0.0) throw std::invalid_argument("geweke: zero variance segment");
    double s0 = c[0];
    for (int t = 1; t < bw; ++t) s0 += 2.0 * (1.0 - static_cast<double>(t) / bw) * c[t];
    if (s0 <= 0.0) s0 = c[0];  // window can go slightly negative; fall back to white noise
    return s0 / n;
}

}  // namespace

GelmanRubinResult gelman_rubin(const std::vector<std::vector<double>>& chains) {
    require(chains.size() >= 2, "gelman_rubin: need at least two chains");
    const size_t n = chains[0].size();
    require(n >= 10, "gelman_rubin: chains too short");
    for (const auto& c : chains) require(c.size() == n, "gelman_rubin: unequal chain lengths");

    const int m = static_cast<int>(chains.size());
    std::vector<double> means(m);
    double w = 0.0;
    for (int j = 0; j < m; ++j) {
        means[j] = mean_of(chains[j]);
        w += sample_var(chains[j]);
    }
    w /= m;

    const double grand = mean_of(means);
    double b_over_n = 0.0;
    for (int j = 0; j < m; ++j) b_over_n += (means[j] - grand) * (means[j] - grand);
    b_over_n /= (m - 1);

    GelmanRubinResult out;
    if (w <= 0.0) {
        if (b_over_n <= 0.0) {
            out.rc = 1.0;
            out.degenerate = true;  // all chains constant and equal
            return out;
        }
        throw std::invalid_argument("gelman_rubin: zero within-chain variance");
    }
    out.rc = std::sqrt((w + b_over_n) / w);
    out.flagged = out.rc > 1.1;
    return out;
}

GewekeResult geweke(std::span<const double> trace, double frac_a, double frac_b) {
    require(trace.size() >= 100, "geweke: trace too short");
    require(frac_a > 0.0 && frac_b > 0.0, "geweke: fractions must be positive");
    require(frac_a + frac_b <= 1.0, "geweke: fractions overlap");

    const int n = static_cast<int>(trace.size());
    const int na = static_cast<int>(std::floor(frac_a * n));
    const int nb = static_cast<int>(std::floor(frac_b * n));
    require(na >= 2 && nb >= 2, "geweke: empty segment");
    const std::span<const double> a = trace.subspan(0, na);
    const std::span<const double> b = trace.subspan(trace.size() - nb, nb);

    const double va = spectral_var_of_mean(a);
    const double vb = spectral_var_of_mean(b);
    GewekeResult out;
    out.z = (mean_of(a) - mean_of(b)) / std::sqrt(va + vb);
    out.flagged = std::fabs(out.z) > 2.0;
    return out;
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
    double total = 0.0;
    for (const auto& x : chains) {
        const int n = static_cast<int>(x.size());
        if (n < 4) {
            total += n;
            continue;
        }
        const double m = mean_of(x);
        const double c0 = sample_var(x);
        if (c0 <= 0.0) {
            total += n;
            continue;
        }
        // Geyer initial positive sequence on autocorrelation pairs
        double rho_sum = 0.0;
        for (int t = 1; t + 1 < n; t += 2) {
            double c1 = 0.0, c2 = 0.0;
            for (int i = 0; i + t < n; ++i) c1 += (x[i] - m) * (x[i + t] - m);
            for (int i = 0; i + t + 1 < n; ++i) c2 += (x[i] - m) * (x[i + t + 1] - m);
            const double pair = (c1 + c2) / (n * c0);
            if (pair <= 0.0) break;
            rho_sum += pair;
        }
        total += n / (1.0 + 2.0 * rho_sum);
    }
    return total;
}

std::vector<ParamDiagnostics> diagnostics_report(const DrawsStore& draws, const std::string& filter) {
    std::vector<ParamDiagnostics> report;
    for (int p = 0; p < draws.n_params(); ++p) {
        const std::string& name = draws.names[p];
        if (!filter.empty() && name.find(filter) == std::string::npos) continue;

        ParamDiagnostics d;
        d.param = name;
        std::vector<std::vector<double>> traces;
        for (int c = 0; c < draws.n_chains(); ++c) traces.push_back(draws.chain_column(c, p));

        double pooled_var = 0.0;
        for (const auto& t : traces) pooled_var += sample_var(t);
        if (pooled_var <= 0.0) {
            d.degenerate = true;
            d.rc = 1.0;
            d.ess = static_cast<double>(draws.n_draws()) * draws.n_chains();
            d.geweke_z.assign(draws.n_chains(), 0.0);
            report.push_back(std::move(d));
            continue;
        }

        if (draws.n_chains() >= 2) {
            const auto gr = gelman_rubin(traces);
            d.rc = gr.rc;
            d.flagged = gr.flagged;
        } else {
            d.rc = std::numeric_limits<double>::quiet_NaN();
        }
        for (const auto& t : traces) {
            if (static_cast<int>(t.size()) >= 100 && sample_var(t) > 0.0) {
                try {
                    const auto gw = geweke(t);
                    d.geweke_z.push_back(gw.z);
                    d.flagged = d.flagged || gw.flagged;
                } catch (const std::invalid_argument&) {
                    d.geweke_z.push_back(0.0);  // constant segment inside the trace
                }
            } else {
                d.geweke_z.push_back(0.0);
            }
        }
        d.ess = effective_sample_size(traces);
        report.push_back(std::move(d));
    }
    return report;
}

std::string diagnostics_to_json(const std::vector<ParamDiagnostics>& report) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& d : report) {
        nlohmann::json row;
        row["param"] = d.param;
        if (std::isnan(d.rc))
            row["rc"] = nullptr;
        else
            row["rc"] = d.rc;
        row["geweke_z"] = d.geweke_z;
        row["ess"] = d.ess;
        row["flagged"] = d.flagged;
        if (d.degenerate) row["degenerate"] = true;
        j.push_back(row);
    }
    return j.dump(2);
}

std::string diagnostics_to_table(const std::vector<ParamDiagnostics>& report) {
    std::ostringstream os;
    os << "param                          rc      ess     flagged  geweke_z\n";
    for (const auto& d : report) {
        char buf[160];
        snprintf(buf, sizeof(buf), "%-28s %7.4f %8.1f %-8s", d.param.c_str(), d.rc, d.ess,
                 d.flagged ? "YES" : "-");
        os << buf;
        for (double z : d.geweke_z) {
            snprintf(buf, sizeof(buf), " %6.2f", z);
            os << buf;
        }
        if (d.degenerate) os << "  (degenerate trace)";
        os << "\n";
    }
    return os.str();
}

}  // namespace nplcm

#include "nplcm/splines.hpp"

#include <algorithm>
#include <cmath>

namespace nplcm {

namespace {

// Cox-de Boor evaluation of all C cubic basis functions at x given the open
// knot vector (boundary knots repeated degree+1 times).
std::vector<double> cubic_basis_row(const std::vector<double>& interior, double x) {
    constexpr int kDegree = 3;
    const int m = static_cast<int>(interior.size()) - 2;  // interior knot count
    const int n_basis = m + 4;
    const double lo = interior.front();
    const double hi = interior.back();

    std::vector<double> t;  // extended knot vector, size n_basis + degree + 1
    t.reserve(n_basis + kDegree + 1);
    for (int i = 0; i < kDegree + 1; ++i) t.push_back(lo);
    for (int i = 1; i <= m; ++i) t.push_back(interior[i]);
    for (int i = 0; i < kDegree + 1; ++i) t.push_back(hi);

    double xc = std::clamp(x, lo, hi);

    // locate the knot span [t_mu, t_{mu+1}) containing xc
    int mu = kDegree;
    const int last_span = n_basis - 1;
    while (mu < last_span && xc >= t[mu + 1]) ++mu;

    // triangular recurrence for the degree-3 nonzero values on the span
    std::vector<double> nvals(kDegree + 1, 0.0);
    nvals[0] = 1.0;
    for (int d = 1; d <= kDegree; ++d) {
        double saved = 0.0;
        for (int r = 0; r < d; ++r) {
            const double left = t[mu - d + 1 + r + d] - t[mu - d + 1 + r];
            const double num = nvals[r];
            double term = 0.0;
            if (left > 0.0) term = num / left;
            nvals[r] = saved + (t[mu + 1 + r] - xc) * term;
            saved = (xc - t[mu - d + 1 + r]) * term;
        }
        nvals[d] = saved;
    }

    std::vector<double> row(n_basis, 0.0);
    for (int r = 0; r <= kDegree; ++r) {
        const int idx = mu - kDegree + r;
        if (idx >= 0 && idx < n_basis) row[idx] = nvals[r];
    }
    return row;
}

}  // namespace

std::vector<double> SplineBasis::raw_row(double x) const { return cubic_basis_row(knots, x); }

std::vector<double> SplineBasis::centered_row(double x) const {
    std::vector<double> row = raw_row(x);
    for (int c = 0; c < n_basis; ++c) row[c] -= col_means[c];
    return row;
}

SplineBasis build_basis(std::span<const double> x, int df) {
    require(df >= 4, "build_basis: cubic basis needs at least 4 degrees of freedom");
    require(x.size() >= 2, "build_basis: need at least 2 points");
    const auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *mn_it, hi = *mx_it;
    require(hi > lo, "build_basis: degenerate x range");

    const int m = df - 4;
    SplineBasis sb;
    sb.n_basis = df;
    sb.knots.resize(m + 2);
    for (int i = 0; i <= m + 1; ++i) sb.knots[i] = lo + (hi - lo) * i / (m + 1);
    sb.knots.front() = lo;
    sb.knots.back() = hi;

    const int n = static_cast<int>(x.size());
    Matrix raw(n, df);
    for (int i = 0; i < n; ++i) {
        const auto row = cubic_basis_row(sb.knots, x[i]);
        std::copy(row.begin(), row.end(), raw.row(i).begin());
    }
    sb.col_means.assign(df, 0.0);
    for (int c = 0; c < df; ++c) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += raw(i, c);
        sb.col_means[c] = s / n;
    }
    sb.basis = Matrix(n, df);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < df; ++c) sb.basis(i, c) = raw(i, c) - sb.col_means[c];

    auto [d1, pen] = difference_penalty(df);
    sb.delta1 = std::move(d1);
    sb.penalty = std::move(pen);
    return sb;
}

SplineBasis basis_from_knots(std::vector<double> knots, std::vector<double> col_means) {
    require(knots.size() >= 2, "basis_from_knots: need at least boundary knots");
    SplineBasis sb;
    sb.n_basis = static_cast<int>(knots.size()) + 2;
    require(static_cast<int>(col_means.size()) == sb.n_basis, "basis_from_knots: centering size mismatch");
    sb.knots = std::move(knots);
    sb.col_means = std::move(col_means);
    auto [d1, pen] = difference_penalty(sb.n_basis);
    sb.delta1 = std::move(d1);
    sb.penalty = std::move(pen);
    return sb;
}

std::pair<Matrix, Matrix> difference_penalty(int n_coef) {
    require(n_coef >= 2, "difference_penalty: need at least 2 coefficients");
    Matrix d1(n_coef - 1, n_coef);
    for (int r = 0; r < n_coef - 1; ++r) {
        d1(r, r) = -1.0;
        d1(r, r + 1) = 1.0;
    }
    Matrix pen(n_coef, n_coef);
    for (int i = 0; i < n_coef; ++i)
        for (int j = 0; j < n_coef; ++j) {
            double s = 0.0;
            for (int r = 0; r < n_coef - 1; ++r) s += d1(r, i) * d1(r, j);
            pen(i, j) = s;
        }
    return {std::move(d1), std::move(pen)};
}

std::vector<double> evaluate_additive(const std::vector<const SplineBasis*>& bases,
                                      const std::vector<std::span<const double>>& linear_columns,
                                      std::span<const double> coefs) {
    size_t n = 0;
    if (!bases.empty()) n = static_cast<size_t>(bases.front()->basis.rows);
    if (n == 0 && !linear_columns.empty()) n = linear_columns.front().size();
    require(n > 0, "evaluate_additive: no rows");

    size_t need = 0;
    for (const auto* b : bases) need += b->n_basis;
    need += linear_columns.size();
    require(coefs.size() == need, "evaluate_additive: coefficient count mismatch");

    std::vector<double> out(n, 0.0);
    size_t off = 0;
    for (const auto* b : bases) {
        require(static_cast<size_t>(b->basis.rows) == n, "evaluate_additive: basis row mismatch");
        for (size_t i = 0; i < n; ++i) {
            double s = 0.0;
            const auto row = b->basis.row(static_cast<int>(i));
            for (int c = 0; c < b->n_basis; ++c) s += row[c] * coefs[off + c];
            out[i] += s;
        }
        off += b->n_basis;
    }
    for (const auto& col : linear_columns) {
        require(col.size() == n, "evaluate_additive: linear column length mismatch");
        for (size_t i = 0; i < n; ++i) out[i] += col[i] * coefs[off];
        ++off;
    }
    return out;
}

}  // namespace nplcm

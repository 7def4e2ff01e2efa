#include <doctest.h>

#include <cmath>

#include "nplcm/model.hpp"
#include "test_support.hpp"
#include "toy_models.hpp"

using namespace nplcm;

namespace {

std::vector<int8_t> to_i8(const std::vector<int>& m) {
    return std::vector<int8_t>(m.begin(), m.end());
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("bernoulli product") {
    const std::vector<int8_t> m1 = {1, 0};
    const std::vector<double> s1 = {0.9, 0.2};
    CHECK(bernoulli_product(m1, s1) == doctest::Approx(0.72).epsilon(1e-12));

    const std::vector<int8_t> m2 = {0, 0, 0};
    const std::vector<double> s2 = {0.5, 0.5, 0.5};
    CHECK(bernoulli_product(m2, s2) == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(log_bernoulli_product(m2, s2) == doctest::Approx(std::log(0.125)).epsilon(1e-12));

    double total = 0.0;
    const std::vector<double> s3 = {0.3, 0.6, 0.9};
    for (const auto& m : oracle::all_patterns(3)) total += bernoulli_product(to_i8(m), s3);
    CHECK(std::fabs(total - 1.0) < 1e-12);

    const std::vector<double> wrong = {0.9};
    CHECK_THROWS(bernoulli_product(m1, wrong));
}

TEST_CASE("stick break") {
    const std::vector<double> g1 = {0.5, 0.5};
    const auto w1 = stick_break(g1);
    CHECK(w1[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w1[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(w1[2] == doctest::Approx(0.25).epsilon(1e-15));

    const std::vector<double> g2 = {1.0, 0.77};
    const auto w2 = stick_break(g2);
    CHECK(w2[0] == 1.0);
    CHECK(w2[1] == 0.0);
    CHECK(w2[2] == 0.0);

    const std::vector<double> g3(3, logistic(0.0));
    const auto w3 = stick_break(g3);
    CHECK(w3[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w3[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(w3[2] == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(w3[3] == doctest::Approx(0.125).epsilon(1e-15));

    const std::vector<double> bad = {0.5, 1.5};
    CHECK_THROWS(stick_break(bad));
}

TEST_CASE("simplex closure properties (random inputs)") {
    RngStream rng(2024);
    for (int rep = 0; rep < 1000; ++rep) {
        const int k = 1 + rng.uniform_int(6);
        std::vector<double> g(k);
        for (auto& gi : g) gi = rng.uniform();
        const auto w = stick_break(g);
        double s = 0.0;
        for (double wi : w) {
            CHECK(wi >= 0.0);
            s += wi;
        }
        CHECK(std::fabs(s - 1.0) < 1e-12);

        std::vector<double> phi(1 + rng.uniform_int(6));
        for (auto& p : phi) p = rng.normal(0.0, 5.0);
        const auto pi = softmax_probs(phi);
        double sp = 0.0;
        for (double v : pi) {
            CHECK(v >= 0.0);
            sp += v;
        }
        CHECK(std::fabs(sp - 1.0) < 1e-12);
    }
}

TEST_CASE("class positive rates") {
    CauseSpec cs;
    cs.causes = {{1}, {}, {0, 1}};
    RateParams r;
    r.theta = Matrix(3, 1);
    r.psi = Matrix(3, 1);
    const double th[3] = {0.9, 0.8, 0.7}, ps[3] = {0.5, 0.05, 0.5};
    for (int j = 0; j < 3; ++j) {
        r.theta(j, 0) = th[j];
        r.psi(j, 0) = ps[j];
    }
    const auto single = class_positive_rates(cs, 0, r, 0);
    CHECK(single == std::vector<double>{0.5, 0.8, 0.5});
    const auto nos = class_positive_rates(cs, 1, r, 0);
    CHECK(nos == std::vector<double>{0.5, 0.05, 0.5});
    const auto multi = class_positive_rates(cs, 2, r, 0);
    CHECK(multi == std::vector<double>{0.9, 0.8, 0.5});
}

TEST_CASE("etiology softmax") {
    auto t = toy::make_intercept_only(2, 2, 2, toy::singleton_causes(2), 1, 5);
    SUBCASE("zeros give the uniform distribution") {
        t.st.etiology[0].coefs[0] = 0.0;
        t.st.etiology[1].coefs[0] = 0.0;
        const auto pi = etiology_probs_at(t.bm, t.st, std::vector<double>{});
        CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-14));
    }
    SUBCASE("shift invariance") {
        t.st.etiology[0].coefs[0] = 1.3;
        t.st.etiology[1].coefs[0] = -0.4;
        const auto a = etiology_probs_at(t.bm, t.st, std::vector<double>{});
        t.st.etiology[0].coefs[0] += 17.0;
        t.st.etiology[1].coefs[0] += 17.0;
        const auto b = etiology_probs_at(t.bm, t.st, std::vector<double>{});
        CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-12));
    }
    SUBCASE("log-2 example") {
        auto t3 = toy::make_intercept_only(2, 2, 3, toy::singleton_causes(3), 1, 6);
        t3.st.etiology[0].coefs[0] = std::log(2.0);
        t3.st.etiology[1].coefs[0] = 0.0;
        t3.st.etiology[2].coefs[0] = 0.0;
        const auto pi = etiology_probs_at(t3.bm, t3.st, std::vector<double>{});
        CHECK(pi[0] == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(pi[1] == doctest::Approx(0.25).epsilon(1e-14));
    }
}

TEST_CASE("subclass weights") {
    SUBCASE("K = 1 is the unit weight") {
        auto t = toy::make_intercept_only(2, 2, 2, toy::singleton_causes(2), 1, 7);
        const auto w = subclass_weights_at(t.bm, t.st, std::vector<double>{}, Side::Control);
        CHECK(w == std::vector<double>{1.0});
    }
    SUBCASE("all-zero coefficients give (0.5, 0.5)") {
        auto t = toy::make_intercept_only(2, 2, 2, toy::singleton_causes(2), 2, 8);
        t.st.mu_star[0] = 0.0;
        t.st.nu[0].coefs[0] = 0.0;
        const auto w = subclass_weights_at(t.bm, t.st, std::vector<double>{}, Side::Control);
        CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-14));
    }
    SUBCASE("large first intercept stops the stick") {
        auto t = toy::make_intercept_only(2, 2, 2, toy::singleton_causes(2), 3, 9);
        t.st.mu_star = {10.0, 0.0};
        t.st.nu[0].coefs[0] = 0.0;
        t.st.nu[1].coefs[0] = 0.0;
        const auto w = subclass_weights_at(t.bm, t.st, std::vector<double>{}, Side::Control);
        CHECK(w[0] == doctest::Approx(logistic(10.0)).epsilon(1e-12));
        CHECK(w[1] + w[2] < 5e-5);
    }
}

TEST_CASE("control likelihood worked example") {
    auto t = toy::make_intercept_only(1, 1, 2, toy::singleton_causes(2), 2, 11);
    toy::set_weights(t, {0.6, 0.4}, Side::Control);
    for (int j = 0; j < 2; ++j) {
        t.st.rates.psi(j, 0) = 0.5;
        t.st.rates.psi(j, 1) = 0.1;
    }
    t.ds.brs(1, 0) = 0;
    t.ds.brs(1, 1) = 0;  // the lone control observes (0,0)
    const double cell = std::exp(control_loglik(t.bm, t.st, t.ds));
    CHECK(cell == doctest::Approx(0.6 * 0.25 + 0.4 * 0.81).epsilon(1e-12));
}

TEST_CASE("control model normalizes and nests the single-subclass case") {
    for (int j_count : {1, 2, 3}) {
        for (int k_count : {1, 2}) {
            auto causes = toy::singleton_causes(j_count);
            if (static_cast<int>(causes.size()) < 2) causes.push_back({});  // pad with NoS
            auto t = toy::make_intercept_only(1, 1, j_count, causes, k_count,
                                              13 + j_count + 10 * k_count);
            if (k_count == 2) toy::set_weights(t, {0.35, 0.65}, Side::Control);
            RngStream rng(77);
            for (int j = 0; j < j_count; ++j)
                for (int k = 0; k < k_count; ++k) t.st.rates.psi(j, k) = rng.uniform(0.05, 0.95);

            double total = 0.0;
            for (const auto& m : oracle::all_patterns(j_count)) {
                for (int j = 0; j < j_count; ++j) t.ds.brs(1, j) = static_cast<int8_t>(m[j]);
                total += std::exp(control_loglik(t.bm, t.st, t.ds));
            }
            CHECK(std::fabs(total - 1.0) < 1e-10);

            if (k_count == 1) {
                for (int j = 0; j < j_count; ++j) t.ds.brs(1, j) = (j % 2);
                std::vector<int8_t> m(j_count);
                std::vector<double> psi_col(j_count);
                for (int j = 0; j < j_count; ++j) {
                    m[j] = t.ds.brs(1, j);
                    psi_col[j] = t.st.rates.psi(j, 0);
                }
                CHECK(control_loglik(t.bm, t.st, t.ds) ==
                      doctest::Approx(std::log(bernoulli_product(m, psi_col))).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("case cell likelihood with silver standard") {
    auto t = toy::make_intercept_only(2, 1, 2, toy::singleton_causes(2), 1, 17, {0});
    t.st.rates.theta_ss = {0.15};

    SUBCASE("positive SS off the causative set kills the class") {
        t.ds.ss(0, 0) = 1;
        CHECK(case_cell_loglik(t.bm, t.st, t.ds, 0, 1) == -std::numeric_limits<double>::infinity());
        CHECK(std::isfinite(case_cell_loglik(t.bm, t.st, t.ds, 0, 0)));
    }
    SUBCASE("K=1 without SS reduces to the product Bernoulli") {
        t.ds.ss(0, 0) = -1;
        const auto p = class_positive_rates(t.bm.spec.cause_spec, 1, t.st.rates, 0);
        std::vector<int8_t> m = {t.ds.brs(0, 0), t.ds.brs(0, 1)};
        CHECK(case_cell_loglik(t.bm, t.st, t.ds, 0, 1) ==
              doctest::Approx(log_bernoulli_product(m, p)).epsilon(1e-12));
    }
    SUBCASE("missing SS contributes nothing") {
        t.ds.ss(0, 0) = -1;
        const double without = case_cell_loglik(t.bm, t.st, t.ds, 0, 0);
        auto t2 = toy::make_intercept_only(2, 1, 2, toy::singleton_causes(2), 1, 17);
        t2.st = t.st;
        t2.st.rates.theta_ss.clear();
        CHECK(case_cell_loglik(t2.bm, t2.st, t2.ds, 0, 0) == doctest::Approx(without).epsilon(1e-12));
    }
}

TEST_CASE("case marginal normalizes over patterns") {
    auto t = toy::make_intercept_only(1, 1, 2, toy::singleton_causes(2), 2, 19);
    toy::set_etiology(t, {0.3, 0.7});
    toy::set_weights(t, {0.45, 0.55}, Side::Case);
    RngStream rng(5);
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
            t.st.rates.theta(j, k) = rng.uniform(0.5, 0.99);
            t.st.rates.psi(j, k) = rng.uniform(0.01, 0.5);
        }
    double total = 0.0;
    for (const auto& m : oracle::all_patterns(2)) {
        for (int j = 0; j < 2; ++j) t.ds.brs(0, j) = static_cast<int8_t>(m[j]);
        const auto pi = etiology_probs_row(t.bm, t.st, t.bm.x_formula.row_of[0]);
        double cell = 0.0;
        for (int l = 0; l < 2; ++l)
            cell += pi[l] * std::exp(case_cell_loglik(t.bm, t.st, t.ds, 0, l));
        total += cell;
    }
    CHECK(std::fabs(total - 1.0) < 1e-10);
}

TEST_CASE("enumeration oracle equivalence over the toy matrix") {
    RngStream rng(4242);
    for (int j_count : {1, 2, 3}) {
        for (int k_count : {1, 2}) {
            for (int l_count : {2, 3}) {
                // cause variants: singletons over min(J,L); pad with NoS and a pair
                std::vector<std::vector<int>> causes;
                for (int l = 0; l < l_count; ++l) {
                    if (l < j_count) {
                        causes.push_back({l});
                    } else if (causes.empty() || !causes.back().empty()) {
                        causes.push_back({});  // NoS
                    } else if (j_count >= 2) {
                        causes.push_back({0, 1});
                    } else {
                        causes.push_back({0});
                    }
                }
                // drop duplicate subsets (possible when J=1)
                std::vector<std::vector<int>> uniq;
                for (auto& c : causes)
                    if (std::find(uniq.begin(), uniq.end(), c) == uniq.end()) uniq.push_back(c);
                if (static_cast<int>(uniq.size()) < 2) continue;

                auto t = toy::make_intercept_only(1, 1, j_count, uniq, k_count,
                                                  900 + j_count + 10 * k_count + 100 * l_count);
                const int L = static_cast<int>(uniq.size());
                std::vector<double> pi(L);
                double s = 0.0;
                for (auto& p : pi) {
                    p = 0.2 + rng.uniform();
                    s += p;
                }
                for (auto& p : pi) p /= s;
                toy::set_etiology(t, pi);
                std::vector<double> eta = {1.0}, nu = {1.0};
                if (k_count == 2) {
                    eta = {0.37, 0.63};
                    nu = {0.81, 0.19};
                    toy::set_weights(t, eta, Side::Case);
                    toy::set_weights(t, nu, Side::Control);
                }
                for (int j = 0; j < j_count; ++j)
                    for (int k = 0; k < k_count; ++k) {
                        t.st.rates.theta(j, k) = rng.uniform(0.55, 0.98);
                        t.st.rates.psi(j, k) = rng.uniform(0.02, 0.45);
                    }

                double case_total = 0.0, ctrl_total = 0.0;
                for (const auto& m : oracle::all_patterns(j_count)) {
                    for (int j = 0; j < j_count; ++j) t.ds.brs(0, j) = static_cast<int8_t>(m[j]);
                    for (int j = 0; j < j_count; ++j) t.ds.brs(1, j) = static_cast<int8_t>(m[j]);

                    const auto pi_hat = etiology_probs_row(t.bm, t.st, t.bm.x_formula.row_of[0]);
                    double case_cell = 0.0;
                    for (int l = 0; l < L; ++l)
                        case_cell += pi_hat[l] * std::exp(case_cell_loglik(t.bm, t.st, t.ds, 0, l));
                    const double case_want =
                        oracle::case_cell(m, t.bm.spec.cause_spec, pi, eta, t.st.rates.theta,
                                          t.st.rates.psi);
                    CHECK(std::fabs(case_cell - case_want) < 1e-12);
                    case_total += case_cell;

                    const double ctrl_cell = std::exp(control_loglik(t.bm, t.st, t.ds));
                    const double ctrl_want = oracle::control_cell(m, t.st.rates.psi, nu);
                    CHECK(std::fabs(ctrl_cell - ctrl_want) < 1e-12);
                    ctrl_total += ctrl_cell;
                }
                CHECK(std::fabs(case_total - 1.0) < 1e-10);
                CHECK(std::fabs(ctrl_total - 1.0) < 1e-10);
            }
        }
    }
}

TEST_CASE("covariate-free nesting: intercept-only model equals the no-covariate path") {
    auto t = toy::make_intercept_only(40, 40, 3, toy::singleton_causes(3), 2, 23);
    const std::vector<double> pi = {0.5, 0.3, 0.2};
    const std::vector<double> nu = {0.7, 0.3};
    const std::vector<double> eta = {0.4, 0.6};
    toy::set_etiology(t, pi);
    toy::set_weights(t, nu, Side::Control);
    toy::set_weights(t, eta, Side::Case);
    RngStream rng(3);
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 2; ++k) {
            t.st.rates.theta(j, k) = rng.uniform(0.6, 0.95);
            t.st.rates.psi(j, k) = rng.uniform(0.05, 0.4);
        }
    const double reg = total_loglik(t.bm, t.st, t.ds);
    const double nocov = nocov_loglik(t.ds, t.bm.spec.cause_spec, pi, nu, eta, t.st.rates);
    CHECK(std::fabs(reg - nocov) < 1e-10);
}

TEST_CASE("pLCM nesting: K = 1 equals the product-Bernoulli mixture exactly") {
    auto t = toy::make_intercept_only(10, 10, 2, toy::singleton_causes(2), 1, 29);
    const std::vector<double> pi = {0.25, 0.75};
    const std::vector<double> unit = {1.0};
    toy::set_etiology(t, pi);
    const double reg = total_loglik(t.bm, t.st, t.ds);
    const double plcm = nocov_loglik(t.ds, t.bm.spec.cause_spec, pi, unit, unit, t.st.rates);
    CHECK(reg == doctest::Approx(plcm).epsilon(1e-13));
}

TEST_CASE("degenerate single-cause model") {
    auto t = toy::make_intercept_only(3, 2, 2, {{0}}, 1, 31);
    double manual = 0.0;
    for (int i = 0; i < 3; ++i) manual += case_cell_loglik(t.bm, t.st, t.ds, i, 0);
    CHECK(case_loglik(t.bm, t.st, t.ds) == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("positive rate curve") {
    auto t = toy::make_intercept_only(2, 2, 2, toy::singleton_causes(2), 1, 37);
    t.st.rates.theta(0, 0) = 0.9;
    t.st.rates.psi(0, 0) = 0.1;

    SUBCASE("degenerate etiologies") {
        toy::set_etiology(t, {1.0 - 1e-14, 1e-14});
        const double up =
            positive_rate_curve(t.bm, t.st, std::vector<double>{}, std::vector<double>{}, 0, Side::Case);
        CHECK(up == doctest::Approx(0.9).epsilon(1e-9));
        toy::set_etiology(t, {1e-14, 1.0 - 1e-14});
        const double dn =
            positive_rate_curve(t.bm, t.st, std::vector<double>{}, std::vector<double>{}, 0, Side::Case);
        CHECK(dn == doctest::Approx(0.1).epsilon(1e-9));
    }
    SUBCASE("control marginal stays inside the FPR envelope") {
        auto t2 = toy::make_intercept_only(2, 2, 2, toy::singleton_causes(2), 3, 38);
        RngStream rng(8);
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 3; ++k) t2.st.rates.psi(j, k) = rng.uniform(0.02, 0.6);
        for (int rep = 0; rep < 50; ++rep) {
            t2.st.mu_star = {rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
            t2.st.nu[0].coefs[0] = rng.normal(0.0, 2.0);
            t2.st.nu[1].coefs[0] = rng.normal(0.0, 2.0);
            for (int j = 0; j < 2; ++j) {
                double lo = 1.0, hi = 0.0;
                for (int k = 0; k < 3; ++k) {
                    lo = std::min(lo, t2.st.rates.psi(j, k));
                    hi = std::max(hi, t2.st.rates.psi(j, k));
                }
                const double rate = positive_rate_curve(t2.bm, t2.st, std::vector<double>{},
                                                        std::vector<double>{}, j, Side::Control);
                CHECK(rate >= lo - 1e-12);
                CHECK(rate <= hi + 1e-12);
            }
        }
    }
    SUBCASE("non-singleton causes are rejected with a pointer to the enumeration marginal") {
        auto t3 = toy::make_intercept_only(2, 2, 2, {{0}, {0, 1}}, 1, 39);
        CHECK_THROWS_AS(positive_rate_curve(t3.bm, t3.st, std::vector<double>{},
                                            std::vector<double>{}, 0, Side::Case),
                        std::invalid_argument);
        // the enumeration marginal handles it
        const double rate = marginal_positive_rate_enum(t3.bm, t3.st, std::vector<double>{},
                                                        std::vector<double>{}, 0);
        CHECK(rate >= 0.0);
        CHECK(rate <= 1.0);
    }
}

TEST_CASE("individual etiology") {
    SUBCASE("uniform prior and identical cells give the uniform posterior") {
        auto t = toy::make_intercept_only(1, 1, 2, {{0}, {1}}, 1, 41);
        toy::set_etiology(t, {0.5, 0.5});
        for (int j = 0; j < 2; ++j) {
            t.st.rates.theta(j, 0) = 0.7;
            t.st.rates.psi(j, 0) = 0.7;
        }
        const auto ief = individual_etiology(t.bm, t.st, t.ds, 0);
        CHECK(ief[0] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("Bayes-rule oracle on a J=2, L=2, K=1 toy") {
        auto t = toy::make_intercept_only(1, 1, 2, toy::singleton_causes(2), 1, 43);
        const std::vector<double> pi = {0.3, 0.7};
        toy::set_etiology(t, pi);
        t.st.rates.theta(0, 0) = 0.9;
        t.st.rates.theta(1, 0) = 0.85;
        t.st.rates.psi(0, 0) = 0.2;
        t.st.rates.psi(1, 0) = 0.15;
        t.ds.brs(0, 0) = 1;
        t.ds.brs(0, 1) = 0;
        // P(M | I=A) = 0.9 * 0.85' = 0.9*0.15... direct Bayes rule
        const double like_a = 0.9 * (1.0 - 0.15);
        const double like_b = 0.2 * (1.0 - 0.85);
        const double want_a = pi[0] * like_a / (pi[0] * like_a + pi[1] * like_b);
        const auto ief = individual_etiology(t.bm, t.st, t.ds, 0);
        CHECK(std::fabs(ief[0] - want_a) < 1e-12);
    }
    SUBCASE("positive SS zeroes every cause that excludes the pathogen") {
        auto t = toy::make_intercept_only(1, 1, 2, {{0}, {1}, {}}, 1, 47, {0});
        toy::set_etiology(t, {0.3, 0.4, 0.3});
        t.st.rates.theta_ss = {0.2};
        t.ds.ss(0, 0) = 1;
        const auto ief = individual_etiology(t.bm, t.st, t.ds, 0);
        CHECK(ief[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ief[1] == 0.0);
        CHECK(ief[2] == 0.0);
    }
    SUBCASE("impossible pattern raises") {
        auto t = toy::make_intercept_only(1, 1, 2, {{0}, {}}, 1, 49, {1});
        t.st.rates.theta_ss = {0.2};
        t.ds.ss(0, 0) = 1;  // positive SS for pathogen B, but no cause contains B
        CHECK_THROWS_AS(individual_etiology(t.bm, t.st, t.ds, 0), std::runtime_error);
    }
}

TEST_CASE("finite-difference smoothness of the total log-likelihood") {
    auto t = toy::make_intercept_only(6, 6, 2, toy::singleton_causes(2), 2, 53);
    toy::set_etiology(t, {0.6, 0.4});
    toy::set_weights(t, {0.55, 0.45}, Side::Control);
    toy::set_weights(t, {0.35, 0.65}, Side::Case);

    // probe: regression coefficients, log mu*, and logit-transformed rates
    auto probe = [&](const std::function<double(double)>& set_get, double at) {
        const auto fd = [&](double h) {
            const double up = set_get(at + h);
            const double dn = set_get(at - h);
            set_get(at);
            return (up - dn) / (2.0 * h);
        };
        const double g1 = fd(1e-4), g2 = fd(1e-5);
        const double denom = std::max({1.0, std::fabs(g1), std::fabs(g2)});
        CHECK(std::fabs(g1 - g2) / denom < 1e-3);
    };

    probe([&](double v) {
        t.st.etiology[0].coefs[0] = v;
        return total_loglik(t.bm, t.st, t.ds);
    }, 0.4);
    probe([&](double v) {
        t.st.nu[0].coefs[0] = v;
        return total_loglik(t.bm, t.st, t.ds);
    }, -0.2);
    probe([&](double v) {
        t.st.eta[0].coefs[0] = v;
        return total_loglik(t.bm, t.st, t.ds);
    }, 0.1);
    probe([&](double v) {
        t.st.mu_star[0] = std::exp(v);
        return total_loglik(t.bm, t.st, t.ds);
    }, std::log(0.5));
    probe([&](double v) {
        t.st.rates.theta(0, 0) = logistic(v);
        return total_loglik(t.bm, t.st, t.ds);
    }, logit(0.8));
    probe([&](double v) {
        t.st.rates.psi(1, 1) = logistic(v);
        return total_loglik(t.bm, t.st, t.ds);
    }, logit(0.3));
}

}  // TEST_SUITE

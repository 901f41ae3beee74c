#include <cmath>

#include "doctest.h"
#include "dsi/theory.hpp"

using namespace dsi;

namespace {
GaussianMixtureSpec two_mode_1d(double m0, double s0, double m1, double s1,
                                double w0 = 0.5) {
    GaussianMixtureSpec g;
    g.components.push_back({w0, {m0}, {s0 * s0}});
    g.components.push_back({1.0 - w0, {m1}, {s1 * s1}});
    g.validate();
    return g;
}
}  // namespace

TEST_CASE("gmm score: standard normal is -x") {
    const auto g = GaussianMixtureSpec::gaussian1d(0.0, 1.0);
    for (double x : {-1.0, 0.0, 2.0}) {
        double s;
        g.score(&x, &s);
        CHECK(s == doctest::Approx(-x).epsilon(1e-12));
    }
}

TEST_CASE("gmm score: symmetric mixture has zero score at the midpoint") {
    const auto g = two_mode_1d(-2.0, 0.4, 2.0, 0.4);
    double x = 0.0, s;
    g.score(&x, &s);
    CHECK(std::abs(s) < 1e-12);
}

TEST_CASE("gmm score matches finite differences of the log density") {
    RngStream rng(31, 0);
    GaussianMixtureSpec g;
    g.components.push_back({0.3, {-1.2, 0.5}, {0.4, 0.9}});
    g.components.push_back({0.45, {0.7, -0.3}, {0.2, 0.5}});
    g.components.push_back({0.25, {2.0, 1.0}, {1.1, 0.3}});
    g.validate();
    const double h = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        double x[2] = {3.0 * rng.next_normal(), 3.0 * rng.next_normal()};
        double sc[2];
        g.score(x, sc);
        for (int j = 0; j < 2; ++j) {
            double xp[2] = {x[0], x[1]}, xm[2] = {x[0], x[1]};
            xp[j] += h;
            xm[j] -= h;
            const double fd = (g.log_density(xp) - g.log_density(xm)) / (2.0 * h);
            const double denom = std::max(std::abs(fd), 1e-8);
            CHECK(std::abs(fd - sc[j]) / denom < 1e-6);
        }
    }
}

TEST_CASE("gmm sampling matches component weights and moments") {
    RngStream rng(32, 0);
    const auto g = two_mode_1d(-2.0, 0.4, 2.0, 0.4, 0.3);
    const std::size_t n = 10000;
    const Matrix samples = g.sample_matrix(n, rng);
    std::size_t left = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (samples(i, 0) < 0.0) ++left;
    const double freq = static_cast<double>(left) / n;
    const double se = std::sqrt(0.3 * 0.7 / n);
    CHECK(std::abs(freq - 0.3) < 3.0 * se);
}

TEST_CASE("estimate_kl: identical sample sets are near zero") {
    RngStream rng(33, 0);
    const auto g = GaussianMixtureSpec::gaussian1d(0.0, 1.0);
    const Matrix s = g.sample_matrix(5000, rng);
    const KlEstimate kl = estimate_kl(s, s);
    CHECK(kl.value < 0.01);
    CHECK(kl.value >= 0.0);
}

TEST_CASE("estimate_kl: N(0,1) vs N(1,1) is 0.5") {
    RngStream rng(34, 0);
    const auto p = GaussianMixtureSpec::gaussian1d(0.0, 1.0);
    const auto q = GaussianMixtureSpec::gaussian1d(1.0, 1.0);
    const Matrix ps = p.sample_matrix(40000, rng);
    const Matrix qs = q.sample_matrix(40000, rng);
    CHECK(estimate_kl(ps, qs).value == doctest::Approx(0.5).epsilon(0.1));
    // analytic-vs-analytic variant sharpens toward the closed form
    CHECK(estimate_kl(p, q).value == doctest::Approx(0.5).epsilon(0.1));
    // mixed variants stay in the same band
    CHECK(estimate_kl(p, qs).value == doctest::Approx(0.5).epsilon(0.1));
    CHECK(estimate_kl(ps, q).value == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("estimate_kl is nonnegative and rejects high dimensions") {
    RngStream rng(35, 0);
    const auto p = GaussianMixtureSpec::gaussian1d(0.0, 1.0);
    const auto q = GaussianMixtureSpec::gaussian1d(0.2, 1.3);
    const Matrix qs = q.sample_matrix(2000, rng);
    CHECK(estimate_kl(p, qs).value >= 0.0);

    GaussianMixtureSpec g3;
    g3.components.push_back({1.0, {0, 0, 0}, {1, 1, 1}});
    const Matrix s3 = g3.sample_matrix(2000, rng);
    CHECK_THROWS_AS(estimate_kl(s3, s3), std::invalid_argument);
    Matrix few(10, 1);
    CHECK_THROWS_AS(estimate_kl(few, few), std::invalid_argument);
}

TEST_CASE("forward marginal interpolates source to near-standard normal") {
    const auto sched = NoiseSchedule::linear(1000);
    const auto src = two_mode_1d(-2.0, 0.4, 2.0, 0.4);
    const auto at0 = forward_marginal(src, sched, 0);
    CHECK(at0.components[0].mean[0] == src.components[0].mean[0]);
    CHECK(at0.components[0].var[0] == src.components[0].var[0]);

    const auto atT = forward_marginal(src, sched, 1000);
    // mean -> 0 and variance -> 1 within 1%
    double mean = 0.0, second = 0.0;
    for (const auto& c : atT.components) {
        mean += c.weight * c.mean[0];
        second += c.weight * (c.var[0] + c.mean[0] * c.mean[0]);
    }
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(second - mean * mean - 1.0) < 0.01);
}

TEST_CASE("compute_H: alpha=1 short-circuits to 1 for any x and q") {
    const auto q = two_mode_1d(-1.0, 0.5, 1.5, 0.7);
    for (double x : {-3.0, 0.0, 5.0}) {
        CHECK(compute_H(1.0, x, q) == 1.0);
        CHECK(compute_H_closed_form(1.0, x, q) == 1.0);
    }
    CHECK_THROWS_AS(compute_H(0.0, 0.0, q), std::invalid_argument);
    CHECK_THROWS_AS(compute_H(-0.3, 0.0, q), std::invalid_argument);
}

TEST_CASE("compute_H quadrature agrees with the closed form to 1e-8") {
    const auto q = GaussianMixtureSpec::gaussian1d(0.0, 1.0);
    for (double alpha : {0.9, 0.95, 0.99}) {
        for (double x : {-2.0, 0.0, 1.3}) {
            const double hq = compute_H(alpha, x, q);
            const double hc = compute_H_closed_form(alpha, x, q);
            CHECK(std::abs(hq - hc) / hc < 1e-8);
            CHECK(hq > 0.0);
        }
    }
    // mixture q as well
    const auto qm = two_mode_1d(0.4, 0.3, 2.1, 0.6, 0.7);
    for (double alpha : {0.9, 0.99}) {
        const double hq = compute_H(alpha, 0.5, qm);
        const double hc = compute_H_closed_form(alpha, 0.5, qm);
        CHECK(std::abs(hq - hc) / hc < 1e-8);
    }
}

TEST_CASE("compute_F: zero at alpha=1, Taylor slope, shrinking magnitude") {
    // biased surrogate p_T so E_q[X] * E_pT[X] is far from zero
    const auto p_T = GaussianMixtureSpec::gaussian1d(0.7, 1.0);
    const auto q = GaussianMixtureSpec::gaussian1d(1.5, 0.8);

    CHECK(compute_F(1.0, p_T, q) == 0.0);

    const double f = compute_F(0.999, p_T, q);
    const double slope = (f - 0.0) / (-0.001);
    const double expect = q.mean1d() * p_T.mean1d();  // F'(1) = E_q[X] E_pT[X]
    CHECK(std::abs(slope - expect) / std::abs(expect) < 0.10);

    double prev = std::abs(compute_F(0.9, p_T, q));
    for (double alpha : {0.95, 0.99, 0.999}) {
        const double cur = std::abs(compute_F(alpha, p_T, q));
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("estimate_jsm: analytic score oracle gives zero") {
    RngStream rng(36, 0);
    const auto sched = NoiseSchedule::linear(200);
    const auto src = two_mode_1d(-2.0, 0.4, 2.0, 0.4);
    const auto eps = analytic_eps_predictor(src, sched);
    const JsmEstimate j = estimate_jsm(sched, eps, src, 4000, rng);
    CHECK(j.value == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("estimate_jsm: zero predictor on N(0,1) matches the closed form") {
    // p_s = N(0,1) for all s, score = -x, s_theta = 0:
    // J_SM = (1/2) sum_l sigma_l * E[x^2] = (1/2) sum_l sigma_l.
    RngStream rng(37, 0);
    const auto sched = NoiseSchedule::linear(500);
    const auto src = GaussianMixtureSpec::gaussian1d(0.0, 1.0);
    EpsPredictor zero = [](const Matrix& x, const std::vector<int>&) {
        return Matrix(x.rows(), x.cols());
    };
    double closed = 0.0;
    for (double s : sched.sigmas) closed += s;
    closed *= 0.5;
    const JsmEstimate j = estimate_jsm(sched, zero, src, 60000, rng);
    CHECK(std::abs(j.value - closed) < 3.0 * j.std_error);
}

TEST_CASE("verify_theorem with the oracle predictor: holds with tiny J_SM") {
    RngStream rng(38, 0);
    const auto sched = NoiseSchedule::linear(1000);
    const auto src = two_mode_1d(-2.0, 0.4, 2.0, 0.4);
    const auto tgt = two_mode_1d(-0.9, 0.3, 0.9, 0.3);
    const auto eps = analytic_eps_predictor(src, sched);
    TheoremConfig cfg;
    cfg.alpha_grid = {0.9, 0.99};
    cfg.n_samples = 60000;
    cfg.n_jsm = 2000;
    cfg.stride_steps = 100;
    const auto reports = verify_theorem(sched, eps, src, tgt, cfg, rng);
    REQUIRE(reports.size() == 2);
    for (const auto& r : reports) {
        CHECK(std::abs(r.j_sm) < 1e-9);
        CHECK(r.holds);
        CHECK(r.warning.empty());
    }
    // F(alpha) shrinks toward 0 with alpha on this grid
    CHECK(std::abs(reports[1].f_alpha) < std::abs(reports[0].f_alpha));
}

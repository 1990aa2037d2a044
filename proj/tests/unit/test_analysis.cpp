#include <doctest.h>

#include <cmath>
#include <tuple>

#include "phage/analysis.hpp"
#include "phage/errors.hpp"

using namespace phage;

namespace {

// Wilson score bounds written directly from the textbook formula.
std::pair<double, double> wilson_oracle(double k, double n, double z) {
    const double ph = k / n;
    const double denom = 1 + z * z / n;
    const double centre = (ph + z * z / (2 * n)) / denom;
    const double half = z / denom * std::sqrt(ph * (1 - ph) / n + z * z / (4 * n * n));
    return {centre - half, centre + half};
}

}  // namespace

TEST_CASE("Wilson interval against the closed form") {
    const double z = 1.959963984540054;
    for (auto [k, n] : {std::pair{3, 20}, {10, 10}, {0, 2000}, {517, 2000}, {1, 1}}) {
        const auto [lo, hi] = wilson_ci(k, n);
        const auto [olo, ohi] = wilson_oracle(k, n, z);
        CHECK(lo == doctest::Approx(std::max(0.0, olo)).epsilon(1e-12));
        CHECK(hi == doctest::Approx(std::min(1.0, ohi)).epsilon(1e-12));
    }
    for (std::size_t n = 1; n <= 60; ++n) {
        for (std::size_t k = 0; k <= n; ++k) {
            const auto [lo, hi] = wilson_ci(k, n);
            const double ph = static_cast<double>(k) / n;
            CHECK(lo <= ph);
            CHECK(ph <= hi);
            CHECK(lo >= 0.0);
            CHECK(hi <= 1.0);
        }
    }
    CHECK_THROWS_AS(wilson_ci(1, 0), InputError);
    CHECK_THROWS_AS(wilson_ci(3, 2), InputError);
}

TEST_CASE("least squares recovers an exact line") {
    const auto fit = least_squares({0, 1, 2, 3}, {1, 3, 5, 7});
    CHECK(fit.slope == doctest::Approx(2.0));
    CHECK(fit.intercept == doctest::Approx(1.0));
}

TEST_CASE("decay fit and envelope on an exact exponential") {
    HistoryTrajectory h;
    h.dt = 0.1;
    for (int i = 0; i <= 1000; ++i) {
        const double t = 0.1 * i;
        h.states.push_back({0.0, 0.5 + 2.0 * std::exp(-0.3 * t)});
    }
    const State ref{0.0, 0.5};
    const auto fit = fit_decay_rate(h, ref, {5.0, 80.0}, 1e-14);
    CHECK(fit.rate == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(fit.residual_rms < 1e-6);
    CHECK(convergence_envelope(h, ref, 0.1, {0.0, 100.0}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(fit_decay_rate(h, ref, {200.0, 300.0}, 1e-14), InsufficientDataError);
}

TEST_CASE("sup deviation and interval selection") {
    HistoryTrajectory h;
    h.dt = 1.0;
    h.states = {{0, 0}, {3, 4}, {0, 1}, {0, 0}};
    CHECK(sup_deviation(h, {0.0, 3.0}, {0, 0}) == 5.0);
    CHECK(sup_deviation(h, {1.5, 3.0}, {0, 0}) == 1.0);
    CHECK_THROWS_AS(sup_deviation(h, {3.5, 9.0}, {0, 0}), InputError);
}

TEST_CASE("interval from kappas") {
    const auto i = interval_from_kappas(2.0, 4.0, 1.0, 0.1, 0.09735);
    CHECK(i.lo == doctest::Approx(2.0 * std::log(10.0) / 0.09735));
    CHECK(i.hi == doctest::Approx(4.0 * std::log(10.0) / 0.09735));
    CHECK_THROWS_AS(interval_from_kappas(2.0, 4.0, 0.05, 0.1, 0.09735), InputError);
    CHECK_THROWS_AS(interval_from_kappas(0.5, 4.0, 1.0, 0.1, 0.09735), InputError);
    CHECK_THROWS_AS(interval_from_kappas(3.0, 2.0, 1.0, 0.1, 0.09735), InputError);
}

namespace {

ConcentrationQuery small_query(double eps, double rho) {
    ConcentrationQuery q;
    q.rho = rho;
    q.interval = {2.0, 4.0};
    q.n_paths = 48;
    q.eps = eps;
    q.grid = {2e-3, 4.0, true};
    return q;
}

const InitialCondition kInit = InitialCondition::constant(1e-4, 0.6);

}  // namespace

TEST_CASE("concentration estimate does not depend on the thread count") {
    const ModelParams p;
    const auto q = small_query(0.15, 0.05);
    const auto a = estimate_concentration(q, p, kInit, 17, 1);
    const auto b = estimate_concentration(q, p, kInit, 17, 3);
    CHECK(a.exceed_count == b.exceed_count);
    CHECK(a.p_hat == b.p_hat);
    CHECK(a.n_paths == 48);
    CHECK(a.ci_lo <= a.p_hat);
    CHECK(a.p_hat <= a.ci_hi);
}

TEST_CASE("exceedance sets are nested in rho") {
    const ModelParams p;
    std::size_t prev = 48;
    for (double rho : {0.01, 0.03, 0.05, 0.1, 0.3}) {
        const auto e = estimate_concentration(small_query(0.2, rho), p, kInit, 5, 1);
        CHECK(e.exceed_count <= prev);
        prev = e.exceed_count;
    }
}

TEST_CASE("query validation") {
    const ModelParams p;
    auto q = small_query(0.1, 0.1);
    q.interval = {4.0, 2.0};
    CHECK_THROWS_AS(estimate_concentration(q, p, kInit, 1, 1), InputError);
    q = small_query(0.1, -0.1);
    CHECK_THROWS_AS(estimate_concentration(q, p, kInit, 1, 1), InputError);
    q = small_query(0.1, 0.1);
    q.n_paths = 0;
    CHECK_THROWS_AS(estimate_concentration(q, p, kInit, 1, 1), InputError);
}

namespace {

ConcentrationEstimate fake(double eps, std::size_t k, std::size_t n) {
    ConcentrationEstimate e;
    e.query.eps = eps;
    e.exceed_count = k;
    e.n_paths = n;
    e.p_hat = static_cast<double>(k) / n;
    std::tie(e.ci_lo, e.ci_hi) = wilson_ci(k, n);
    return e;
}

}  // namespace

TEST_CASE("scaling regression on log p against 1/eps^2") {
    // p = exp(-c / eps^2) exactly (up to count rounding), c = 0.02.
    std::vector<ConcentrationEstimate> rows;
    const std::size_t n = 1000000;
    for (double eps : {0.1, 0.2, 0.4, 0.8}) {
        const auto k = static_cast<std::size_t>(std::llround(n * std::exp(-0.02 / (eps * eps))));
        rows.push_back(fake(eps, k, n));
    }
    rows.push_back(fake(0.01, 0, n));
    const auto fit = scaling_regression(rows);
    CHECK(fit.slope == doctest::Approx(-0.02).epsilon(1e-3));
    CHECK(fit.monotone_ok);
    CHECK(fit.points.size() == 5);
    std::size_t excluded = 0;
    for (const auto& pt : fit.points) {
        excluded += pt.excluded;
    }
    CHECK(excluded == 1);
    CHECK_THROWS_AS(scaling_regression({fake(0.1, 3, 10), fake(0.2, 0, 10)}), InsufficientDataError);
}

TEST_CASE("monotonicity allows CI overlap only") {
    CHECK(monotone_in_eps({{0.1, 0.10, 0.08, 0.12, false}, {0.2, 0.09, 0.07, 0.11, false}}));
    CHECK(!monotone_in_eps({{0.1, 0.50, 0.45, 0.55, false}, {0.2, 0.10, 0.08, 0.12, false}}));
    CHECK(monotone_in_eps({{-0.4, 0.9, 0.85, 0.95, false}, {0.1, 0.2, 0.15, 0.25, false}}));
}

TEST_CASE("coupled deviation vanishes with the noise") {
    const ModelParams p;
    NoiseConfig noise{0.0, 3, 0, Scheme::euler_maruyama_corrected, 1};
    CHECK(coupled_sup_deviation(p, kInit, noise, {1e-3, 1.0, true}, false, 1.0) == 0.0);
    noise.eps = 0.1;
    const double a = coupled_sup_deviation(p, kInit, noise, {1e-3, 1.0, true}, false, 1.0);
    noise.eps = 0.05;
    const double b = coupled_sup_deviation(p, kInit, noise, {1e-3, 1.0, true}, false, 1.0);
    CHECK(a > b);
    CHECK(b > 0.0);
}

TEST_CASE("strong order study rejects incompatible grids") {
    const ModelParams p;
    CHECK_THROWS_AS(strong_order_study(p, kInit, 0.1, Scheme::euler_maruyama_corrected, {1e-3, 3e-4}, 1e-3 / 64,
                                       0.1, 2, 1),
                    InputError);
}

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

#include "mcglm/simulate.hpp"

#include <cmath>
#include <limits>
#include <set>

using namespace mcglm;

namespace {

// Sample variance and its Monte Carlo standard error.
oracle::MeanSe variance_se(const std::vector<double>& x) {
    return oracle::covariance_se(x, x);
}

std::vector<double> column(const std::vector<VectorXd>& reps, Index i) {
    std::vector<double> out;
    out.reserve(reps.size());
    for (const VectorXd& r : reps) out.push_back(r(i));
    return out;
}

}  // namespace

TEST_CASE("identity covariance and zero mean reproduce the standard normal") {
    const Problem p = fixture::gaussian_iid(MatrixXd::Zero(3, 0), VectorXd::Zero(3));
    const ThetaPartition theta{VectorXd::Zero(0), VectorXd::Ones(1)};
    const auto reps = simulate_gaussian(p, {theta, 5000, 1});
    REQUIRE(reps.size() == 5000);
    for (Index i = 0; i < 3; ++i) {
        const oracle::MeanSe m = oracle::mean_se(column(reps, i));
        CHECK(std::abs(m.mean) < 3.0 * m.se);
        for (Index j = 0; j <= i; ++j) {
            const oracle::MeanSe c = oracle::covariance_se(column(reps, i), column(reps, j));
            CHECK(std::abs(c.mean - (i == j ? 1.0 : 0.0)) < 3.0 * c.se);
        }
    }
}

TEST_CASE("sample moments match the model mean and joint covariance") {
    const fixture::Truth truth = fixture::small_gaussian(3, 2, 3);
    const auto reps = simulate_gaussian(truth.problem, {truth.theta, 5000, 3});
    const VectorXd mu = evaluate_mean(truth.problem, truth.theta.beta).stacked_mu();
    const MatrixXd C = oracle::assembled_C(truth.problem, truth.theta.flat());
    for (Index i = 0; i < 6; ++i) {
        const oracle::MeanSe m = oracle::mean_se(column(reps, i));
        CHECK(std::abs(m.mean - mu(i)) < 3.0 * m.se);
        for (Index j = 0; j <= i; ++j) {
            const oracle::MeanSe c = oracle::covariance_se(column(reps, i), column(reps, j));
            CHECK(std::abs(c.mean - C(i, j)) < 3.0 * c.se);
        }
    }
}

TEST_CASE("single unit variance") {
    const Problem p = fixture::gaussian_iid(MatrixXd::Ones(1, 1), VectorXd::Zero(1));
    const ThetaPartition theta{VectorXd::Constant(1, 0.5), VectorXd::Constant(1, 2.5)};
    const oracle::MeanSe v = variance_se(column(simulate_gaussian(p, {theta, 4000, 9}), 0));
    CHECK(std::abs(v.mean - 2.5) < 3.0 * v.se);
}

TEST_CASE("seed determinism across runs and thread counts") {
    const fixture::Truth truth = fixture::small_gaussian(6, 2, 5);
    const auto a = simulate_gaussian(truth.problem, {truth.theta, 50, 77});
    const auto b = simulate_gaussian(truth.problem, {truth.theta, 50, 77});
    set_thread_count(4);
    const auto c = simulate_gaussian(truth.problem, {truth.theta, 50, 77});
    set_thread_count(1);
    const auto d = simulate_gaussian(truth.problem, {truth.theta, 50, 78});
    REQUIRE(a.size() == 50);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
        CHECK(a[i] == c[i]);
    }
    CHECK(a[0] != d[0]);
    // A longer run extends a shorter one: replicate k depends only on (seed, k).
    const auto e = simulate_gaussian(truth.problem, {truth.theta, 10, 77});
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(e[i] == a[i]);
}

TEST_CASE("replicates are independent") {
    const Problem p = fixture::gaussian_iid(MatrixXd::Zero(2, 0), VectorXd::Zero(2));
    const auto reps = simulate_gaussian(p, {{VectorXd::Zero(0), VectorXd::Ones(1)}, 4001, 12});
    std::vector<double> x, y;
    for (std::size_t k = 0; k + 1 < reps.size(); ++k) {
        x.push_back(reps[k](0));
        y.push_back(reps[k + 1](0));
    }
    const oracle::MeanSe c = oracle::covariance_se(x, y);
    CHECK(std::abs(c.mean) < 3.0 * c.se);

    std::set<std::uint64_t> seeds;
    for (std::uint64_t k = 0; k < 1000; ++k) seeds.insert(replicate_seed(42, k));
    CHECK(seeds.size() == 1000);
}

TEST_CASE("missing outcomes in the template do not affect replicates") {
    const fixture::Truth truth = fixture::small_gaussian(4, 2, 7);
    Dataset holes = truth.problem.data();
    holes.y[0](1) = std::numeric_limits<double>::quiet_NaN();
    const Problem p(truth.problem.model(), holes);
    const auto a = simulate_gaussian(p, {truth.theta, 5, 3});
    const auto b = simulate_gaussian(truth.problem, {truth.theta, 5, 3});
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].allFinite());
        CHECK(a[i] == b[i]);
    }
}

TEST_CASE("non-positive-definite truth is rejected") {
    const Problem p = fixture::gaussian_iid(MatrixXd::Ones(2, 1), VectorXd::Zero(2));
    CHECK_THROWS_AS((void)simulate_gaussian(p, {{VectorXd::Zero(1), VectorXd::Constant(1, -1.0)}, 3, 1}),
                    FactorizationError);
}

TEST_CASE("with_outcomes splits a stacked vector by response") {
    const fixture::Truth truth = fixture::small_gaussian(3, 2, 9);
    const VectorXd stacked = VectorXd::LinSpaced(6, 1.0, 6.0);
    const Dataset d = with_outcomes(truth.problem.data(), stacked);
    CHECK(d.y[0] == stacked.head(3));
    CHECK(d.y[1] == stacked.tail(3));
    CHECK_THROWS_AS((void)with_outcomes(truth.problem.data(), VectorXd::Zero(5)), InvalidInput);
}

TEST_CASE("gamma-mixed counts: mean 2, variance 2 + 1 * 4 = 6") {
    const auto draws = simulate_counts_marginal(VectorXd::Constant(100000, 2.0), 2.0, 1.0, 21);
    std::vector<double> x(draws.begin(), draws.end());
    const oracle::MeanSe m = oracle::mean_se(x);
    const oracle::MeanSe v = variance_se(x);
    CHECK(std::abs(m.mean - 2.0) < 3.0 * m.se);
    CHECK(std::abs(v.mean - 6.0) < 3.0 * v.se);
}

TEST_CASE("Neyman Type A counts: variance mu + tau0 mu") {
    const auto draws = simulate_counts_marginal(VectorXd::Constant(100000, 3.0), 1.0, 0.5, 22);
    std::vector<double> x(draws.begin(), draws.end());
    const oracle::MeanSe m = oracle::mean_se(x);
    const oracle::MeanSe v = variance_se(x);
    CHECK(std::abs(m.mean - 3.0) < 3.0 * m.se);
    CHECK(std::abs(v.mean - 4.5) < 3.0 * v.se);
}

TEST_CASE("small tau0 approaches the Poisson") {
    for (double p : {1.0, 2.0}) {
        const auto draws = simulate_counts_marginal(VectorXd::Constant(50000, 4.0), p, 1e-4, 23);
        std::vector<double> x(draws.begin(), draws.end());
        const double ratio = variance_se(x).mean / oracle::mean_se(x).mean;
        CHECK(ratio == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("count simulator contract") {
    const VectorXd mu = VectorXd::Constant(20, 1.5);
    CHECK(simulate_counts_marginal(mu, 2.0, 0.7, 5) == simulate_counts_marginal(mu, 2.0, 0.7, 5));
    CHECK(simulate_counts_marginal(mu, 2.0, 0.7, 5) != simulate_counts_marginal(mu, 2.0, 0.7, 6));
    CHECK_THROWS_AS((void)simulate_counts_marginal(mu, 3.0, 0.7, 5), InvalidInput);
    CHECK_THROWS_AS((void)simulate_counts_marginal(mu, 0.0, 0.7, 5), InvalidInput);
    CHECK_THROWS_AS((void)simulate_counts_marginal(mu, 1.0, 0.0, 5), InvalidInput);
    CHECK_THROWS_AS((void)simulate_counts_marginal(-mu, 1.0, 0.5, 5), InvalidInput);
}

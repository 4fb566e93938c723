#include "doctest.h"
#include "oracles.hpp"

#include "mcglm/covariance.hpp"
#include "mcglm/model.hpp"

#include <cmath>
#include <random>

using namespace mcglm;

namespace {

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

ResponseCovariance rc_from(const MatrixXd& sigma) {
    ResponseCovariance rc;
    rc.sigma = sigma;
    rc.chol = cholesky_lower(sigma);
    rc.omega = sigma;
    rc.U = sigma;
    rc.v_sqrt = VectorXd::Ones(sigma.rows());
    return rc;
}

MatrixXd random_correlation(Index R, std::mt19937_64& rng) {
    const MatrixXd a = oracle::random_spd(R, rng);
    const VectorXd d = a.diagonal().cwiseSqrt().cwiseInverse();
    return d.asDiagonal() * a * d.asDiagonal();
}

}  // namespace

TEST_CASE("sigma_b from stacked correlations") {
    CHECK(sigma_b_from_rho(vec({0.5}), 2) == (MatrixXd(2, 2) << 1, 0.5, 0.5, 1).finished());
    const MatrixXd s3 = sigma_b_from_rho(vec({0.1, 0.2, 0.3}), 3);
    CHECK(s3(1, 0) == 0.1);
    CHECK(s3(2, 0) == 0.2);
    CHECK(s3(2, 1) == 0.3);
    CHECK(s3(0, 2) == 0.2);
    CHECK(sigma_b_from_rho(VectorXd::Zero(3), 3) == MatrixXd::Identity(3, 3));
    CHECK_THROWS_AS((void)sigma_b_from_rho(vec({0.1}), 3), InvalidInput);
}

TEST_CASE("build_sigma_r examples") {
    const MatrixPredictor I3({mat_identity(3)});
    const ResponseCovariance a = build_sigma_r(vec({0, 0, 0}), {VarianceKind::constant}, 0.0, vec({2.5}), I3, {});
    CHECK(a.sigma == 2.5 * MatrixXd::Identity(3, 3));

    const MatrixPredictor I2({mat_identity(2)});
    const ResponseCovariance b = build_sigma_r(vec({2, 3}), {VarianceKind::tweedie_power}, 1.0, vec({1.0}), I2, {});
    CHECK((b.sigma - vec({2, 3}).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff() < 1e-15);

    const MatrixPredictor I1({mat_identity(1)});
    const ResponseCovariance c = build_sigma_r(vec({2}), {VarianceKind::poisson_tweedie}, 2.0, vec({1.0}), I1, {});
    CHECK(c.sigma(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("build_sigma_r Cholesky invariants and PD failure") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 10; ++t) {
        const Index n = 6;
        MatrixXd Z1 = oracle::random_symmetric(n, rng) / 10.0;
        const MatrixPredictor pred({mat_identity(n), StructureMatrix::from_dense(Z1, "z")});
        VectorXd mu = (VectorXd::Random(n).array() + 2.0).matrix();
        const ResponseCovariance rc =
            build_sigma_r(mu, {VarianceKind::tweedie_power}, 1.5, vec({1.0, 0.5}), pred, {CovLinkKind::inverse});
        CHECK((rc.chol * rc.chol.transpose() - rc.sigma).norm() / rc.sigma.norm() < 1e-9);
        CHECK(rc.chol.diagonal().minCoeff() > 0.0);
    }
    const MatrixPredictor I2({mat_identity(2)});
    CHECK_THROWS_AS((void)build_sigma_r(vec({1, 1}), {VarianceKind::constant}, 0.0, vec({-1.0}), I2, {}),
                    NotPositiveDefinite);
}

TEST_CASE("generalized Kronecker product examples") {
    JointCovariance jc = generalized_kronecker({rc_from(MatrixXd::Constant(1, 1, 4.0)), rc_from(MatrixXd::Constant(1, 1, 9.0))},
                                               sigma_b_from_rho(vec({0.5}), 2));
    CHECK(jc.C == (MatrixXd(2, 2) << 4, 3, 3, 9).finished());
    CHECK(jc.C_inv.isApprox(oracle::inverse_2x2(jc.C), 1e-14));
}

TEST_CASE("generalized Kronecker reductions on random instances") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 25; ++t) {
        const Index R = 2 + t % 2;
        const Index n = 3 + t % 4;
        std::vector<ResponseCovariance> parts;
        for (Index r = 0; r < R; ++r) parts.push_back(rc_from(oracle::random_spd(n, rng)));
        const MatrixXd Sb = random_correlation(R, rng);

        const JointCovariance jc = generalized_kronecker(parts, Sb);
        MatrixXd bd = MatrixXd::Zero(n * R, n * R);
        for (Index r = 0; r < R; ++r) {
            CHECK((jc.C.block(r * n, r * n, n, n) - parts[static_cast<std::size_t>(r)].sigma).cwiseAbs().maxCoeff() <= 1e-10);
            bd.block(r * n, r * n, n, n) = parts[static_cast<std::size_t>(r)].chol;
        }
        const MatrixXd ref = bd * oracle::kron_index(Sb, MatrixXd::Identity(n, n)) * bd.transpose();
        CHECK((jc.C - ref).cwiseAbs().maxCoeff() < 1e-9 * ref.cwiseAbs().maxCoeff());
        CHECK((jc.C * jc.C_inv - MatrixXd::Identity(n * R, n * R)).cwiseAbs().maxCoeff() < 1e-8);

        const JointCovariance ind = generalized_kronecker(parts, MatrixXd::Identity(R, R));
        for (Index r = 0; r < R; ++r)
            for (Index s = 0; s < R; ++s)
                if (r != s) CHECK(ind.C.block(r * n, s * n, n, n).cwiseAbs().maxCoeff() == 0.0);

        const ResponseCovariance same = rc_from(oracle::random_spd(n, rng));
        const JointCovariance eq = generalized_kronecker(std::vector<ResponseCovariance>(static_cast<std::size_t>(R), same), Sb);
        CHECK((eq.C - oracle::kron_index(Sb, same.sigma)).cwiseAbs().maxCoeff() < 1e-10 * same.sigma.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("phi operator") {
    CHECK(phi_operator(MatrixXd::Identity(2, 2)) == 0.5 * MatrixXd::Identity(2, 2));
    MatrixXd L = MatrixXd::Zero(3, 3);
    L(1, 0) = 2;
    L(2, 1) = -1;
    CHECK(phi_operator(L) == L);
    std::mt19937_64 rng(1);
    const MatrixXd S = oracle::random_symmetric(4, rng);
    CHECK((phi_operator(S) + phi_operator(S).transpose() - S).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("chol_deriv examples and reconstruction identity") {
    std::mt19937_64 rng(41);
    const MatrixXd E = oracle::random_symmetric(3, rng);
    CHECK((chol_deriv(MatrixXd::Identity(3, 3), E) - phi_operator(E)).cwiseAbs().maxCoeff() < 1e-15);

    const VectorXd a = vec({4.0, 9.0, 2.0});
    const MatrixXd dl = chol_deriv(a.cwiseSqrt().asDiagonal(), MatrixXd::Identity(3, 3));
    for (Index i = 0; i < 3; ++i) CHECK(dl(i, i) == doctest::Approx(1.0 / (2.0 * std::sqrt(a(i)))).epsilon(1e-14));

    for (int t = 0; t < 20; ++t) {
        const MatrixXd S = oracle::random_spd(5, rng);
        const MatrixXd dS = oracle::random_symmetric(5, rng);
        const MatrixXd L = cholesky_lower(S);
        const MatrixXd dL = chol_deriv(L, dS);
        CHECK((dL * L.transpose() + L * dL.transpose() - dS).cwiseAbs().maxCoeff() < 1e-9);
        const MatrixXd fd = oracle::central_fd([&](double s) { return cholesky_lower(S + s * dS); }, 0.0, 1e-3);
        CHECK(oracle::rel_err(dL, fd) < 1e-6);
    }
}

TEST_CASE("dC_drho examples") {
    const JointCovariance jc = generalized_kronecker(
        {rc_from(MatrixXd::Constant(1, 1, 4.0)), rc_from(MatrixXd::Constant(1, 1, 9.0))}, sigma_b_from_rho(vec({0.2}), 2));
    CHECK(dC_drho(jc, 0) == (MatrixXd(2, 2) << 0, 6, 6, 0).finished());

    std::mt19937_64 rng(51);
    std::vector<ResponseCovariance> parts;
    for (int r = 0; r < 3; ++r) parts.push_back(rc_from(oracle::random_spd(4, rng)));
    const JointCovariance j3 = generalized_kronecker(parts, sigma_b_from_rho(vec({0.1, -0.2, 0.3}), 3));
    for (Index i = 0; i < 3; ++i) {
        const MatrixXd d = dC_drho(j3, i);
        for (Index r = 0; r < 3; ++r) CHECK(d.block(r * 4, r * 4, 4, 4).cwiseAbs().maxCoeff() == 0.0);
        const MatrixXd fd = oracle::central_fd(
            [&](double x) {
                VectorXd rho = vec({0.1, -0.2, 0.3});
                rho(i) = x;
                return generalized_kronecker(parts, sigma_b_from_rho(rho, 3), false).C;
            },
            vec({0.1, -0.2, 0.3})(i), 1e-3);
        CHECK(oracle::rel_err(d, fd) < 1e-6);
    }
}

TEST_CASE("dC_dpar_r reductions") {
    std::mt19937_64 rng(61);
    std::vector<ResponseCovariance> parts{rc_from(oracle::random_spd(3, rng)), rc_from(oracle::random_spd(3, rng))};
    const MatrixXd dS = oracle::random_symmetric(3, rng);
    const JointCovariance ind = generalized_kronecker(parts, MatrixXd::Identity(2, 2));
    const MatrixXd d = dC_dpar_r(ind, 1, dS);
    CHECK((d.block(3, 3, 3, 3) - dS).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(d.block(0, 0, 3, 3).cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.block(0, 3, 3, 3).cwiseAbs().maxCoeff() == 0.0);

    const JointCovariance one = generalized_kronecker({parts[0]}, MatrixXd::Identity(1, 1));
    CHECK((dC_dpar_r(one, 0, dS) - dS).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("dSigma examples") {
    const MatrixPredictor I2({mat_identity(2)});
    const ResponseCovariance at_one = build_sigma_r(vec({1, 1}), {VarianceKind::tweedie_power}, 1.3, vec({2.0}), I2, {});
    CHECK(dSigma_dp(at_one, vec({1, 1}), {VarianceKind::tweedie_power}, 1.3).cwiseAbs().maxCoeff() == 0.0);

    // N = 1, mu = e, p = 0: d(mu^p omega)/dp = omega ln(mu) mu^p = omega
    const MatrixPredictor I1({mat_identity(1)});
    const double e = std::exp(1.0);
    const MatrixXd dp = dSigma_dp(vec({e}), {VarianceKind::tweedie_power}, 0.0, vec({1.7}), I1, {});
    const double fd = oracle::central_fd(
        [&](double p) { return build_sigma_r(vec({e}), {VarianceKind::tweedie_power}, p, vec({1.7}), I1, {}).sigma; },
        0.0, 1e-3)(0, 0);
    CHECK(dp(0, 0) == doctest::Approx(fd).epsilon(1e-10));
    CHECK(dp(0, 0) == doctest::Approx(1.7).epsilon(1e-14));

    std::mt19937_64 rng(71);
    MatrixXd Z = oracle::random_symmetric(3, rng);
    const MatrixPredictor pz({mat_identity(3), StructureMatrix::from_dense(Z, "z")});
    CHECK((dSigma_dtau(VectorXd::Zero(3), {VarianceKind::constant}, 0, vec({1.0, 0.0}), pz, {}, 1) - pz[1].to_dense())
              .cwiseAbs()
              .maxCoeff() < 1e-15);
    CHECK((dSigma_dtau(VectorXd::Zero(3), {VarianceKind::constant}, 0, vec({1.0, 0.0}), pz, {CovLinkKind::inverse}, 1) +
           pz[1].to_dense())
              .cwiseAbs()
              .maxCoeff() < 1e-14);
}

TEST_CASE("dC_dbeta: zero for constant variance, scalar chain rule for Tweedie") {
    // N = 1, Tweedie p = 2, log link: Sigma = tau mu^2, mu = exp(b0 + b1 x)
    ResponseSpec resp;
    resp.name = "y";
    resp.link.kind = LinkKind::log;
    resp.variance = {VarianceKind::tweedie_power, true};
    resp.power = 2.0;
    resp.predictor = MatrixPredictor({mat_identity(1)});
    Dataset data{{vec({1.0})}, {(MatrixXd(1, 2) << 1.0, 0.7).finished()}};
    const Problem problem(ModelSpec{{resp}, std::nullopt}, data);
    const ThetaPartition theta{vec({0.3, -0.4}), vec({1.9})};
    const MeanEvaluation mean = evaluate_mean(problem, theta.beta);
    const JointCovariance jc = assemble_covariance(problem, theta, mean, false);
    const double mu = std::exp(0.3 - 0.4 * 0.7);
    // d(tau mu^2)/db_j = 2 tau mu^2 x_j
    CHECK(dC_dbeta(problem, theta, mean, jc, 0)(0, 0) == doctest::Approx(2 * 1.9 * mu * mu).epsilon(1e-13));
    CHECK(dC_dbeta(problem, theta, mean, jc, 1)(0, 0) == doctest::Approx(2 * 1.9 * mu * mu * 0.7).epsilon(1e-13));

    ResponseSpec gauss = resp;
    gauss.variance = {VarianceKind::constant, true};
    gauss.link.kind = LinkKind::identity;
    const Problem pg(ModelSpec{{gauss}, std::nullopt}, data);
    const MeanEvaluation mg = evaluate_mean(pg, theta.beta);
    CHECK(dC_dbeta(pg, theta, mg, assemble_covariance(pg, theta, mg, false), 0).size() == 0);
}

TEST_CASE("every analytic dC matches finite differences on random instances") {
    std::mt19937_64 rng(2718);
    int instances = 0;
    oracle::FamilyWorst worst;
    for (int t = 0; t < 60; ++t) {
        const Index N = 3 + t % 10;
        const Index R = 1 + t % 3;
        const oracle::Instance inst = oracle::random_instance(rng, N, R);
        const oracle::FamilyWorst w = oracle::derivative_check(inst.problem, inst.theta);
        worst.rho = std::max(worst.rho, w.rho);
        worst.power = std::max(worst.power, w.power);
        worst.tau = std::max(worst.tau, w.tau);
        worst.beta = std::max(worst.beta, w.beta);
        ++instances;
    }
    CHECK(instances >= 50);
    CHECK(worst.rho < 1e-6);
    CHECK(worst.power < 1e-6);
    CHECK(worst.tau < 1e-6);
    CHECK(worst.beta < 1e-6);
}

TEST_CASE("weight matrix") {
    std::mt19937_64 rng(81);
    const MatrixXd dC = oracle::random_symmetric(3, rng);
    CHECK(weight_matrix(MatrixXd::Identity(3, 3), dC) == dC);
    CHECK(weight_matrix(0.5 * MatrixXd::Identity(3, 3), MatrixXd::Identity(3, 3)) == 0.25 * MatrixXd::Identity(3, 3));
    const MatrixXd C = oracle::random_spd(4, rng);
    const MatrixXd D = oracle::random_symmetric(4, rng);
    const MatrixXd fd = oracle::central_fd([&](double s) { return MatrixXd((C + s * D).inverse()); }, 0.0, 1e-3);
    CHECK(oracle::rel_err(weight_matrix(C.inverse(), D), -fd) < 1e-6);
}

TEST_CASE("non-PD between correlation is rejected") {
    std::vector<ResponseCovariance> parts{rc_from(MatrixXd::Identity(2, 2)), rc_from(MatrixXd::Identity(2, 2)),
                                          rc_from(MatrixXd::Identity(2, 2))};
    CHECK_THROWS_AS((void)generalized_kronecker(parts, sigma_b_from_rho(vec({0.9, 0.9, -0.9}), 3)), NotPositiveDefinite);
}

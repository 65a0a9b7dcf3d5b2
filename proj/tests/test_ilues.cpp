#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "aquinv/errors.hpp"
#include "aquinv/evaluators.hpp"
#include "aquinv/ilues.hpp"
#include "aquinv/metrics.hpp"
#include "aquinv/rng.hpp"

using namespace aquinv;

TEST_CASE("j_values combines normalized data and parameter distances") {
  SUBCASE("anchor contributes zero parameter distance") {
    Eigen::MatrixXd m(3, 2);
    m << 0, 0, 1, 1, 2, 0;
    Eigen::MatrixXd preds(3, 1);
    preds << 0.5, 1.0, 2.0;
    Eigen::VectorXd d(1), cd(1);
    d << 0.0;
    cd << 1.0;
    Eigen::MatrixXd cmm = Eigen::MatrixXd::Identity(2, 2);

    Eigen::VectorXd j = j_values(m, preds, m.row(0).transpose(), d, cd, cmm);
    // sample 0: J_m = 0, J_d = 0.25 -> J = 0.25 / 4.0
    CHECK(j[0] == doctest::Approx(0.25 / 4.0));
    CHECK(j[2] == doctest::Approx(1.0 + 1.0));  // carries both maxima
  }

  SUBCASE("two-sample toy matches hand-computed quadratic forms") {
    Eigen::MatrixXd m(2, 2);
    m << 1.0, 2.0, 3.0, 6.0;
    Eigen::MatrixXd preds(2, 2);
    preds << 0.0, 1.0, 2.0, 5.0;
    Eigen::VectorXd d(2), cd(2);
    d << 1.0, 1.0;
    cd << 4.0, 1.0;  // diagonal C_D
    Eigen::MatrixXd cmm(2, 2);
    cmm << 2.0, 0.0, 0.0, 8.0;  // diagonal C_MM

    // J_d(0) = (0-1)^2/4 + (1-1)^2/1 = 0.25
    // J_d(1) = (2-1)^2/4 + (5-1)^2/1 = 16.25
    // anchor = sample 0: J_m(1) = (3-1)^2/2 + (6-2)^2/8 = 2 + 2 = 4
    Eigen::VectorXd j = j_values(m, preds, m.row(0).transpose(), d, cd, cmm);
    CHECK(j[0] == doctest::Approx(0.25 / 16.25).epsilon(1e-12));
    CHECK(j[1] == doctest::Approx(1.0 + 1.0).epsilon(1e-12));

    // anchor that is neither sample
    Eigen::VectorXd anchor(2);
    anchor << 1.0, 6.0;
    // J_m(0) = 0 + 16/8 = 2 ; J_m(1) = 4/2 + 0 = 2 -> equal, both normalize to 1
    Eigen::VectorXd j2 = j_values(m, preds, anchor, d, cd, cmm);
    CHECK(j2[0] == doctest::Approx(0.25 / 16.25 + 1.0).epsilon(1e-12));
    CHECK(j2[1] == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("roulette selection follows the inverse-J probabilities") {
  Eigen::VectorXd j(3);
  j << 1.0, 2.0, 4.0;  // weights 1, 0.5, 0.25 -> first-draw p = 4/7, 2/7, 1/7

  SUBCASE("empirical first-draw frequencies pass a chi-square test") {
    const int trials = 100000;
    std::array<long, 3> counts{};
    auto rng = make_rng(8);
    for (int t = 0; t < trials; ++t) ++counts[roulette_select(j, 1, rng)[0]];
    const double p[3] = {4.0 / 7, 2.0 / 7, 1.0 / 7};
    double chi2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double expected = trials * p[i];
      chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
    }
    CHECK(chi2 < 9.21);  // 99% bound, 2 dof
  }

  SUBCASE("selecting everyone returns all indices") {
    auto rng = make_rng(1);
    auto all = roulette_select(j, 3, rng);
    std::sort(all.begin(), all.end());
    CHECK(all == std::vector<int>{0, 1, 2});
    CHECK_THROWS_AS(roulette_select(j, 4, rng), std::invalid_argument);
  }

  SUBCASE("equal J values draw uniformly without replacement") {
    Eigen::VectorXd flat = Eigen::VectorXd::Ones(5);
    const int trials = 50000;
    std::array<long, 5> first{};
    auto rng = make_rng(7);
    for (int t = 0; t < trials; ++t) {
      auto picked = roulette_select(flat, 2, rng);
      CHECK(picked[0] != picked[1]);
      ++first[picked[0]];
    }
    double chi2 = 0.0;
    for (long c : first) chi2 += (c - trials / 5.0) * (c - trials / 5.0) / (trials / 5.0);
    CHECK(chi2 < 13.28);  // 99% bound, 4 dof
  }
}

TEST_CASE("es_update reproduces the 1-D Kalman posterior") {
  // prior m ~ N(2, 1.5^2), identity forward, observation d with sd 0.5
  const double mu0 = 2.0, s0 = 1.5, sd = 0.5, d_obs = 4.0;
  const int n = 10000;
  auto rng = make_rng(99);
  std::normal_distribution<double> gauss;

  Eigen::MatrixXd m(n, 1), preds(n, 1);
  for (int i = 0; i < n; ++i) {
    m(i, 0) = mu0 + s0 * gauss(rng);
    preds(i, 0) = m(i, 0);
  }
  Eigen::VectorXd d(1), cd(1);
  d << d_obs;
  cd << sd * sd;

  Eigen::MatrixXd updated = es_update(m, preds, d, cd, rng);

  const double var_post = 1.0 / (1.0 / (s0 * s0) + 1.0 / (sd * sd));
  const double mean_post = var_post * (mu0 / (s0 * s0) + d_obs / (sd * sd));
  const double got_mean = updated.col(0).mean();
  const double got_var =
      (updated.col(0).array() - got_mean).square().sum() / (n - 1);

  CHECK(std::abs(got_mean - mean_post) < 3.0 * std::sqrt(var_post / n));
  CHECK(std::abs(got_var - var_post) < 3.0 * var_post * std::sqrt(2.0 / (n - 1)));

  SUBCASE("constant predictions leave the ensemble unchanged") {
    Eigen::MatrixXd flat_preds = Eigen::MatrixXd::Constant(5, 1, 1.0);
    Eigen::MatrixXd m5 = m.topRows(5);
    Eigen::MatrixXd out = es_update(m5, flat_preds, d, cd, rng);
    CHECK((out - m5).cwiseAbs().maxCoeff() == 0.0);  // zero cross-covariance, zero gain
  }

  SUBCASE("huge inflation freezes the update") {
    Eigen::VectorXd huge = Eigen::VectorXd::Constant(1, 1e12);
    Eigen::MatrixXd out = es_update(m.topRows(50), preds.topRows(50), d, huge, rng);
    CHECK((out - m.topRows(50)).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("accept_reject follows the acceptance-rate formula") {
  auto rng = make_rng(5);

  SUBCASE("improvement is always accepted") {
    for (int t = 0; t < 100; ++t) CHECK(accept_reject(1.0, 2.0, rng));
    for (int t = 0; t < 100; ++t) CHECK(accept_reject(3.0, 3.0, rng));
  }

  SUBCASE("empirical acceptance at a fixed penalty") {
    // j_d_new - j_d_old = 2 ln 4 -> acceptance rate 1/4
    const double delta = 2.0 * std::log(4.0);
    const int trials = 100000;
    long accepted = 0;
    for (int t = 0; t < trials; ++t)
      if (accept_reject(delta, 0.0, rng)) ++accepted;
    CHECK(std::abs(accepted / static_cast<double>(trials) - 0.25) < 0.01);
  }
}

namespace {

// Quadratic toy forward model: d = (m1, m2, m1 + m2) on a 2-parameter space
// disguised in the 7-slot source layout.
class QuadraticEvaluator : public ForwardEvaluator {
 public:
  std::string name() const override { return "toy"; }

 private:
  Eigen::VectorXd do_evaluate(const Eigen::VectorXd& p) override {
    Eigen::VectorXd out(3);
    out << p[2], p[3], p[2] + p[3];
    return out;
  }
};

}  // namespace

TEST_CASE("simulator and surrogate evaluators share the observation contract") {
  // fixed-conductivity forward config; the simulator evaluator's cached-
  // stepper path must agree with the full pipeline.
  ForwardModelConfig fwd;
  fwd.grid = Grid(13, 25, 10.0, 20.0);
  fwd.snapshot_times = {2, 4, 6, 8, 10, 12, 14};
  fwd.transport.dt = 0.25;
  fwd.design = default_observation_design(fwd.grid, fwd.snapshot_times);
  fwd.fixed_log_k = Eigen::MatrixXd::Constant(13, 25, 2.0);

  SimulatorEvaluator evaluator(fwd, nullptr);
  Eigen::VectorXd packed(7);
  packed << 4.2, 5.1, 1.0, 2.0, 3.0, 4.0, 5.0;
  Eigen::VectorXd via_eval = evaluator.evaluate(packed);
  CHECK(evaluator.calls() == 1);

  ParameterVector p = unpack(packed, 0, 5, default_segment_boundaries());
  ForwardOutputs direct = run_forward(p, nullptr, fwd);
  CHECK((via_eval - direct.observations).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(evaluator.name() == "simulator");
}

TEST_CASE("run_ilues contracts on a small toy problem") {
  PriorSpec prior;
  prior.n_kl = 0;

  QuadraticEvaluator eval;
  Eigen::VectorXd d(3), sigma(3);
  d << 2.0, 5.0, 7.0;  // consistent with strengths (2, 5)
  sigma << 0.1, 0.1, 0.1;

  IluesConfig config;
  config.ensemble_size = 60;
  config.local_fraction = 0.2;
  config.iterations = 6;
  config.seed = 11;

  SUBCASE("zero iterations returns the prior ensemble") {
    IluesConfig c0 = config;
    c0.iterations = 0;
    auto result = run_ilues(prior, eval, d, sigma, c0);
    REQUIRE(result.history.size() == 1);
    CHECK(result.history[0].iteration == 0);
    CHECK(eval.calls() == 60);
    // prior draws respect the bounds
    const auto& m = result.history[0].params;
    CHECK(m.col(0).minCoeff() >= 3.0);
    CHECK(m.col(0).maxCoeff() <= 5.0);
    CHECK(m.col(1).minCoeff() >= 4.0);
    CHECK(m.col(6).maxCoeff() <= 8.0);
  }

  SUBCASE("iterations tighten the ensemble around the data") {
    auto result = run_ilues(prior, eval, d, sigma, config);
    REQUIRE(result.history.size() == 7);
    CHECK(result.forward_failures == 0);

    auto median_sswr = [&](const Ensemble& e) {
      std::vector<double> vals;
      for (int i = 0; i < e.preds.rows(); ++i)
        vals.push_back(sswr(e.preds.row(i).transpose(), d, sigma));
      std::sort(vals.begin(), vals.end());
      return vals[vals.size() / 2];
    };
    const double before = median_sswr(result.history.front());
    const double after = median_sswr(result.history.back());
    CHECK(after < 0.1 * before);

    // medians trend downward across iterations (allowing stochastic stalls)
    int decreasing = 0;
    for (size_t i = 1; i < result.history.size(); ++i)
      if (median_sswr(result.history[i]) <= median_sswr(result.history[i - 1]) * 1.001)
        ++decreasing;
    CHECK(decreasing >= 5);  // of 6 iteration pairs

    // posterior concentrates near the truth: identifiable strengths
    const auto& m = result.history.back().params;
    CHECK(std::abs(m.col(2).mean() - 2.0) < 0.5);
    CHECK(std::abs(m.col(3).mean() - 5.0) < 0.5);
    for (int i = 0; i < m.rows(); ++i) CHECK(m.row(i).allFinite());

    SUBCASE("history parameters stay inside the prior box") {
      for (const auto& ens : result.history) {
        CHECK(ens.params.col(0).minCoeff() >= 3.0 - 1e-12);
        CHECK(ens.params.col(0).maxCoeff() <= 5.0 + 1e-12);
        CHECK(ens.params.col(2).minCoeff() >= 0.0 - 1e-12);
        CHECK(ens.params.col(2).maxCoeff() <= 8.0 + 1e-12);
      }
    }
  }

  SUBCASE("determinism in the master seed") {
    auto r1 = run_ilues(prior, eval, d, sigma, config);
    auto r2 = run_ilues(prior, eval, d, sigma, config);
    CHECK((r1.history.back().params - r2.history.back().params).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("config validation") {
    IluesConfig bad = config;
    bad.local_fraction = 0.0;
    CHECK_THROWS_AS(run_ilues(prior, eval, d, sigma, bad), config_error);
    bad = config;
    bad.ensemble_size = 1;
    CHECK_THROWS_AS(run_ilues(prior, eval, d, sigma, bad), config_error);
  }
}

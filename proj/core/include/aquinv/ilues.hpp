#pragma once

#include <Eigen/Core>
#include <Eigen/Cholesky>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "aquinv/grid.hpp"

namespace aquinv {

// Anything that maps a packed parameter vector to a predicted observation
// vector. Simulator- and surrogate-backed evaluators are interchangeable;
// the call counter feeds run manifests and the surrogate-replacement checks.
class ForwardEvaluator {
 public:
  virtual ~ForwardEvaluator() = default;
  Eigen::VectorXd evaluate(const Eigen::VectorXd& packed) {
    ++calls_;
    return do_evaluate(packed);
  }
  virtual std::string name() const = 0;
  long calls() const { return calls_; }
  void reset_calls() { calls_ = 0; }

 private:
  virtual Eigen::VectorXd do_evaluate(const Eigen::VectorXd& packed) = 0;
  long calls_ = 0;
};

struct Ensemble {
  Eigen::MatrixXd params;  // ensemble_size x n_params
  Eigen::MatrixXd preds;   // ensemble_size x n_obs
  int iteration = 0;
};

struct IluesConfig {
  int ensemble_size = 6000;
  double local_fraction = 0.1;
  int iterations = 20;
  double inflation = 0.0;  // 0 selects the common choice beta = iterations
  std::uint64_t seed = 0;
  double cmm_jitter_ratio = 1e-6;

  int n_local() const;
  double beta() const { return inflation > 0.0 ? inflation : static_cast<double>(iterations); }
  void validate() const;
};

// Prior over the packed parameter vector: standard-normal KLE coefficients
// plus uniform source parameters.
struct PriorSpec {
  int n_kl = 0;
  SourceBounds bounds;

  int n_params() const { return n_kl + 7; }
  Eigen::VectorXd draw(std::mt19937_64& rng) const;
  // Reflects source entries back into their prior ranges.
  void clamp(Eigen::VectorXd& packed) const;
};

// Combined normalized distance (data mismatch + parameter distance to the
// anchor), both terms scaled by their ensemble maxima.
Eigen::VectorXd j_values(const Eigen::MatrixXd& params, const Eigen::MatrixXd& preds,
                         const Eigen::VectorXd& anchor, const Eigen::VectorXd& d,
                         const Eigen::VectorXd& c_d_diag, const Eigen::MatrixXd& c_mm);

// N_l indices drawn without replacement with probability proportional to 1/J.
std::vector<int> roulette_select(const Eigen::VectorXd& j, int n_local, std::mt19937_64& rng);

// Ensemble-smoother update of a local ensemble against perturbed observations
// with the inflated error covariance.
Eigen::MatrixXd es_update(const Eigen::MatrixXd& m_local, const Eigen::MatrixXd& d_local,
                          const Eigen::VectorXd& d, const Eigen::VectorXd& c_d_inflated_diag,
                          std::mt19937_64& rng);

bool accept_reject(double j_d_new, double j_d_old, std::mt19937_64& rng);

struct IluesResult {
  std::vector<Ensemble> history;  // prior ensemble first, one entry per iteration after
  long forward_failures = 0;
};

// Iterative local updating ensemble smoother. Per-sample random streams are
// seeded from (seed, iteration, sample), so results do not depend on
// evaluation order. Iteration callbacks (when given) run once per completed
// iteration, e.g. to persist the history incrementally.
IluesResult run_ilues(const PriorSpec& prior, ForwardEvaluator& evaluator,
                      const Eigen::VectorXd& d, const Eigen::VectorXd& sigma,
                      const IluesConfig& config,
                      const std::function<void(const Ensemble&)>& on_iteration = {});

}  // namespace aquinv

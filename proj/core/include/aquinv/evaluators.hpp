#pragma once

#include <memory>
#include <optional>

#include "aquinv/forward_model.hpp"
#include "aquinv/ilues.hpp"
#include "aquinv/net/train.hpp"

namespace aquinv {

// Physics-based forward evaluator. With a fixed conductivity field the flow
// solution and the transport stepping matrix are shared across calls.
class SimulatorEvaluator : public ForwardEvaluator {
 public:
  SimulatorEvaluator(ForwardModelConfig config, std::shared_ptr<const KleBasis> basis);

  std::string name() const override { return "simulator"; }

 private:
  Eigen::VectorXd do_evaluate(const Eigen::VectorXd& packed) override;

  ForwardModelConfig config_;
  std::shared_ptr<const KleBasis> basis_;
  int n_kl_ = 0;
  std::vector<double> boundaries_;

  // fixed-conductivity fast path
  std::optional<Field> cached_head_;
  std::optional<VelocityField> cached_velocity_;
  std::unique_ptr<TransportStepper> cached_stepper_;
};

// Trained-network forward evaluator; predicts fields by rollout and extracts
// the same observation vector as the simulator.
class SurrogateEvaluator : public ForwardEvaluator {
 public:
  SurrogateEvaluator(net::Surrogate surrogate, ForwardModelConfig config,
                     std::shared_ptr<const KleBasis> basis);

  std::string name() const override { return "surrogate"; }

 private:
  Eigen::VectorXd do_evaluate(const Eigen::VectorXd& packed) override;

  net::Surrogate surrogate_;
  ForwardModelConfig config_;
  std::shared_ptr<const KleBasis> basis_;
  int n_kl_ = 0;
  std::vector<double> boundaries_;
};

}  // namespace aquinv

#include "aquinv/evaluators.hpp"

#include <stdexcept>

namespace aquinv {

namespace {

int basis_modes(const std::shared_ptr<const KleBasis>& basis,
                const std::optional<Eigen::MatrixXd>& fixed_log_k) {
  if (fixed_log_k) return 0;
  if (!basis) throw std::invalid_argument("evaluator: KLE basis required without fixed conductivity");
  return basis->n_kl();
}

}  // namespace

SimulatorEvaluator::SimulatorEvaluator(ForwardModelConfig config,
                                       std::shared_ptr<const KleBasis> basis)
    : config_(std::move(config)), basis_(std::move(basis)) {
  n_kl_ = basis_modes(basis_, config_.fixed_log_k);
  boundaries_ = default_segment_boundaries();
  if (config_.fixed_log_k) {
    Field k(config_.grid, FieldKind::conductivity, config_.fixed_log_k->array().exp());
    cached_head_ = solve_head(config_.grid, k, config_.bc);
    cached_velocity_ = darcy_velocity(config_.grid, k, *cached_head_, config_.porosity, config_.bc);
    DispersionField disp = dispersion_tensor(*cached_velocity_, config_.dispersion);
    cached_stepper_ = std::make_unique<TransportStepper>(config_.grid, *cached_velocity_, disp,
                                                         config_.porosity, config_.transport.dt);
  }
}

Eigen::VectorXd SimulatorEvaluator::do_evaluate(const Eigen::VectorXd& packed) {
  ParameterVector params = unpack(packed, n_kl_, 5, boundaries_);
  if (cached_stepper_) {
    ForwardOutputs out;
    out.head = *cached_head_;
    out.concentrations = simulate_with_stepper(*cached_stepper_, config_.grid, params.source,
                                               config_.snapshot_times);
    return observe(out, config_.design);
  }
  return run_forward(params, basis_.get(), config_).observations;
}

SurrogateEvaluator::SurrogateEvaluator(net::Surrogate surrogate, ForwardModelConfig config,
                                       std::shared_ptr<const KleBasis> basis)
    : surrogate_(std::move(surrogate)), config_(std::move(config)), basis_(std::move(basis)) {
  n_kl_ = basis_modes(basis_, config_.fixed_log_k);
  boundaries_ = default_segment_boundaries();
}

Eigen::VectorXd SurrogateEvaluator::do_evaluate(const Eigen::VectorXd& packed) {
  ParameterVector params = unpack(packed, n_kl_, 5, boundaries_);
  Field log_k = config_.fixed_log_k
                    ? Field(config_.grid, FieldKind::log_conductivity, *config_.fixed_log_k)
                    : synthesize(*basis_, params.xi, config_.log_k_mean);
  std::vector<Field> images = source_images(config_.grid, params.source, surrogate_.n_t);
  net::SurrogatePrediction pred = net::predict(surrogate_, log_k, images);

  ForwardOutputs out;
  out.head = pred.head;
  out.concentrations = std::move(pred.concentrations);
  return observe(out, config_.design);
}

}  // namespace aquinv

#include "aquinv/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "aquinv/errors.hpp"

namespace aquinv {

namespace {

void check_shapes(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& prediction) {
  if (truth.rows() != prediction.rows() || truth.cols() != prediction.cols())
    throw std::invalid_argument("metrics: truth/prediction shapes differ");
  if (truth.rows() < 2) throw std::invalid_argument("metrics: need at least 2 samples");
}

}  // namespace

double r2_score(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& prediction) {
  check_shapes(truth, prediction);
  const Eigen::RowVectorXd mean = truth.colwise().mean();
  const double ss_res = (truth - prediction).squaredNorm();
  const double ss_tot = (truth.rowwise() - mean).squaredNorm();
  if (ss_tot == 0.0) throw numeric_error("r2_score: constant truth, metric undefined");
  return 1.0 - ss_res / ss_tot;
}

double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& prediction) {
  check_shapes(truth, prediction);
  return std::sqrt((truth - prediction).squaredNorm() / truth.rows());
}

double sswr(const Eigen::VectorXd& model, const Eigen::VectorXd& measurements,
            const Eigen::VectorXd& sigma) {
  if (model.size() != measurements.size() || model.size() != sigma.size())
    throw std::invalid_argument("sswr: vector lengths differ");
  if ((sigma.array() <= 0.0).any()) throw std::invalid_argument("sswr: sigma must be positive");
  return ((model - measurements).array() / sigma.array()).square().sum();
}

MaxAbsErrorStats max_abs_error_per_field(const std::vector<Field>& truth,
                                         const std::vector<Field>& prediction) {
  if (truth.empty()) throw std::invalid_argument("max_abs_error_per_field: empty field list");
  if (truth.size() != prediction.size())
    throw std::invalid_argument("max_abs_error_per_field: field counts differ");

  MaxAbsErrorStats stats;
  stats.per_field.reserve(truth.size());
  for (size_t i = 0; i < truth.size(); ++i)
    stats.per_field.push_back((truth[i].values - prediction[i].values).cwiseAbs().maxCoeff());

  double sum = 0.0;
  for (double v : stats.per_field) sum += v;
  stats.mean = sum / stats.per_field.size();
  double ss = 0.0;
  for (double v : stats.per_field) ss += (v - stats.mean) * (v - stats.mean);
  stats.stddev = stats.per_field.size() > 1 ? std::sqrt(ss / (stats.per_field.size() - 1)) : 0.0;
  return stats;
}

}  // namespace aquinv

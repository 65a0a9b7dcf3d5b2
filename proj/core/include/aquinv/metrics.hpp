#pragma once

#include <Eigen/Core>
#include <vector>

#include "aquinv/grid.hpp"

namespace aquinv {

// Coefficient of determination over a sample set; rows are samples (each row
// a flattened output stack). 1 - sum ||y - yhat||^2 / sum ||y - ybar||^2.
double r2_score(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& prediction);

// sqrt(mean over samples of the squared per-sample error norm).
double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& prediction);

// Sum of squared weighted residuals: sum ((f_i - d_i)/sigma_i)^2.
double sswr(const Eigen::VectorXd& model, const Eigen::VectorXd& measurements,
            const Eigen::VectorXd& sigma);

struct MaxAbsErrorStats {
  std::vector<double> per_field;
  double mean = 0.0;
  double stddev = 0.0;
};

// Per-field maximum absolute error with mean/std across fields.
MaxAbsErrorStats max_abs_error_per_field(const std::vector<Field>& truth,
                                         const std::vector<Field>& prediction);

}  // namespace aquinv

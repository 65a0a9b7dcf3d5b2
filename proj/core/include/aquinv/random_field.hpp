#pragma once

#include <Eigen/Core>
#include <filesystem>

#include "aquinv/grid.hpp"

namespace aquinv {

// Exponential covariance of the log-conductivity field,
//   C(s,s') = variance * exp(-sqrt(((sx-sx')/lx)^2 + ((sy-sy')/ly)^2)),
// plus the constant mean of the underlying Gaussian field.
struct CovarianceSpec {
  double variance = 0.5;
  double corr_len_x = 4.0;
  double corr_len_y = 2.0;
  double mean = 2.0;

  void validate() const;
};

// Truncated eigendecomposition of the discretized covariance. Eigenvectors
// are orthonormal columns (one entry per cell, row-major cell order) and
// eigenvalues are sorted descending.
struct KleBasis {
  Grid grid;
  Eigen::VectorXd eigenvalues;   // n_kl, descending, >= 0
  Eigen::MatrixXd eigenvectors;  // n_cells x n_kl
  double energy_fraction = 0.0;  // sum(eigenvalues) / trace(covariance)
  double covariance_trace = 0.0;

  int n_kl() const { return static_cast<int>(eigenvalues.size()); }

  // Pointwise truncated variance sum_i lambda_i * phi_i(cell)^2.
  Eigen::VectorXd truncated_variance() const;
};

// Dense covariance collocated at cell centers with uniform weights.
Eigen::MatrixXd assemble_covariance(const Grid& grid, const CovarianceSpec& spec);

// Symmetric eigendecomposition truncated at the smallest mode count whose
// cumulative eigenvalue sum reaches target_energy * trace. Small negative
// eigenvalues (within -1e-10 * trace) are clipped to zero; anything more
// negative is a numeric error.
KleBasis decompose(const Grid& grid, const Eigen::MatrixXd& cov, double target_energy);

// G = mean + sum_i xi_i sqrt(lambda_i) phi_i, returned as a log-conductivity
// field. Exponentiation to K = exp(G) is the caller's job.
Field synthesize(const KleBasis& basis, const Eigen::VectorXd& xi, double mean);

// Persistence: eigenvalues + eigenvectors as AQTN tensors and a JSON sidecar
// recording the grid, covariance spec, and truncation.
void save_basis(const std::filesystem::path& dir, const KleBasis& basis, const CovarianceSpec& spec);
KleBasis load_basis(const std::filesystem::path& dir, CovarianceSpec* spec_out = nullptr);

}  // namespace aquinv

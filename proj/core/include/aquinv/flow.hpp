#pragma once

#include <Eigen/Core>

#include "aquinv/grid.hpp"

namespace aquinv {

// Dirichlet heads on the left/right domain faces; top and bottom are no-flow.
struct FlowBC {
  double left_head = 1.0;
  double right_head = 0.0;
};

struct FlowSolverOptions {
  double rel_tolerance = 1e-12;  // relative residual target for PCG
  int max_iter_factor = 10;      // max iterations = factor * n_cells
};

// Pore velocities at cell centers plus the Darcy face fluxes the transport
// scheme advects with. qx is H x (W+1) (x-normal faces, positive +x),
// qy is (H+1) x W (y-normal faces, positive +y).
struct VelocityField {
  Grid grid;
  Eigen::MatrixXd vx, vy;
  Eigen::MatrixXd qx, qy;
};

// Steady-state head from a 5-point finite-volume discretization with
// harmonic-mean interface conductivities, Dirichlet left/right imposed at the
// domain faces through half-cell transmissibilities, solved by
// diagonally-preconditioned conjugate gradients.
Field solve_head(const Grid& grid, const Field& conductivity, const FlowBC& bc,
                 const FlowSolverOptions& options = {});

// Face Darcy fluxes from the same harmonic-mean scheme, averaged to cell
// centers and divided by porosity.
VelocityField darcy_velocity(const Grid& grid, const Field& conductivity, const Field& head,
                             double porosity, const FlowBC& bc);

// Net boundary inflow minus outflow relative to the mean boundary through-flux.
double boundary_flux_imbalance(const VelocityField& v);

}  // namespace aquinv

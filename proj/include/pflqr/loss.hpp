#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pflqr/design.hpp"

namespace pflqr {

struct LossConfig {
  double tau = 0.5;
  double gamma = 0.005;
  double trim_fraction = 1.0;  // fraction of curves retained

  void validate() const;
};

// Koenker pinball loss u * (tau - 1{u < 0}).
double check_loss(double u, double tau);

// tau*u + gamma*log(1 + exp(-u/gamma)), evaluated without overflow.
double smooth_check_loss(double u, double tau, double gamma);

// First derivative of smooth_check_loss in u.
double smooth_check_loss_derivative(double u, double tau, double gamma);

// Number of curves kept when trimming: nearest integer to trim_fraction * n,
// halves rounded to even, and never less than one.
int trimmed_count(int n, double trim_fraction);

// Sum over t of the smoothed loss for every curve at theta.
Eigen::VectorXd per_curve_loss(const Eigen::Ref<const Eigen::VectorXd>& theta,
                               const DesignPack& design, const Eigen::MatrixXd& y,
                               const LossConfig& cfg);

// sum_ij rho_tilde(Y_ij - (Pi theta)_ij) + 0.5 theta^T P theta.
double smoothed_objective(const Eigen::Ref<const Eigen::VectorXd>& theta,
                          const DesignPack& design, const Eigen::MatrixXd& y,
                          const LossConfig& cfg, const Eigen::MatrixXd& penalty);

// As smoothed_objective, but the data term only sums the curves in trim_set.
double trimmed_objective(const Eigen::Ref<const Eigen::VectorXd>& theta,
                         const DesignPack& design, const Eigen::MatrixXd& y,
                         const LossConfig& cfg, const Eigen::MatrixXd& penalty,
                         const std::vector<int>& trim_set);

// Indices (ascending) of the trimmed_count curves with the smallest
// per-curve loss at theta. Ties go to the lower index.
std::vector<int> select_trim_set(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                 const DesignPack& design, const Eigen::MatrixXd& y,
                                 const LossConfig& cfg);

// Same selection from precomputed per-curve losses.
std::vector<int> smallest_indices(const Eigen::VectorXd& losses, int count);

}  // namespace pflqr

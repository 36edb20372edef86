#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls the routine it is checking.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "readmit/nnet.hpp"

namespace readmit::oracle {

// Relative error |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor);

struct GradientCheck {
  double max_relative_error = 0.0;
  long coordinates = 0;
  std::string worst;  // "layer L weight (r,c)" of the largest error
};

// Central differences with step h of penalized_loss against every coordinate
// of loss_and_grad.
GradientCheck check_gradient(const MlpModel& model, const Eigen::MatrixXd& x,
                             std::span<const int> labels, std::span<const double> l2, double h,
                             double floor);

// Smallest |pre-activation| over all hidden units and rows. Finite
// differences are only meaningful when this exceeds the step size by a wide
// margin (ReLU kinks).
double min_hidden_margin(const MlpModel& model, const Eigen::MatrixXd& x);

// Random small network and fixture for gradient checks: 1-3 hidden layers of
// 1-8 units, inputs resampled until every hidden pre-activation clears
// `margin`.
struct GradientFixture {
  MlpModel model;
  Eigen::MatrixXd x;
  std::vector<int> labels;
  std::vector<double> l2;
};
GradientFixture random_gradient_fixture(std::uint64_t seed, double margin);

// Pairwise Mann-Whitney enumeration: wins + ties/2 over all positive-negative
// pairs.
double pairwise_auroc(std::span<const double> probs, std::span<const int> labels);

// Two-sided Student-t tail 2 * integral_{|t|}^inf f_dof(u) du by double
// exponential quadrature of the density in extended precision.
double t_tail_quadrature(double t, double dof);

// Welch statistic, Welch-Satterthwaite dof and quadrature p from the plain
// textbook formulas.
struct WelchReference {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
};
WelchReference welch_reference(std::span<const double> a, std::span<const double> b);

// Indices of the k nearest rows of `pool` (by Euclidean distance to row
// `query` of x, excluding `query`), ties to the lower index.
std::vector<Eigen::Index> nearest_rows(const Eigen::MatrixXd& x, Eigen::Index query,
                                       std::span<const Eigen::Index> pool, int k);

// Distance from s to the segment a-b and the projection parameter.
struct SegmentFit {
  double residual = 0.0;
  double lambda = 0.0;
};
SegmentFit fit_segment(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& s);

}  // namespace readmit::oracle

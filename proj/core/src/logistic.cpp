#include <cmath>

#include "readmit/error.hpp"
#include "readmit/nnet.hpp"

namespace readmit {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

struct Evaluation {
  double objective = 0.0;
  Eigen::VectorXd grad_w;
  double grad_b = 0.0;
};

Evaluation evaluate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    double b, double penalty) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::VectorXd z = (x * w).array() + b;
  Evaluation e;
  double data = 0.0;
  Eigen::VectorXd residual(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    // log(1 + exp(z)) - y z, evaluated without overflow.
    const double zi = z(i);
    data += (zi > 0.0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi))) - y(i) * zi;
    residual(i) = stable_sigmoid(zi) - y(i);
  }
  e.objective = data / n + penalty * w.squaredNorm();
  e.grad_w = x.transpose() * residual / n + 2.0 * penalty * w;
  e.grad_b = residual.sum() / n;
  return e;
}

double gradient_norm(const Evaluation& e) {
  return std::sqrt(e.grad_w.squaredNorm() + e.grad_b * e.grad_b);
}

Eigen::VectorXd label_vector(std::span<const int> labels) {
  Eigen::VectorXd y(static_cast<Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("logistic: labels must be 0 or 1");
    y(static_cast<Index>(i)) = labels[i];
  }
  return y;
}

}  // namespace

double logistic_objective(const Eigen::MatrixXd& x, std::span<const int> labels,
                          const Eigen::VectorXd& coefficients, double intercept, double penalty) {
  return evaluate(x, label_vector(labels), coefficients, intercept, penalty).objective;
}

LogisticModel train_logistic(const Eigen::MatrixXd& x, std::span<const int> labels,
                             const LogisticOptions& options) {
  if (static_cast<Index>(labels.size()) != x.rows()) throw DataError("logistic: label count does not match rows");
  if (x.rows() == 0) throw DataError("logistic: no rows");
  if (!x.allFinite()) throw DataError("logistic: matrix must be fully observed");
  if (!(options.penalty >= 0.0)) throw ConfigError("select.penalty", "must be >= 0");
  if (options.max_iter < 1) throw ConfigError("select.max_iter", "must be >= 1");
  const Eigen::VectorXd y = label_vector(labels);
  const double positives = y.sum();
  if (positives == 0.0 || positives == static_cast<double>(y.size())) {
    throw DataError("logistic: labels must contain both classes");
  }

  // 1/L with L bounding the Hessian: (||X||_F^2 + n) / (4n) + 2 penalty.
  const auto n = static_cast<double>(x.rows());
  const double lipschitz = (x.squaredNorm() + n) / (4.0 * n) + 2.0 * options.penalty;
  const double max_step = 64.0 / lipschitz;
  double step = 1.0 / lipschitz;

  LogisticModel model;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  double b = 0.0;
  Evaluation current = evaluate(x, y, w, b, options.penalty);
  for (int it = 0; it < options.max_iter; ++it) {
    const double gnorm = gradient_norm(current);
    if (gnorm <= options.gradient_tolerance) {
      model.converged = true;
      break;
    }
    const double g2 = gnorm * gnorm;
    step = std::min(step * 2.0, max_step);
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      const Eigen::VectorXd w_new = w - step * current.grad_w;
      const double b_new = b - step * current.grad_b;
      Evaluation trial = evaluate(x, y, w_new, b_new, options.penalty);
      if (trial.objective <= current.objective - kArmijo * step * g2) {
        w = w_new;
        b = b_new;
        current = std::move(trial);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable descent left
    model.objective_trace.push_back(current.objective);
    model.iterations = it + 1;
  }
  model.gradient_norm = gradient_norm(current);
  if (model.gradient_norm <= options.gradient_tolerance) model.converged = true;
  model.coefficients = std::move(w);
  model.intercept = b;
  return model;
}

}  // namespace readmit

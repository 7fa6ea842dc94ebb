#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dsvrg/error.hpp"

namespace dsvrg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstVecRef = Eigen::Ref<const Vector>;
using Index = std::size_t;

/// A finite sum f = (1/N) sum_i f_i over R^d. `add_grad` accumulates
/// scale * grad f_i(x) into `out`; implementations do no bounds checking.
template <class F>
concept FiniteSum = requires(const F& f, Index i, const Vector& x, double scale, Vector& out) {
  { f.size() } -> std::convertible_to<Index>;
  { f.dim() } -> std::convertible_to<Index>;
  { f.value(i, x) } -> std::convertible_to<double>;
  f.add_grad(i, x, scale, out);
};

enum class LossKind { Square, Logistic, SmoothHinge };

inline const char* to_string(LossKind loss) {
  switch (loss) {
    case LossKind::Square: return "square";
    case LossKind::Logistic: return "logistic";
    case LossKind::SmoothHinge: return "smooth_hinge";
  }
  return "?";
}

inline LossKind parse_loss(const std::string& s) {
  if (s == "square") return LossKind::Square;
  if (s == "logistic") return LossKind::Logistic;
  if (s == "smooth_hinge" || s == "smooth-hinge") return LossKind::SmoothHinge;
  fail(ErrorCode::Config, "unknown loss '" + s + "'");
}

inline bool is_classification(LossKind loss) { return loss != LossKind::Square; }

struct DataPoint {
  Vector features;
  double label = 0.0;
};

/// Dense design matrix (one row per point) plus labels.
struct Dataset {
  RowMatrix features;
  Vector labels;

  Index size() const { return static_cast<Index>(features.rows()); }
  Index dim() const { return static_cast<Index>(features.cols()); }

  DataPoint point(Index i) const { return {features.row(static_cast<Eigen::Index>(i)).transpose(), labels(static_cast<Eigen::Index>(i))}; }

  static Dataset from_points(const std::vector<DataPoint>& points) {
    Dataset ds;
    if (points.empty()) return ds;
    const auto d = points.front().features.size();
    ds.features.resize(static_cast<Eigen::Index>(points.size()), d);
    ds.labels.resize(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
      require(points[i].features.size() == d, ErrorCode::DimensionMismatch,
              "point " + std::to_string(i) + " has dimension " + std::to_string(points[i].features.size()));
      ds.features.row(static_cast<Eigen::Index>(i)) = points[i].features.transpose();
      ds.labels(static_cast<Eigen::Index>(i)) = points[i].label;
    }
    return ds;
  }
};

struct SmoothnessInfo {
  double L = 0.0;
  double mu = 0.0;
  double kappa = 0.0;
};

namespace loss {

/// phi(z) and phi'(z) as functions of the margin z = a^T x (square) or
/// z = b a^T x (classification).
inline double smooth_hinge(double z) {
  if (z >= 1.0) return 0.0;
  if (z <= 0.0) return 0.5 - z;
  return 0.5 * (1.0 - z) * (1.0 - z);
}

inline double smooth_hinge_deriv(double z) {
  if (z >= 1.0) return 0.0;
  if (z <= 0.0) return -1.0;
  return z - 1.0;
}

/// log(1 + exp(-z)) without overflow.
inline double logistic(double z) {
  return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

/// d/dz log(1 + exp(-z)) = -1 / (1 + exp(z)).
inline double logistic_deriv(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(z));
}

}  // namespace loss

/// Regularized ERM objective: f_i(x) = phi(x, xi_i) + (lambda/2)||x||^2.
class ErmObjective {
 public:
  ErmObjective(LossKind loss, Dataset data, double lambda) : loss_(loss), data_(std::move(data)), lambda_(lambda) {
    require(data_.size() >= 1, ErrorCode::EmptyDataset, "objective needs at least one point");
    require(lambda_ >= 0.0, ErrorCode::InvalidArgument, "lambda must be nonnegative");
    require(static_cast<Index>(data_.labels.size()) == data_.size(), ErrorCode::DimensionMismatch,
            "label count differs from point count");
    if (is_classification(loss_)) {
      for (Eigen::Index i = 0; i < data_.labels.size(); ++i) {
        const double b = data_.labels(i);
        require(b == 1.0 || b == -1.0, ErrorCode::InvalidArgument,
                std::string(to_string(loss_)) + " loss needs labels in {-1, +1}, point " + std::to_string(i) +
                    " has " + std::to_string(b));
      }
    }
  }

  Index size() const { return data_.size(); }
  Index dim() const { return data_.dim(); }
  LossKind loss() const { return loss_; }
  double lambda() const { return lambda_; }
  const Dataset& data() const { return data_; }

  double margin(Index i, const Vector& x) const {
    const auto r = static_cast<Eigen::Index>(i);
    const double ax = data_.features.row(r).dot(x);
    return loss_ == LossKind::Square ? ax : data_.labels(r) * ax;
  }

  double loss_value(Index i, const Vector& x) const {
    const double z = margin(i, x);
    switch (loss_) {
      case LossKind::Square: {
        const double res = z - data_.labels(static_cast<Eigen::Index>(i));
        return res * res;
      }
      case LossKind::Logistic: return loss::logistic(z);
      case LossKind::SmoothHinge: return loss::smooth_hinge(z);
    }
    return 0.0;
  }

  double value(Index i, const Vector& x) const { return loss_value(i, x) + 0.5 * lambda_ * x.squaredNorm(); }

  /// Derivative of the loss with respect to a^T x.
  double loss_slope(Index i, const Vector& x) const {
    const auto r = static_cast<Eigen::Index>(i);
    const double z = margin(i, x);
    switch (loss_) {
      case LossKind::Square: return 2.0 * (z - data_.labels(r));
      case LossKind::Logistic: return data_.labels(r) * loss::logistic_deriv(z);
      case LossKind::SmoothHinge: return data_.labels(r) * loss::smooth_hinge_deriv(z);
    }
    return 0.0;
  }

  void add_grad(Index i, const Vector& x, double scale, Vector& out) const {
    const double slope = loss_slope(i, x);
    if (slope != 0.0) out.noalias() += (scale * slope) * data_.features.row(static_cast<Eigen::Index>(i)).transpose();
    if (lambda_ != 0.0) out.noalias() += (scale * lambda_) * x;
  }

  double max_sq_norm() const { return data_.features.rowwise().squaredNorm().maxCoeff(); }

 private:
  LossKind loss_;
  Dataset data_;
  double lambda_;
};

/// f~_i(x; y) = f_i(x) + (sigma/2)||x - y||^2 over an underlying finite sum.
template <FiniteSum F>
class ProxObjective {
 public:
  ProxObjective(const F& base, Vector center, double sigma) : base_(&base), center_(std::move(center)), sigma_(sigma) {
    require(sigma_ >= 0.0, ErrorCode::InvalidArgument, "sigma must be nonnegative");
    require(static_cast<Index>(center_.size()) == base.dim(), ErrorCode::DimensionMismatch, "proximal center");
  }

  Index size() const { return base_->size(); }
  Index dim() const { return base_->dim(); }
  const F& base() const { return *base_; }
  const Vector& center() const { return center_; }
  double sigma() const { return sigma_; }

  double value(Index i, const Vector& x) const {
    return base_->value(i, x) + 0.5 * sigma_ * (x - center_).squaredNorm();
  }

  void add_grad(Index i, const Vector& x, double scale, Vector& out) const {
    base_->add_grad(i, x, scale, out);
    if (sigma_ != 0.0) out.noalias() += (scale * sigma_) * (x - center_);
  }

 private:
  const F* base_;
  Vector center_;
  double sigma_;
};

namespace detail {
template <FiniteSum F>
void check_args(const F& f, Index i, const Vector& x) {
  require(i < f.size(), ErrorCode::IndexOutOfRange,
          "component " + std::to_string(i) + " of " + std::to_string(f.size()));
  require(static_cast<Index>(x.size()) == f.dim(), ErrorCode::DimensionMismatch,
          "x has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(f.dim()));
}
}  // namespace detail

template <FiniteSum F>
double component_value(const F& f, Index i, const Vector& x) {
  detail::check_args(f, i, x);
  return f.value(i, x);
}

template <FiniteSum F>
Vector component_grad(const F& f, Index i, const Vector& x) {
  detail::check_args(f, i, x);
  Vector g = Vector::Zero(static_cast<Eigen::Index>(f.dim()));
  f.add_grad(i, x, 1.0, g);
  return g;
}

template <FiniteSum F>
double full_value(const F& f, const Vector& x) {
  require(static_cast<Index>(x.size()) == f.dim(), ErrorCode::DimensionMismatch, "full_value");
  double s = 0.0;
  for (Index i = 0; i < f.size(); ++i) s += f.value(i, x);
  return s / static_cast<double>(f.size());
}

template <FiniteSum F>
Vector full_gradient(const F& f, const Vector& x) {
  require(static_cast<Index>(x.size()) == f.dim(), ErrorCode::DimensionMismatch, "full_gradient");
  Vector g = Vector::Zero(static_cast<Eigen::Index>(f.dim()));
  for (Index i = 0; i < f.size(); ++i) f.add_grad(i, x, 1.0, g);
  return g / static_cast<double>(f.size());
}

/// grad f_i(x) + sigma (x - y).
template <FiniteSum F>
Vector prox_component_grad(const F& f, Index i, const Vector& x, const Vector& y, double sigma) {
  require(static_cast<Index>(y.size()) == f.dim(), ErrorCode::DimensionMismatch, "proximal center");
  require(sigma >= 0.0, ErrorCode::InvalidArgument, "sigma must be nonnegative");
  Vector g = component_grad(f, i, x);
  if (sigma != 0.0) g.noalias() += sigma * (x - y);
  return g;
}

/// Which curvature convention to use for the square loss; the two only differ
/// by the factor 2 in phi'' = 2 for (a^T x - b)^2.
enum class GammaConvention {
  Curvature,  // gamma = 1 / sup phi'', so L = 2 max||a||^2 + lambda for square loss
  Unit,       // gamma = 1 for square loss, L = max||a||^2 + lambda
};

/// Inverse smoothness of the scalar loss.
inline double loss_gamma(LossKind loss, GammaConvention conv = GammaConvention::Curvature) {
  switch (loss) {
    case LossKind::Square: return conv == GammaConvention::Curvature ? 0.5 : 1.0;
    case LossKind::Logistic: return 4.0;
    case LossKind::SmoothHinge: return 1.0;
  }
  return 1.0;
}

/// L = max_i ||a_i||^2 / gamma + lambda, mu = lambda.
inline SmoothnessInfo estimate_constants(const ErmObjective& f, double gamma) {
  require(f.lambda() > 0.0, ErrorCode::StrongConvexityUnavailable, "lambda = 0 gives no strong convexity bound");
  require(gamma > 0.0, ErrorCode::InvalidArgument, "gamma must be positive");
  SmoothnessInfo info;
  info.L = f.max_sq_norm() / gamma + f.lambda();
  info.mu = f.lambda();
  info.kappa = info.L / info.mu;
  return info;
}

inline SmoothnessInfo estimate_constants(const ErmObjective& f) { return estimate_constants(f, loss_gamma(f.loss())); }

/// Condition number of the proximal function, (L + sigma) / (mu + sigma).
inline double prox_condition_number(const SmoothnessInfo& info, double sigma) {
  return (info.L + sigma) / (info.mu + sigma);
}

}  // namespace dsvrg

#pragma once

#include <limits>
#include <vector>

#include "nextmp/env.hpp"

namespace nextmp {

// Radial basis kernel k(a, b) = exp(-|a-b|^2 / (2 h^2)).
struct RbfKernel {
  double bandwidth = 0.1;
  double operator()(const Config& a, const Config& b) const;
  // k evaluated from a squared distance.
  double from_sq(double d2) const;
};

enum class UcbKind { KernelSmoothing, GaussianProcess };

// Selected-node history backing the confidence score
//   phi(s) = rbar_t(s) + lambda * sigma_t(s)
// in its kernel-smoothing and Gaussian-process parametrizations. The GP
// variant keeps a Cholesky factor of (K + alpha I) that is extended
// incrementally on every update.
class UcbHistory {
 public:
  explicit UcbHistory(UcbKind kind = UcbKind::KernelSmoothing,
                      RbfKernel kernel = {}, double lambda = 1.0,
                      double alpha = 1e-3, std::size_t capacity = 500);

  UcbKind kind() const { return kind_; }
  std::size_t size() const { return points_.size(); }
  double lambda() const { return lambda_; }

  // Appends (s, reward). Entries beyond the capacity are ignored so the
  // dense GP factor stays bounded by the sample budget.
  void update(const Config& s, double reward);

  // phi(s) under the configured parametrization.
  double score(const Config& s) const;

  double ks_score(const Config& s) const;
  double gp_score(const Config& s) const;

  // Rebuilds the GP factorization from scratch (consistency check hook).
  void refactorize();

  static constexpr double kEmptySentinel =
      std::numeric_limits<double>::infinity();
  static constexpr double kWeightFloor = 1e-8;

 private:
  bool try_gp_extend();

  UcbKind kind_;
  RbfKernel kernel_;
  double lambda_;
  double alpha_;
  std::size_t capacity_;

  std::vector<Config> points_;
  std::vector<double> rewards_;

  // Kernel smoothing: running sum over history of self-weights w(s') so the
  // exploration numerator log(sum w) is O(1) per query.
  double weight_total_ = 0.0;

  // Gaussian process: row-major lower-triangular factor L of (K + alpha I)
  // and z = L^{-1} r, both extended per update.
  std::vector<double> chol_;
  std::vector<double> z_;
};

void ucb_update(UcbHistory& hist, const Config& s, double reward);
double ks_ucb_score(const UcbHistory& hist, const Config& s);
double gp_ucb_score(const UcbHistory& hist, const Config& s);

}  // namespace nextmp

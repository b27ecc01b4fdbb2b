#include "nextmp/ucb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nextmp {

double RbfKernel::operator()(const Config& a, const Config& b) const {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return from_sq(d2);
}

double RbfKernel::from_sq(double d2) const {
  return std::exp(-d2 / (2.0 * bandwidth * bandwidth));
}

UcbHistory::UcbHistory(UcbKind kind, RbfKernel kernel, double lambda,
                       double alpha, std::size_t capacity)
    : kind_(kind),
      kernel_(kernel),
      lambda_(lambda),
      alpha_(alpha),
      capacity_(capacity) {
  if (kernel_.bandwidth <= 0.0)
    throw std::invalid_argument("UcbHistory: bandwidth must be > 0");
  if (lambda_ < 0.0)
    throw std::invalid_argument("UcbHistory: lambda must be >= 0");
  if (alpha_ <= 0.0)
    throw std::invalid_argument("UcbHistory: alpha must be > 0");
}

void UcbHistory::update(const Config& s, double reward) {
  if (points_.size() >= capacity_) return;
  // Self-weight contributions: the new point adds k(s,s) = 1 plus twice its
  // cross weight with every existing point.
  double cross = 0.0;
  for (const auto& sp : points_) cross += kernel_(sp, s);
  weight_total_ += 1.0 + 2.0 * cross;

  points_.push_back(s);
  rewards_.push_back(reward);
  if (kind_ == UcbKind::GaussianProcess && !try_gp_extend()) {
    // Numerical drift made the incremental extension lose positive
    // definiteness; rebuild the whole factor (throws if still not PD).
    refactorize();
  }
}

bool UcbHistory::try_gp_extend() {
  const std::size_t t = points_.size() - 1;  // entries already factored
  const Config& s = points_.back();
  std::vector<double> k_vec(t);
  for (std::size_t i = 0; i < t; ++i) k_vec[i] = kernel_(points_[i], s);

  // Forward-substitute l = L^{-1} k_vec; the new diagonal entry comes from
  // k(s,s) + alpha - |l|^2.
  std::vector<double> l(t);
  for (std::size_t i = 0; i < t; ++i) {
    double acc = k_vec[i];
    const double* row = chol_.data() + i * (i + 1) / 2;
    for (std::size_t j = 0; j < i; ++j) acc -= row[j] * l[j];
    l[i] = acc / row[i];
  }
  double diag2 = 1.0 + alpha_;
  for (double v : l) diag2 -= v * v;
  if (!(diag2 > 0.0)) return false;
  const double diag = std::sqrt(diag2);

  chol_.insert(chol_.end(), l.begin(), l.end());
  chol_.push_back(diag);

  double zr = rewards_.back();
  for (std::size_t j = 0; j < t; ++j) zr -= l[j] * z_[j];
  z_.push_back(zr / diag);
  return true;
}

void UcbHistory::refactorize() {
  const std::size_t t = points_.size();
  std::vector<double> K(t * t);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = kernel_(points_[i], points_[j]);
      K[i * t + j] = v;
      K[j * t + i] = v;
    }
    K[i * t + i] = 1.0 + alpha_;
  }
  chol_.assign(t * (t + 1) / 2, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    double* row_i = chol_.data() + i * (i + 1) / 2;
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = K[i * t + j];
      const double* row_j = chol_.data() + j * (j + 1) / 2;
      for (std::size_t m = 0; m < j; ++m) acc -= row_i[m] * row_j[m];
      if (i == j) {
        if (!(acc > 0.0))
          throw std::runtime_error(
              "UcbHistory: Gram matrix not positive definite");
        row_i[j] = std::sqrt(acc);
      } else {
        row_i[j] = acc / row_j[j];
      }
    }
  }
  z_.assign(t, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    double acc = rewards_[i];
    const double* row = chol_.data() + i * (i + 1) / 2;
    for (std::size_t j = 0; j < i; ++j) acc -= row[j] * z_[j];
    z_[i] = acc / row[i];
  }
}

double UcbHistory::ks_score(const Config& s) const {
  const std::size_t t = points_.size();
  if (t == 0) return kEmptySentinel;

  // Stabilized kernel average: shift exponents by the smallest squared
  // distance so the largest weight is exactly 1 and the convex combination
  // never degenerates to 0/0.
  std::vector<double> d2(t);
  double min_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < s.size(); ++c) {
      const double d = points_[i][c] - s[c];
      acc += d * d;
    }
    d2[i] = acc;
    min_d2 = std::min(min_d2, acc);
  }
  double shifted_sum = 0.0, shifted_dot = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    const double w = kernel_.from_sq(d2[i] - min_d2);
    shifted_sum += w;
    shifted_dot += w * rewards_[i];
  }
  const double rbar = shifted_dot / shifted_sum;

  const double w_query =
      std::max(kernel_.from_sq(min_d2) * shifted_sum, kWeightFloor);
  const double sigma =
      std::sqrt(std::max(std::log(std::max(weight_total_, 1.0)), 0.0) /
                w_query);
  return rbar + lambda_ * sigma;
}

double UcbHistory::gp_score(const Config& s) const {
  const std::size_t t = points_.size();
  if (t == 0) return lambda_ * 1.0;  // k(s,s) = 1 for the RBF kernel

  std::vector<double> k_vec(t);
  for (std::size_t i = 0; i < t; ++i) k_vec[i] = kernel_(points_[i], s);
  // v = L^{-1} k_vec
  std::vector<double> v(t);
  for (std::size_t i = 0; i < t; ++i) {
    double acc = k_vec[i];
    const double* row = chol_.data() + i * (i + 1) / 2;
    for (std::size_t j = 0; j < i; ++j) acc -= row[j] * v[j];
    v[i] = acc / row[i];
  }
  double rbar = 0.0, v2 = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    rbar += v[i] * z_[i];
    v2 += v[i] * v[i];
  }
  const double sigma2 = std::max(1.0 - v2, 0.0);
  return rbar + lambda_ * std::sqrt(sigma2);
}

double UcbHistory::score(const Config& s) const {
  return kind_ == UcbKind::KernelSmoothing ? ks_score(s) : gp_score(s);
}

void ucb_update(UcbHistory& hist, const Config& s, double reward) {
  hist.update(s, reward);
}

double ks_ucb_score(const UcbHistory& hist, const Config& s) {
  return hist.ks_score(s);
}

double gp_ucb_score(const UcbHistory& hist, const Config& s) {
  return hist.gp_score(s);
}

}  // namespace nextmp

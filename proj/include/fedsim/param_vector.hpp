// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fedsim {

/// Flat model parameter vector. Every entry is finite; arithmetic is only
/// defined between vectors of equal dimension and throws
/// std::invalid_argument otherwise.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0);
  explicit ParamVector(std::vector<double> values);
  ParamVector(std::initializer_list<double> values);

  static ParamVector zeros(std::size_t dim) { return ParamVector(dim, 0.0); }

  std::size_t dim() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const std::vector<double>& raw() const noexcept { return values_; }

  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double scale);

  /// this += scale * other
  ParamVector& axpy(double scale, const ParamVector& other);

  double dot(const ParamVector& other) const;
  double norm() const;
  bool all_finite() const noexcept;

  /// Throws std::domain_error naming `what` if any entry is NaN or Inf.
  void require_finite(const char* what) const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

ParamVector operator+(ParamVector lhs, const ParamVector& rhs);
ParamVector operator-(ParamVector lhs, const ParamVector& rhs);
ParamVector operator*(double scale, ParamVector v);

/// Throws std::invalid_argument when the two dimensions differ.
void require_same_dim(const ParamVector& a, const ParamVector& b, const char* what);

}  // namespace fedsim

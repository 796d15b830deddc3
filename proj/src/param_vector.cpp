// SPDX-License-Identifier: Apache-2.0
#include "fedsim/param_vector.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsim {

ParamVector::ParamVector(std::size_t dim, double fill) : values_(dim, fill) {
  require_finite("ParamVector fill value");
}

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
  require_finite("ParamVector values");
}

ParamVector::ParamVector(std::initializer_list<double> values) : values_(values) {
  require_finite("ParamVector values");
}

void require_same_dim(const ParamVector& a, const ParamVector& b, const char* what) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
  }
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_same_dim(*this, other, "ParamVector +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_dim(*this, other, "ParamVector -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double scale) {
  for (double& v : values_) v *= scale;
  return *this;
}

ParamVector& ParamVector::axpy(double scale, const ParamVector& other) {
  require_same_dim(*this, other, "ParamVector axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
  return *this;
}

double ParamVector::dot(const ParamVector& other) const {
  require_same_dim(*this, other, "ParamVector dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) acc += values_[i] * other.values_[i];
  return acc;
}

double ParamVector::norm() const { return std::sqrt(dot(*this)); }

bool ParamVector::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void ParamVector::require_finite(const char* what) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw std::domain_error(std::string(what) + ": non-finite entry at index " + std::to_string(i));
    }
  }
}

ParamVector operator+(ParamVector lhs, const ParamVector& rhs) { return lhs += rhs; }
ParamVector operator-(ParamVector lhs, const ParamVector& rhs) { return lhs -= rhs; }
ParamVector operator*(double scale, ParamVector v) { return v *= scale; }

}  // namespace fedsim

/* Copyright 2026 The fsadv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "fsadv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fsadv/errors.hpp"

namespace fsadv {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kDegenerate: return "degenerate-vector error";
    case ErrorKind::kUnsupported: return "unsupported-bundle error";
    case ErrorKind::kLookup: return "lookup error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kNotFound: return "not-found error";
    case ErrorKind::kIntegrity: return "integrity error";
    case ErrorKind::kNetwork: return "network error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kMigration: return "migration error";
    case ErrorKind::kBuild: return "build error";
  }
  return "error";
}

std::string Shape::str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" +
         std::to_string(width);
}

Tensor3::Tensor3(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw Error(ErrorKind::kValidation, "tensor",
                "data length " + std::to_string(data_.size()) +
                    " does not match shape " + shape_.str());
  }
}

double Tensor3::min() const { return *std::min_element(data_.begin(), data_.end()); }
double Tensor3::max() const { return *std::max_element(data_.begin(), data_.end()); }

double Tensor3::mean() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0) /
         static_cast<double>(data_.size());
}

double Tensor3::l1_norm() const {
  double s = 0.0;
  for (double v : data_) s += std::abs(v);
  return s;
}

bool Tensor3::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor3& Tensor3::operator+=(const Tensor3& other) { return axpy(1.0, other); }

Tensor3& Tensor3::scale(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor3& Tensor3::axpy(double s, const Tensor3& other) {
  if (other.shape_ != shape_) {
    throw Error(ErrorKind::kValidation, "tensor",
                "shape mismatch " + shape_.str() + " vs " + other.shape_.str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
  return *this;
}

double linf_distance(const Tensor3& a, const Tensor3& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::kValidation, "tensor", "shape mismatch");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace fsadv

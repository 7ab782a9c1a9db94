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

#ifndef FSADV_TENSOR_HPP_
#define FSADV_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fsadv {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  bool valid() const { return channels > 0 && height > 0 && width > 0; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense C x H x W array in channel-major order. Used both for images
// (pixels in [0,1]) and for gradients of the same shape.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Shape shape, double fill = 0.0)
      : shape_(shape), data_(shape.size(), fill) {}
  Tensor3(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> channel(int c) {
    return std::span<double>(data_).subspan(c * shape_.plane(), shape_.plane());
  }
  std::span<const double> channel(int c) const {
    return std::span<const double>(data_).subspan(c * shape_.plane(),
                                                  shape_.plane());
  }

  double min() const;
  double max() const;
  double mean() const;
  double l1_norm() const;
  bool all_finite() const;

  Tensor3& operator+=(const Tensor3& other);
  Tensor3& scale(double s);
  // this += s * other
  Tensor3& axpy(double s, const Tensor3& other);

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
  }

  Shape shape_;
  std::vector<double> data_;
};

using ImageTensor = Tensor3;
using GradTensor = Tensor3;

double linf_distance(const Tensor3& a, const Tensor3& b);

}  // namespace fsadv

#endif  // FSADV_TENSOR_HPP_

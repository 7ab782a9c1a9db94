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


#ifndef FSADV_TESTS_TEST_SUPPORT_HPP_
#define FSADV_TESTS_TEST_SUPPORT_HPP_

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fsadv/model_zoo.hpp"
#include "fsadv/rng.hpp"
#include "fsadv/tensor.hpp"

namespace fsadv::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern =
        (std::filesystem::temp_directory_path() / "fsadv-test-XXXXXX").string();
    path_ = ::mkdtemp(pattern.data());
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::string& path() const { return path_; }
  std::string operator/(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Tensor3 random_tensor(Shape shape, RandomStream& rng, double lo = 0.0,
                             double hi = 1.0) {
  Tensor3 t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Linear functional of an encoding, J = cf . features + cp . projected.
struct LinearProbe {
  std::vector<double> cf;
  std::vector<double> cp;

  double operator()(const Encoding& enc) const {
    double v = 0.0;
    for (std::size_t i = 0; i < cf.size(); ++i) v += cf[i] * enc.features[i];
    for (std::size_t i = 0; i < cp.size(); ++i) v += cp[i] * enc.projected[i];
    return v;
  }
};

inline LinearProbe random_probe(const EncoderBundle& bundle, RandomStream& rng) {
  LinearProbe p;
  for (int i = 0; i < bundle.info().feature_dim; ++i) p.cf.push_back(rng.normal());
  for (int i = 0; i < bundle.info().embed_dim; ++i) p.cp.push_back(rng.normal());
  return p;
}

inline Objective as_objective(const LinearProbe& probe) {
  return [probe](const ImageTensor&, const Encoding& enc, ObjectiveGrad& grad) {
    grad.d_features = probe.cf;
    grad.d_projected = probe.cp;
    return probe(enc);
  };
}

// Relative disagreement between the analytic directional derivative and a
// central difference with step h along d.
inline double directional_error(const EncoderBundle& bundle, const LinearProbe& probe,
                                const ImageTensor& x, const Tensor3& d, double h = 1e-5) {
  ValueAndGrad vg = value_and_grad(bundle, as_objective(probe), x);
  double analytic = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) analytic += vg.grad[i] * d[i];
  ImageTensor xp = x, xm = x;
  xp.axpy(h, d);
  xm.axpy(-h, d);
  const double numeric = (probe(bundle.forward(xp)) - probe(bundle.forward(xm))) / (2.0 * h);
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace fsadv::testing

#endif  // FSADV_TESTS_TEST_SUPPORT_HPP_

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "kdgan/gan_toy.hpp"

namespace kdgan {

struct AdamSettings {
  double lr = 2e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Adam with bias correction; moments are kept per ParamSet entry.
class Adam {
 public:
  Adam() = default;
  Adam(const ParamSet& params, AdamSettings settings);

  void step(ParamSet& params, const std::vector<Matrix>& grads);

  const AdamSettings& settings() const { return settings_; }
  std::int64_t t() const { return t_; }
  std::vector<Matrix>& m() { return m_; }
  std::vector<Matrix>& v() { return v_; }
  const std::vector<Matrix>& m() const { return m_; }
  const std::vector<Matrix>& v() const { return v_; }
  void set_t(std::int64_t t) { t_ = t; }

 private:
  AdamSettings settings_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// sqrt of the summed squares of all gradient entries.
double global_norm(const std::vector<Matrix>& grads);

}  // namespace kdgan

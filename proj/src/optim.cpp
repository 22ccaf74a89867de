// SPDX-License-Identifier: Apache-2.0
#include "kdgan/optim.hpp"

#include <cmath>

#include "kdgan/errors.hpp"

namespace kdgan {

Adam::Adam(const ParamSet& params, AdamSettings settings) : settings_(settings) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
    v_.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
  }
}

void Adam::step(ParamSet& params, const std::vector<Matrix>& grads) {
  if (grads.size() != params.size() || m_.size() != params.size())
    throw InvalidArgument("Adam: gradient list does not match parameters");
  ++t_;
  const double b1 = settings_.beta1, b2 = settings_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i];
    if (g.rows() != m_[i].rows() || g.cols() != m_[i].cols())
      throw InvalidArgument("Adam: gradient shape mismatch for '" + params.name(i) + "'");
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    params.value(i).array() -=
        settings_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + settings_.eps);
  }
}

double global_norm(const std::vector<Matrix>& grads) {
  double s = 0.0;
  for (const auto& g : grads) s += g.squaredNorm();
  return std::sqrt(s);
}

}  // namespace kdgan

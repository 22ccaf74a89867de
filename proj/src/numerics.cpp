// SPDX-License-Identifier: Apache-2.0
#include "kdgan/numerics.hpp"

#include <cmath>
#include <sstream>

#include "kdgan/errors.hpp"

namespace kdgan {

double l1_mean(const FeatureBatch& a, const FeatureBatch& b) { return l1_mean(a.data(), b.data()); }

double l1_mean(const Matrix& a, const Matrix& b) {
  return ad::l1_mean(ad::Var::constant(a), ad::Var::constant(b)).item();
}

Matrix row_l2_normalize(const Matrix& m, double eps) {
  return ad::row_l2_normalize(ad::Var::constant(m), eps).value();
}

double cosine(const Vector& u, const Vector& v, double eps) {
  if (u.size() != v.size())
    throw InvalidArgument("cosine: length mismatch " + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()));
  const double nu = u.norm(), nv = v.norm();
  if (!(nu > eps)) throw DegenerateInput("cosine: first vector has zero norm", 0);
  if (!(nv > eps)) throw DegenerateInput("cosine: second vector has zero norm", 1);
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& theta,
                            double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_gradient: step must be positive");
  Vector grad(theta.size());
  Vector x = theta;
  for (Index i = 0; i < theta.size(); ++i) {
    x(i) = theta(i) + h;
    const double fp = f(x);
    x(i) = theta(i) - h;
    const double fm = f(x);
    x(i) = theta(i);
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericFailure("finite_diff_gradient: non-finite value at coordinate " +
                           std::to_string(i));
    grad(i) = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

void GradCheckReport::merge(const GradCheckReport& other, const std::string& prefix) {
  max_rel_error = std::max(max_rel_error, other.max_rel_error);
  max_abs_error = std::max(max_abs_error, other.max_abs_error);
  for (const auto& [name, err] : other.per_parameter_errors) {
    double& slot = per_parameter_errors[prefix + name];
    slot = std::max(slot, err);
  }
}

std::string GradCheckReport::to_string() const {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific;
  os << "max_rel_error=" << max_rel_error << " max_abs_error=" << max_abs_error << "\n";
  for (const auto& [name, err] : per_parameter_errors) os << "  " << name << ": " << err << "\n";
  return os.str();
}

GradCheckReport check_gradients(const std::function<ad::Var(const std::vector<ad::Var>&)>& fn,
                                const std::vector<NamedInput>& inputs, double h) {
  std::vector<ad::Var> leaves;
  leaves.reserve(inputs.size());
  for (const auto& in : inputs) leaves.push_back(ad::Var::leaf(in.value, in.check));
  ad::Var out = fn(leaves);
  ad::backward(out);

  GradCheckReport report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!inputs[k].check) continue;
    const Matrix analytic = leaves[k].grad();
    const Matrix& base = inputs[k].value;
    auto f = [&](const Vector& theta) {
      std::vector<ad::Var> args;
      args.reserve(inputs.size());
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        if (j == k) {
          Matrix m = Eigen::Map<const Matrix>(theta.data(), base.rows(), base.cols());
          args.push_back(ad::Var::constant(std::move(m)));
        } else {
          args.push_back(ad::Var::constant(inputs[j].value));
        }
      }
      return fn(args).item();
    };
    const Vector theta = Eigen::Map<const Vector>(base.data(), base.size());
    const Vector numeric = finite_diff_gradient(f, theta, h);
    double worst = 0.0;
    for (Index i = 0; i < numeric.size(); ++i) {
      const double a = analytic.data()[i];
      report.max_abs_error = std::max(report.max_abs_error, std::abs(a - numeric(i)));
      worst = std::max(worst, relative_error(a, numeric(i)));
    }
    report.per_parameter_errors[inputs[k].name] = worst;
    report.max_rel_error = std::max(report.max_rel_error, worst);
  }
  return report;
}

}  // namespace kdgan

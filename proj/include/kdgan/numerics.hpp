// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kdgan/autodiff.hpp"
#include "kdgan/tensor.hpp"

namespace kdgan {

inline constexpr double kNormEps = 1e-12;

/// Mean of |a - b| over all entries.
double l1_mean(const FeatureBatch& a, const FeatureBatch& b);
double l1_mean(const Matrix& a, const Matrix& b);

Matrix row_l2_normalize(const Matrix& m, double eps = kNormEps);

double cosine(const Vector& u, const Vector& v, double eps = kNormEps);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
/// Throws NumericFailure naming the coordinate if f is non-finite.
Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& theta,
                            double h = 1e-5);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::map<std::string, double> per_parameter_errors;  // max relative error per input

  void merge(const GradCheckReport& other, const std::string& prefix = "");
  std::string to_string() const;
};

/// Denominator floor used by relative_error: below this magnitude both
/// gradients are treated as zero-scale and the error becomes absolute.
inline constexpr double kGradCheckFloor = 1e-6;

double relative_error(double analytic, double numeric);

/// A named matrix input to a differentiable function under test.
struct NamedInput {
  std::string name;
  Matrix value;
  bool check = true;  // false: passed as a constant, gradient not compared
};

/// Compares reverse-mode gradients of `fn` against central differences for
/// every input marked `check`. `fn` receives leaf Vars in input order.
GradCheckReport check_gradients(const std::function<ad::Var(const std::vector<ad::Var>&)>& fn,
                                const std::vector<NamedInput>& inputs, double h = 1e-5);

}  // namespace kdgan

#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace mmom {

// Regularized incomplete beta I_x(a, b), continued fraction to 1e-10.
double incomplete_beta(double a, double b, double x);

// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

struct TTestResult {
  enum class Kind {
    kValue,         // t, df and p are numbers
    kNoDifference,  // every paired difference is zero
    kZeroVariance,  // constant non-zero difference: t is infinite, p taken as 0
  };
  Kind kind = Kind::kValue;
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  std::string warning;

  nlohmann::json to_json() const;
};

// Paired two-sided t-test on a - b. Throws ShapeError for unequal lengths or
// fewer than two pairs.
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mmom

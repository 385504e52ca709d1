#include "mmom/stats.h"

#include <cmath>
#include <limits>

#include "mmom/errors.h"

namespace mmom {

namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-10;
  constexpr int kMaxIter = 10000;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) return h;
  }
  throw NumericError("incomplete beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw ShapeError("incomplete beta: a and b must be positive");
  if (x < 0.0 || x > 1.0) throw ShapeError("incomplete beta: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                                b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (df <= 0.0) throw ShapeError("student t: degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

nlohmann::json TTestResult::to_json() const {
  switch (kind) {
    case Kind::kNoDifference:
      return {{"result", "no difference"}};
    case Kind::kZeroVariance:
      return {{"result", "zero variance"}, {"t", t > 0 ? "inf" : "-inf"}, {"df", df}, {"p", 0.0},
              {"warning", warning}};
    case Kind::kValue:
      break;
  }
  return {{"result", "value"}, {"t", t}, {"df", df}, {"p", p}};
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("paired t-test: vectors of length " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  const std::size_t n = a.size();
  if (n < 2) throw ShapeError("paired t-test: needs at least two pairs");

  std::vector<double> d(n);
  bool all_zero = true;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = a[i] - b[i];
    if (d[i] != 0.0) all_zero = false;
  }
  TTestResult r;
  r.df = static_cast<double>(n - 1);
  if (all_zero) {
    r.kind = TTestResult::Kind::kNoDifference;
    return r;
  }
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / r.df);
  if (sd == 0.0) {
    r.kind = TTestResult::Kind::kZeroVariance;
    r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p = 0.0;
    r.warning = "all paired differences are equal; the t statistic is unbounded";
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

}  // namespace mmom

#pragma once

#include <span>

#include "zoneforge/core/errors.hpp"

namespace zoneforge::evalkit {

/// Regularized incomplete beta function I_x(a, b), evaluated by the Lentz
/// continued fraction to an absolute tolerance of 1e-12.
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value of a Student-t statistic: p = I_{nu/(nu+t^2)}(nu/2, 1/2).
double student_t_two_sided_p(double t, double nu);

struct TTestResult {
    double t = 0.0;
    double dof = 0.0; // Welch-Satterthwaite, real-valued
    double p = 1.0;   // two-sided
};

/// Welch's unequal-variance t-test. Requires >= 2 samples per side and a
/// positive variance in at least one sample (StatsError otherwise).
TTestResult welch_t(std::span<const double> x, std::span<const double> y);

/// Paired t-test on elementwise differences (one-sample t against zero mean).
TTestResult paired_t(std::span<const double> x, std::span<const double> y);

} // namespace zoneforge::evalkit

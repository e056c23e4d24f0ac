#pragma once

#include <span>

namespace pcomm::bench {

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
};

// CDF of Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

// Inverse of student_t_cdf for p in (0, 1); accurate to ~1e-10.
double student_t_quantile(double p, double dof);

// Two-sided interval mean +- t_{(1+c)/2, n-1} * s / sqrt(n).
// Throws DomainError for fewer than two samples or c outside (0, 1).
ConfidenceInterval student_t_ci(std::span<const double> samples, double confidence);

}  // namespace pcomm::bench

#include "lgts/gp_forecast.hpp"

#include "lgts/errors.hpp"

namespace lgts {

GpConditionResult gp_condition(const KernelSpec& spec, std::span<const double> obs_times,
                               std::span<const double> obs_values,
                               std::span<const double> query_times, double jitter) {
  spec.validate();
  if (query_times.empty()) throw ValidationError("gp_condition: empty query");
  if (obs_times.size() != obs_values.size())
    throw ValidationError("gp_condition: observed times/values length mismatch");

  int nq = static_cast<int>(query_times.size());
  Mat kqq(nq, nq);
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j < nq; ++j) kqq(i, j) = kernel_value(spec, query_times[i], query_times[j]);

  GpConditionResult out;
  if (obs_times.empty()) {
    out.mean.assign(nq, 0.0);
    out.cov = std::move(kqq);
    return out;
  }

  int no = static_cast<int>(obs_times.size());
  KernelMatrix koo = kernel_matrix(spec, obs_times, jitter);

  Mat koq(no, nq);
  for (int i = 0; i < no; ++i)
    for (int j = 0; j < nq; ++j) koq(i, j) = kernel_value(spec, obs_times[i], query_times[j]);

  // A = L^{-1} K(o,q), alpha = L^{-1} z, so
  // mean = A^T alpha and cov = K(q,q) - A^T A.
  Mat a = tri_solve_mat(koo.chol, koq, /*lower=*/true);
  std::vector<double> alpha = tri_solve(koo.chol, obs_values, /*lower=*/true);

  out.mean.assign(nq, 0.0);
  for (int j = 0; j < nq; ++j)
    for (int i = 0; i < no; ++i) out.mean[j] += a(i, j) * alpha[i];

  out.cov = Mat(nq, nq);
  for (int i = 0; i < nq; ++i)
    for (int j = i; j < nq; ++j) {
      double s = 0.0;
      for (int l = 0; l < no; ++l) s += a(l, i) * a(l, j);
      double v = kqq(i, j) - s;
      out.cov(i, j) = v;
      out.cov(j, i) = v;
    }
  return out;
}

}  // namespace lgts

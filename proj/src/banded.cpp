#include "lgts/banded.hpp"

#include <cmath>
#include <numbers>

#include "lgts/errors.hpp"

namespace lgts {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// x = B^{-1} r by back substitution (B upper bi-diagonal).
std::vector<double> bidiag_solve(std::span<const double> bd, std::span<const double> bo,
                                 std::span<const double> r) {
  int n = static_cast<int>(bd.size());
  std::vector<double> x(n);
  x[n - 1] = r[n - 1] / bd[n - 1];
  for (int t = n - 2; t >= 0; --t) x[t] = (r[t] - bo[t] * x[t + 1]) / bd[t];
  return x;
}

// u = B^{-T} r by forward substitution (B^T lower bi-diagonal).
std::vector<double> bidiag_solve_t(std::span<const double> bd, std::span<const double> bo,
                                   std::span<const double> r) {
  int n = static_cast<int>(bd.size());
  std::vector<double> u(n);
  u[0] = r[0] / bd[0];
  for (int t = 1; t < n; ++t) u[t] = (r[t] - bo[t - 1] * u[t - 1]) / bd[t];
  return u;
}

void check_nonzero_diag(std::span<const double> bd, const char* where) {
  for (size_t i = 0; i < bd.size(); ++i)
    if (bd[i] == 0.0)
      throw NumericError(std::string(where) + ": zero b_diag entry at index " + std::to_string(i));
}

}  // namespace

void BandedGaussian::validate() const {
  int n = t_w();
  if (n < 1) throw ValidationError("BandedGaussian: empty mean");
  if (b_diag.numel() != n)
    throw ValidationError("BandedGaussian: b_diag length " + std::to_string(b_diag.numel()) +
                          " != t_w " + std::to_string(n));
  if (b_off.numel() != n - 1)
    throw ValidationError("BandedGaussian: b_off length " + std::to_string(b_off.numel()) +
                          " != t_w-1");
}

BandedGaussian BandedGaussian::from_values(std::vector<double> mu, std::vector<double> b_diag,
                                           std::vector<double> b_off) {
  BandedGaussian g;
  int n = static_cast<int>(mu.size());
  g.mu = Tensor::constant(std::move(mu), {n});
  g.b_diag = Tensor::constant(std::move(b_diag), {n});
  g.b_off = Tensor::constant(std::move(b_off), {n - 1});
  g.validate();
  return g;
}

BandedDense band_to_dense(const BandedGaussian& g) {
  g.validate();
  int n = g.t_w();
  const auto& bd = g.b_diag.values();
  const auto& bo = g.b_off.values();
  check_nonzero_diag(bd, "band_to_dense");
  Mat b(n, n);
  for (int t = 0; t < n; ++t) {
    b(t, t) = bd[t];
    if (t + 1 < n) b(t, t + 1) = bo[t];
  }
  BandedDense out;
  out.precision = matmul(transpose(b), b);
  out.covariance = chol_inverse(cholesky(out.precision));
  return out;
}

Tensor sample_banded(const BandedGaussian& g, std::span<const double> noise) {
  g.validate();
  int n = g.t_w();
  if (static_cast<int>(noise.size()) != n)
    throw ValidationError("sample_banded: noise length " + std::to_string(noise.size()) +
                          " != t_w " + std::to_string(n));
  const auto& bd = g.b_diag.values();
  const auto& bo = g.b_off.values();
  check_nonzero_diag(bd, "sample_banded");

  std::vector<double> x = bidiag_solve(bd, bo, noise);
  std::vector<double> out(n);
  for (int t = 0; t < n; ++t) out[t] = g.mu.at(t) + x[t];

  Tensor mu = g.mu, b_diag = g.b_diag, b_off = g.b_off;
  return make_op(
      "sample_banded", {n}, std::move(out), {mu, b_diag, b_off},
      [mu, b_diag, b_off, x, n](const std::vector<double>& grad) mutable {
        if (mu.requires_grad()) mu.accumulate_grad(grad);
        if (!b_diag.requires_grad() && !b_off.requires_grad()) return;
        // d(mu + B^{-1} eps) pulled back through the solve:
        // u = B^{-T} g, dL/dB_ij = -u_i x_j on the band.
        std::vector<double> u = bidiag_solve_t(b_diag.values(), b_off.values(), grad);
        if (b_diag.requires_grad()) {
          auto& gd = b_diag.grad_buffer();
          for (int t = 0; t < n; ++t) gd[t] -= u[t] * x[t];
        }
        if (b_off.requires_grad()) {
          auto& go = b_off.grad_buffer();
          for (int t = 0; t + 1 < n; ++t) go[t] -= u[t] * x[t + 1];
        }
      });
}

Tensor log_prob_banded(const BandedGaussian& g, const Tensor& x) {
  g.validate();
  int n = g.t_w();
  if (x.numel() != n)
    throw ValidationError("log_prob_banded: x length " + std::to_string(x.numel()) + " != t_w " +
                          std::to_string(n));
  Tensor v = sub(x, g.mu);
  // (Bv)[t] = b_diag[t] v[t] + b_off[t] v[t+1]
  Tensor bv = mul(g.b_diag, v);
  if (n > 1) {
    Tensor tail = mul(g.b_off, slice(v, 0, 1, n - 1));
    bv = add(bv, concat({tail, Tensor::zeros({1})}, 0));
  }
  Tensor quad = sum(square(bv));
  // sum log|b_diag| written as 1/2 sum log(b^2) to stay sign-agnostic
  Tensor logdet = mul_const(sum(log(square(g.b_diag))), 0.5);
  return add_const(add(mul_const(quad, -0.5), logdet), -0.5 * n * kLog2Pi);
}

namespace {

// ||L^{-1} B^{-1}||_F^2 with L fixed; hand VJP into (b_diag, b_off).
Tensor banded_kl_trace(const Tensor& b_diag, const Tensor& b_off, const Mat& chol) {
  int n = b_diag.numel();
  const auto& bd = b_diag.values();
  const auto& bo = b_off.values();
  check_nonzero_diag(bd, "kl_banded_to_gp");

  // Columns of B^{-1} and L^{-1}B^{-1}.
  std::vector<std::vector<double>> xs(n), ys(n);
  std::vector<double> unit(n, 0.0);
  double trace = 0.0;
  for (int j = 0; j < n; ++j) {
    unit[j] = 1.0;
    xs[j] = bidiag_solve(bd, bo, unit);
    unit[j] = 0.0;
    ys[j] = tri_solve(chol, xs[j], /*lower=*/true);
    for (double y : ys[j]) trace += y * y;
  }

  Tensor tbd = b_diag, tbo = b_off;
  Mat lt = transpose(chol);
  return make_op(
      "banded_kl_trace", {1}, {trace}, {b_diag, b_off},
      [tbd, tbo, xs = std::move(xs), ys = std::move(ys), lt = std::move(lt),
       n](const std::vector<double>& grad) mutable {
        const double gs = grad[0];
        const auto& bd = tbd.values();
        const auto& bo = tbo.values();
        std::vector<double>* gd = tbd.requires_grad() ? &tbd.grad_buffer() : nullptr;
        std::vector<double>* go = tbo.requires_grad() ? &tbo.grad_buffer() : nullptr;
        if (!gd && !go) return;
        for (int j = 0; j < n; ++j) {
          // dF/dx_j = L^{-T}(2 y_j); pull through the bidiagonal solve.
          std::vector<double> r(n);
          for (int i = 0; i < n; ++i) r[i] = 2.0 * ys[j][i];
          std::vector<double> w = tri_solve(lt, r, /*lower=*/false);
          std::vector<double> u = bidiag_solve_t(bd, bo, w);
          if (gd)
            for (int t = 0; t < n; ++t) (*gd)[t] -= gs * u[t] * xs[j][t];
          if (go)
            for (int t = 0; t + 1 < n; ++t) (*go)[t] -= gs * u[t] * xs[j][t + 1];
        }
      });
}

// mu^T K^{-1} mu = ||L^{-1} mu||^2 with L fixed.
Tensor chol_quad_form(const Tensor& mu, const Mat& chol) {
  std::vector<double> v = tri_solve(chol, mu.values(), /*lower=*/true);
  double q = 0.0;
  for (double vi : v) q += vi * vi;
  Tensor tmu = mu;
  Mat lt = transpose(chol);
  return make_op("chol_quad_form", {1}, {q}, {mu},
                 [tmu, v = std::move(v), lt = std::move(lt)](const std::vector<double>& grad) mutable {
                   if (!tmu.requires_grad()) return;
                   std::vector<double> r(v.size());
                   for (size_t i = 0; i < v.size(); ++i) r[i] = 2.0 * v[i];
                   std::vector<double> w = tri_solve(lt, r, /*lower=*/false);
                   auto& gm = tmu.grad_buffer();
                   for (size_t i = 0; i < w.size(); ++i) gm[i] += grad[0] * w[i];
                 });
}

}  // namespace

Tensor kl_banded_to_gp(const BandedGaussian& g, const GpPriorDim& prior) {
  g.validate();
  int n = g.t_w();
  if (prior.t_w != n)
    throw ValidationError("kl_banded_to_gp: prior t_w " + std::to_string(prior.t_w) +
                          " != posterior t_w " + std::to_string(n));
  Tensor trace = banded_kl_trace(g.b_diag, g.b_off, prior.chol);
  Tensor quad = chol_quad_form(g.mu, prior.chol);
  // log det Sigma = -log det B^T B = -sum log b_diag^2
  Tensor neg_logdet_sigma = sum(log(square(g.b_diag)));
  Tensor kl = mul_const(add(add(trace, quad), neg_logdet_sigma), 0.5);
  return add_const(kl, 0.5 * (prior.logdet - n));
}

Tensor kl_global(const GlobalGaussian& g) {
  if (g.mean.numel() != g.log_var.numel())
    throw ValidationError("kl_global: mean/log_var disagree");
  // 1/2 sum (sigma^2 + mu^2 - 1 - log sigma^2)
  Tensor t = sub(add(exp(g.log_var), square(g.mean)), add_const(g.log_var, 1.0));
  return mul_const(sum(t), 0.5);
}

Tensor log_prob_diag(const Tensor& v, const GlobalGaussian& g) {
  if (v.numel() != g.mean.numel())
    throw ValidationError("log_prob_diag: dimension mismatch");
  Tensor r = sub(v, g.mean);
  Tensor quad = mul(square(r), exp(neg(g.log_var)));
  Tensor terms = add(quad, add_const(g.log_var, kLog2Pi));
  return mul_const(sum(terms), -0.5);
}

}  // namespace lgts

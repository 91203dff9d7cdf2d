#include "finhol/riemann.hpp"

#include <stdexcept>

namespace finhol {

ChristoffelEval christoffel_symbols(const FinslerModel& model, std::span<const double> x) {
  if (!model.is_riemannian())
    throw std::invalid_argument("christoffel_symbols: model is not in the Riemannian family");
  const int n = model.dim();
  if (static_cast<int>(x.size()) != n)
    throw std::invalid_argument("christoffel_symbols: wrong point dimension");

  ChristoffelEval out;
  out.n = n;
  out.gamma.assign(n * n * n, 0.0);
  out.dgamma.assign(n * n * n * n, 0.0);
  auto G = [&](int i, int j, int k) -> double& { return out.gamma[(i * n + j) * n + k]; };
  auto dG = [&](int i, int j, int k, int l) -> double& {
    return out.dgamma[((i * n + j) * n + k) * n + l];
  };

  if (model.family() == FinslerModel::Family::euclidean) return out;

  if (model.family() == FinslerModel::Family::sphere) {
    // conformal metric exp(2 phi) delta with phi = log(2 r^2) - log(r^2 + |x|^2):
    //   Gamma^i_jk = delta^i_j phi_k + delta^i_k phi_j - delta_jk phi_i
    const double r2 = model.sphere_radius() * model.sphere_radius();
    double s = r2;
    for (double c : x) s += c * c;
    std::vector<double> p1(n);       // phi_i
    std::vector<double> p2(n * n);   // phi_ij
    for (int i = 0; i < n; ++i) p1[i] = -2.0 * x[i] / s;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        p2[i * n + j] = (i == j ? -2.0 / s : 0.0) + 4.0 * x[i] * x[j] / (s * s);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          G(i, j, k) = (i == j ? p1[k] : 0.0) + (i == k ? p1[j] : 0.0) - (j == k ? p1[i] : 0.0);
          for (int l = 0; l < n; ++l)
            dG(i, j, k, l) = (i == j ? p2[k * n + l] : 0.0) + (i == k ? p2[j * n + l] : 0.0) -
                             (j == k ? p2[i * n + l] : 0.0);
        }
    return out;
  }

  // diagonal metric a_i(x) delta_ij:
  //   Gamma^i_jk = (delta_ik d_j a_i + delta_ij d_k a_i - delta_jk d_i a_j) / (2 a_i)
  const auto& diag = model.metric_diag();
  std::vector<double> A(n);
  std::vector<double> D1(n * n);      // d_j a_i
  std::vector<double> D2(n * n * n);  // d_l d_j a_i
  for (int i = 0; i < n; ++i) {
    A[i] = diag[i].eval_value(x);
    for (int j = 0; j < n; ++j) {
      const Polynomial dj = diag[i].derivative(j);
      D1[i * n + j] = dj.eval_value(x);
      for (int l = 0; l < n; ++l) D2[(i * n + j) * n + l] = dj.derivative(l).eval_value(x);
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double num = (i == k ? D1[i * n + j] : 0.0) + (i == j ? D1[i * n + k] : 0.0) -
                           (j == k ? D1[j * n + i] : 0.0);
        G(i, j, k) = 0.5 * num / A[i];
        for (int l = 0; l < n; ++l) {
          const double dnum = (i == k ? D2[(i * n + j) * n + l] : 0.0) +
                              (i == j ? D2[(i * n + k) * n + l] : 0.0) -
                              (j == k ? D2[(j * n + i) * n + l] : 0.0);
          dG(i, j, k, l) = 0.5 * (dnum * A[i] - num * D1[i * n + l]) / (A[i] * A[i]);
        }
      }
  return out;
}

std::vector<double> linear_curvature_tensor(const FinslerModel& model,
                                            std::span<const double> x) {
  const ChristoffelEval ch = christoffel_symbols(model, x);
  const int n = ch.n;
  auto G = [&](int i, int j, int k) { return ch.gamma[(i * n + j) * n + k]; };
  auto dG = [&](int i, int j, int k, int l) { return ch.dgamma[((i * n + j) * n + k) * n + l]; };

  std::vector<double> B(n * n * n * n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double v = dG(i, j, a, k) - dG(i, k, a, j);
          for (int m = 0; m < n; ++m) v += G(i, k, m) * G(m, j, a) - G(i, j, m) * G(m, k, a);
          B[((i * n + a) * n + j) * n + k] = v;
        }
  return B;
}

std::vector<double> spray_curvature_from_christoffel(const FinslerModel& model,
                                                     std::span<const double> x,
                                                     std::span<const double> y) {
  const std::vector<double> B = linear_curvature_tensor(model, x);
  const int n = model.dim();
  if (static_cast<int>(y.size()) != n)
    throw std::invalid_argument("spray_curvature_from_christoffel: wrong vector dimension");
  std::vector<double> R(n * n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double v = 0.0;
        for (int a = 0; a < n; ++a) v += B[((i * n + a) * n + j) * n + k] * y[a];
        R[(i * n + j) * n + k] = v;
      }
  return R;
}

}  // namespace finhol

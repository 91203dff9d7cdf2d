#pragma once

#include <functional>

// Central finite differences with one Richardson step; used as the
// jet-independent derivative oracle throughout the test suite.

namespace fd {

inline double deriv(const std::function<double(double)>& f, double x, double h) {
  auto d = [&](double hh) { return (f(x + hh) - f(x - hh)) / (2.0 * hh); };
  const double coarse = d(h);
  const double fine = d(h / 2.0);
  return (4.0 * fine - coarse) / 3.0;
}

inline double second_deriv(const std::function<double(double)>& f, double x, double h) {
  auto d = [&](double hh) { return (f(x + hh) - 2.0 * f(x) + f(x - hh)) / (hh * hh); };
  const double coarse = d(h);
  const double fine = d(h / 2.0);
  return (4.0 * fine - coarse) / 3.0;
}

// Partial derivative of f along coordinate i.
inline double partial(const std::function<double(std::vector<double>)>& f, std::vector<double> x,
                      int i, double h) {
  return deriv([&](double v) {
    std::vector<double> y = x;
    y[i] = v;
    return f(y);
  }, x[i], h);
}

inline double mixed_partial(const std::function<double(std::vector<double>)>& f,
                            std::vector<double> x, int i, int j, double h) {
  return partial([&](std::vector<double> y) { return partial(f, y, i, h); }, x, j, h);
}

}  // namespace fd

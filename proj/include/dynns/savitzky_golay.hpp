#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

namespace dynns {

namespace detail {

// Convolution weights that evaluate, at the centre, the least-squares
// polynomial of the given order through 2 * half + 1 equally spaced points.
inline std::vector<double> savitzky_golay_weights(int half, int order) {
  const int len = 2 * half + 1;
  Eigen::MatrixXd v(len, order + 1);
  const double scale = half > 0 ? 1.0 / half : 1.0;
  for (int r = 0; r < len; ++r) {
    const double x = (r - half) * scale;
    double p = 1.0;
    for (int c = 0; c <= order; ++c, p *= x) v(r, c) = p;
  }
  const Eigen::MatrixXd pinv = v.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(len, len));
  std::vector<double> w(len);
  for (int r = 0; r < len; ++r) w[r] = pinv(0, r);
  return w;
}

}  // namespace detail

/// Local polynomial least-squares smoothing. Near the ends the window
/// shrinks symmetrically and the order drops to at most 2 * half, so the
/// first and last values pass through unchanged. Sequences shorter than the
/// window are returned as they are.
inline std::vector<double> savitzky_golay_smooth(const std::vector<double>& values, int window, int order) {
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("savitzky_golay: window must be odd and positive");
  if (order < 0 || order >= window) throw std::invalid_argument("savitzky_golay: order must lie in [0, window)");
  const int n = static_cast<int>(values.size());
  if (n < window) return values;
  const int half = window / 2;
  std::vector<std::vector<double>> weights(half + 1);
  for (int h = 0; h <= half; ++h) weights[h] = detail::savitzky_golay_weights(h, std::min(order, 2 * h));
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const int h = std::min({half, i, n - 1 - i});
    const auto& w = weights[h];
    double acc = 0.0;
    for (int k = -h; k <= h; ++k) acc += w[k + h] * values[i + k];
    out[i] = acc;
  }
  return out;
}

}  // namespace dynns

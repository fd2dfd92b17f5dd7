#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "anatssm/error.hpp"

namespace anatssm {

struct ShapiroWilk {
  double w = 0.0;
  double p = 0.0;
};

namespace detail {

template <std::size_t K>
double poly(const double (&c)[K], double x) {
  double r = c[K - 1];
  for (std::size_t i = K - 1; i-- > 0;) r = r * x + c[i];
  return r;
}

}  // namespace detail

/// Shapiro-Wilk W and p-value, Royston's AS R94 approximation (3 <= n <= 5000).
inline ShapiroWilk shapiro_wilk(std::vector<double> x) {
  const std::size_t n = x.size();
  if (n < 3 || n > 5000) throw DataError("Shapiro-Wilk needs 3 <= n <= 5000 samples, got " + std::to_string(n));
  for (double v : x)
    if (!std::isfinite(v)) throw DataError("Shapiro-Wilk: non-finite sample");
  std::sort(x.begin(), x.end());
  if (x.back() - x.front() <= 1e-19 * std::max(1.0, std::abs(x.front())))
    throw DegeneracyError("Shapiro-Wilk: samples are constant");

  static constexpr double g[] = {-2.273, 0.459};
  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};

  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  const boost::math::normal_distribution<double> normal;
  std::vector<double> a(half + 1, 0.0);  // 1-based
  if (n == 3) {
    a[1] = std::sqrt(0.5);
  } else {
    std::vector<double> m(half + 1, 0.0);
    double summ2 = 0.0;
    for (std::size_t i = 1; i <= half; ++i) {
      m[i] = boost::math::quantile(normal, (static_cast<double>(i) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = detail::poly(c1, rsn) - m[1] / ssumm2;
    std::size_t first = 2;
    double fac = 0.0;
    if (n > 5) {
      first = 3;
      const double a2 = -m[2] / ssumm2 + detail::poly(c2, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1] - 2.0 * m[2] * m[2]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[2] = a2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1));
    }
    a[1] = a1;
    for (std::size_t i = first; i <= half; ++i) a[i] = -m[i] / fac;
  }

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= an;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  double num = 0.0;
  for (std::size_t i = 1; i <= half; ++i) num += a[i] * (x[n - i] - x[i - 1]);
  ShapiroWilk out;
  out.w = std::min(1.0, num * num / ss);

  if (n == 3) {
    constexpr double pi6 = 6.0 / std::numbers::pi;
    constexpr double stqr = std::numbers::pi / 3.0;
    out.p = std::max(0.0, pi6 * (std::asin(std::sqrt(out.w)) - stqr));
    return out;
  }
  double y = std::log(1.0 - out.w);
  double mu = 0.0, sigma = 1.0;
  if (n <= 11) {
    const double gamma = detail::poly(g, an);
    if (y >= gamma) {
      out.p = 1e-99;
      return out;
    }
    y = -std::log(gamma - y);
    mu = detail::poly(c3, an);
    sigma = std::exp(detail::poly(c4, an));
  } else {
    const double xx = std::log(an);
    mu = detail::poly(c5, xx);
    sigma = std::exp(detail::poly(c6, xx));
  }
  const double z = (y - mu) / sigma;
  if (std::isinf(z)) {
    out.p = z < 0 ? 1.0 : 0.0;
    return out;
  }
  out.p = boost::math::cdf(boost::math::complement(normal, z));
  return out;
}

inline ShapiroWilk shapiro_wilk(const Eigen::VectorXd& x) {
  return shapiro_wilk(std::vector<double>(x.data(), x.data() + x.size()));
}

/// Sample Pearson correlation.
inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DimensionError("pearson: vectors differ in length");
  if (a.size() < 3) throw InsufficientDataError("pearson needs at least 3 samples");
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double sa = std::sqrt((da * da).sum()), sb = std::sqrt((db * db).sum());
  if (!(sa > 0.0) || !(sb > 0.0)) throw DegeneracyError("pearson: zero-variance column");
  return std::clamp((da * db).sum() / (sa * sb), -1.0, 1.0);
}

/// Pearson matrix between the columns of `a` (rows) and the columns of `b` (cols).
inline Eigen::MatrixXd pearson_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) throw DimensionError("pearson_matrix: row counts differ");
  if (a.rows() < 3) throw InsufficientDataError("pearson needs at least 3 samples");
  auto normalized = [](const Eigen::MatrixXd& m, const char* what) {
    Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      const double s = c.col(j).norm();
      if (!(s > 0.0)) throw DegeneracyError(std::string("pearson: zero-variance ") + what + " column " + std::to_string(j + 1));
      c.col(j) /= s;
    }
    return c;
  };
  const Eigen::MatrixXd na = normalized(a, "left");
  const Eigen::MatrixXd nb = normalized(b, "right");
  Eigen::MatrixXd r = (na.transpose() * nb).cwiseMax(-1.0).cwiseMin(1.0);
  return r;
}

/// Symmetric correlation matrix of the columns of `a` with an exact unit diagonal.
inline Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd r = pearson_matrix(a, a);
  r = 0.5 * (r + r.transpose()).eval();
  r.diagonal().setOnes();
  return r;
}

struct ColumnStats {
  double mean = 0.0;
  double std = 1.0;  // sample standard deviation (divisor n-1)
};

inline ColumnStats column_stats(const Eigen::VectorXd& v) {
  ColumnStats s;
  s.mean = v.mean();
  if (v.size() > 1) s.std = std::sqrt((v.array() - s.mean).square().sum() / static_cast<double>(v.size() - 1));
  return s;
}

struct Histogram {
  double lo = 0.0;
  double width = 0.0;
  std::vector<int> counts;
};

/// Equal-width bins over [min, max]; the maximum falls in the last bin.
inline Histogram histogram(const Eigen::VectorXd& v, int bins) {
  if (bins < 1) throw DataError("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  if (v.size() == 0) return h;
  h.lo = v.minCoeff();
  const double hi = v.maxCoeff();
  h.width = (hi - h.lo) / bins;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    int b = h.width > 0 ? static_cast<int>((v[i] - h.lo) / h.width) : 0;
    h.counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
  }
  return h;
}

}  // namespace anatssm

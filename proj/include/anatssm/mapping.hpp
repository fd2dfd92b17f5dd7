#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anatssm/error.hpp"
#include "anatssm/numfmt.hpp"
#include "anatssm/population.hpp"
#include "anatssm/statistics.hpp"

namespace anatssm {

inline constexpr double rank_tolerance = 1e-10;

/// Linear map beta_std = Q alpha (m x r).
struct MappingQ {
  Eigen::MatrixXd matrix;
  std::vector<std::string> labels;
  bool rank_ok = false;
  Eigen::VectorXd singular_values;
  Eigen::VectorXd r_squared;  // per label, empty when not fitted from data
};

/// Nearest row-orthonormal matrix to Q. `source` keeps Q for readouts that
/// need it (whitening of measured parameters).
struct MappingK {
  Eigen::MatrixXd matrix;
  std::vector<std::string> labels;
  Eigen::MatrixXd source;
};

inline std::vector<std::string> default_labels(Eigen::Index m) {
  std::vector<std::string> out;
  for (Eigen::Index j = 0; j < m; ++j) out.push_back("b" + std::to_string(j + 1));
  return out;
}

/// Wraps an explicit matrix and evaluates its numerical rank.
inline MappingQ make_mapping(Eigen::MatrixXd q, std::vector<std::string> labels = {}) {
  if (labels.empty()) labels = default_labels(q.rows());
  if (static_cast<Eigen::Index>(labels.size()) != q.rows())
    throw DimensionError("mapping has " + std::to_string(q.rows()) + " rows but " + std::to_string(labels.size()) +
                         " labels");
  if (!q.allFinite()) throw DataError("mapping matrix has non-finite entries");
  MappingQ out;
  out.labels = std::move(labels);
  out.matrix = std::move(q);
  if (out.matrix.size() == 0) return out;
  out.singular_values = Eigen::JacobiSVD<Eigen::MatrixXd>(out.matrix).singularValues();
  const double smax = out.singular_values[0];
  out.rank_ok = out.matrix.rows() <= out.matrix.cols() && smax > 0.0 &&
                out.singular_values.size() == out.matrix.rows() &&
                out.singular_values[out.singular_values.size() - 1] > rank_tolerance * smax;
  return out;
}

/// Ordinary least squares of each standardized measurement on all alpha
/// columns, without intercept.
inline MappingQ fit_mapping(const Eigen::MatrixXd& alphas, const Eigen::MatrixXd& betas_std,
                            std::vector<std::string> labels = {}) {
  if (alphas.rows() != betas_std.rows()) throw DimensionError("fit_mapping: alpha and beta row counts differ");
  if (alphas.rows() <= alphas.cols())
    throw InsufficientDataError("fit_mapping is underdetermined: M = " + std::to_string(alphas.rows()) +
                                " draws for r = " + std::to_string(alphas.cols()) + " coefficients (need M > r)");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(alphas);
  qr.setThreshold(rank_tolerance);
  if (qr.rank() < alphas.cols())
    throw RankError("fit_mapping: coefficient matrix has rank " + std::to_string(qr.rank()) + " < " +
                    std::to_string(alphas.cols()));
  const Eigen::MatrixXd qt = qr.solve(betas_std);  // r x m
  MappingQ out = make_mapping(qt.transpose(), std::move(labels));
  const Eigen::MatrixXd resid = betas_std - alphas * qt;
  out.r_squared.resize(betas_std.cols());
  for (Eigen::Index j = 0; j < betas_std.cols(); ++j) {
    const double tot = (betas_std.col(j).array() - betas_std.col(j).mean()).square().sum();
    out.r_squared[j] = tot > 0.0 ? 1.0 - resid.col(j).squaredNorm() / tot : 1.0;
  }
  return out;
}

inline MappingQ fit_mapping(const SyntheticPopulation& pop) {
  return fit_mapping(pop.alphas, pop.betas_std, pop.labels);
}

namespace detail {

inline void require_full_rank(const MappingQ& q, const char* what) {
  if (q.rank_ok) return;
  if (q.matrix.rows() > q.matrix.cols())
    throw RankError(std::string(what) + ": Q has more rows (" + std::to_string(q.matrix.rows()) + ") than columns (" +
                    std::to_string(q.matrix.cols()) + ")");
  const Eigen::Index k = q.singular_values.size() - 1;
  const double smax = q.singular_values.size() ? q.singular_values[0] : 0.0;
  throw RankError(std::string(what) + ": Q is rank deficient; singular value " + std::to_string(k + 1) + " = " +
                  format_double(k >= 0 ? q.singular_values[k] : 0.0) + " is below " + format_double(rank_tolerance) +
                  " x " + format_double(smax));
}

}  // namespace detail

/// Q+ = Q^T (Q Q^T)^-1 for full-row-rank Q.
inline Eigen::MatrixXd pseudo_inverse(const MappingQ& q) {
  detail::require_full_rank(q, "pseudo_inverse");
  const Eigen::MatrixXd gram = q.matrix * q.matrix.transpose();
  return q.matrix.transpose() * gram.ldlt().solve(Eigen::MatrixXd::Identity(gram.rows(), gram.cols()));
}

/// K = U V^T from the reduced SVD Q = U Delta V^T: the row-orthonormal matrix
/// nearest to Q in Frobenius norm.
inline MappingK orthogonal_procrustes(const MappingQ& q) {
  detail::require_full_rank(q, "orthogonal_procrustes");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(q.matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
  MappingK k;
  k.matrix = svd.matrixU() * svd.matrixV().transpose();
  k.labels = q.labels;
  k.source = q.matrix;
  return k;
}

struct MappingComparison {
  double weights_vs_corr = 0.0;     // mean |W_ji - rho(beta_j, alpha_i)|
  double covariance_vs_corr = 0.0;  // mean |(W W^T)_jk - rho(beta_j, beta_k)|
};

/// Learned weights against Pearson correlations of the population they came from.
inline MappingComparison mapping_vs_corr(const Eigen::MatrixXd& w, const Eigen::MatrixXd& alpha_beta,
                                         const Eigen::MatrixXd& beta_beta) {
  if (alpha_beta.rows() != w.cols() || alpha_beta.cols() != w.rows())
    throw DimensionError("mapping_vs_corr: weights are " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                         ", correlation report is " + std::to_string(alpha_beta.cols()) + "x" +
                         std::to_string(alpha_beta.rows()));
  if (beta_beta.rows() != w.rows() || beta_beta.cols() != w.rows())
    throw DimensionError("mapping_vs_corr: beta-beta matrix does not match the number of labels");
  MappingComparison out;
  out.weights_vs_corr = (w - alpha_beta.transpose()).cwiseAbs().mean();
  out.covariance_vs_corr = (w * w.transpose() - beta_beta).cwiseAbs().mean();
  return out;
}

struct CorrelationReport {
  Eigen::MatrixXd beta_beta;   // m x m
  Eigen::MatrixXd alpha_beta;  // r x m
};

inline CorrelationReport pearson_reports(const SyntheticPopulation& pop) {
  if (pop.size() < 3) throw InsufficientDataError("correlation report needs M >= 3");
  return {correlation_matrix(pop.betas_raw), pearson_matrix(pop.alphas, pop.betas_raw)};
}

inline MappingComparison mapping_vs_corr(const Eigen::MatrixXd& w, const CorrelationReport& report) {
  return mapping_vs_corr(w, report.alpha_beta, report.beta_beta);
}

}  // namespace anatssm

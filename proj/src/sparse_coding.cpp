#include "ddl/sparse_coding.hpp"

#include <cmath>
#include <string>

#include "ddl/error.hpp"

namespace ddl {
namespace {

// Relative pivot below which a candidate atom is treated as lying in the span
// of the active set.
constexpr double kSingularPivot = 1e-10;

void check_dims(const Eigen::VectorXd& y, const Eigen::MatrixXd& dict) {
  if (dict.cols() == 0 || dict.rows() == 0) {
    throw Error(ErrorCode::EmptyDictionary, "dictionary has no atoms");
  }
  if (y.size() != dict.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "signal of length " + std::to_string(y.size()) +
                                                  " vs atoms of length " +
                                                  std::to_string(dict.rows()));
  }
  if (!y.allFinite()) throw Error(ErrorCode::NonFinite, "signal contains NaN or infinity");
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

void validate(const CoderConfig& config) {
  if (config.mode == CoderMode::Omp && config.sparsity < 1) {
    throw Error(ErrorCode::InvalidArgument, "OMP sparsity must be at least 1");
  }
  if (config.mode == CoderMode::Ista && !(config.lambda >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "ISTA lambda must be non-negative");
  }
  if (!(config.omp_relative_tol >= 0.0) || !(config.ista_tol >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tolerances must be non-negative");
  }
}

SparseCode omp_encode(const Eigen::VectorXd& y, const Eigen::MatrixXd& dict,
                      std::size_t sparsity, double residual_tol) {
  check_dims(y, dict);
  const Eigen::MatrixXd gram = dict.transpose() * dict;
  return omp_encode(y, dict, gram, sparsity, residual_tol);
}

SparseCode omp_encode(const Eigen::VectorXd& y, const Eigen::MatrixXd& dict,
                      const Eigen::MatrixXd& gram, std::size_t sparsity, double residual_tol) {
  check_dims(y, dict);
  if (sparsity < 1) throw Error(ErrorCode::InvalidArgument, "OMP sparsity must be at least 1");
  const Eigen::Index num_atoms = dict.cols();
  const auto budget = static_cast<Eigen::Index>(
      std::min<std::size_t>(sparsity, static_cast<std::size_t>(std::min(dict.rows(), num_atoms))));

  Eigen::VectorXd norms = gram.diagonal().cwiseMax(0.0).cwiseSqrt();
  if (norms.maxCoeff() <= 0.0) throw Error(ErrorCode::EmptyDictionary, "all atoms are zero");

  SparseCode code;
  code.coefficients = Eigen::VectorXd::Zero(num_atoms);
  Eigen::VectorXd residual = y;
  code.residual_norm = residual.norm();
  if (code.residual_norm <= residual_tol) return code;

  const Eigen::VectorXd projections = dict.transpose() * y;
  std::vector<char> blocked(static_cast<std::size_t>(num_atoms), 0);
  for (Eigen::Index j = 0; j < num_atoms; ++j) {
    if (norms(j) <= 0.0) blocked[static_cast<std::size_t>(j)] = 1;
  }

  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(budget, budget);  // lower triangular
  Eigen::VectorXd active_coef;
  Eigen::Index k = 0;
  while (k < budget) {
    const Eigen::VectorXd corr = dict.transpose() * residual;
    Eigen::Index best = -1;
    double best_score = 0.0;
    for (Eigen::Index j = 0; j < num_atoms; ++j) {
      if (blocked[static_cast<std::size_t>(j)]) continue;
      const double score = std::abs(corr(j)) / norms(j);
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    if (best < 0) break;  // residual orthogonal to every remaining atom

    Eigen::VectorXd cross(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      cross(i) = gram(static_cast<Eigen::Index>(code.support[static_cast<std::size_t>(i)]), best);
    }
    Eigen::VectorXd w = cross;
    if (k > 0) chol.topLeftCorner(k, k).triangularView<Eigen::Lower>().solveInPlace(w);
    const double pivot = gram(best, best) - w.squaredNorm();
    blocked[static_cast<std::size_t>(best)] = 1;
    if (pivot <= kSingularPivot * gram(best, best)) {
      ++code.singular_skips;
      continue;
    }
    chol.block(k, 0, 1, k) = w.transpose();
    chol(k, k) = std::sqrt(pivot);
    code.support.push_back(static_cast<std::size_t>(best));
    ++k;

    Eigen::VectorXd rhs(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      rhs(i) = projections(static_cast<Eigen::Index>(code.support[static_cast<std::size_t>(i)]));
    }
    const auto lower = chol.topLeftCorner(k, k).triangularView<Eigen::Lower>();
    lower.solveInPlace(rhs);
    lower.transpose().solveInPlace(rhs);
    active_coef = rhs;

    residual = y;
    for (Eigen::Index i = 0; i < k; ++i) {
      residual -= active_coef(i) * dict.col(static_cast<Eigen::Index>(code.support[static_cast<std::size_t>(i)]));
    }
    code.residual_norm = residual.norm();
    ++code.iterations;
    if (code.residual_norm <= residual_tol) break;
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    code.coefficients(static_cast<Eigen::Index>(code.support[static_cast<std::size_t>(i)])) =
        active_coef(i);
  }
  return code;
}

double spectral_norm_squared(const Eigen::MatrixXd& gram) {
  const Eigen::Index n = gram.rows();
  if (n == 0) return 0.0;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + static_cast<double>(i) / static_cast<double>(n);
  v.normalize();
  double estimate = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    Eigen::VectorXd next = gram * v;
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    next /= norm;
    const double rayleigh = next.dot(gram * next);
    v = std::move(next);
    if (std::abs(rayleigh - estimate) <= 1e-12 * rayleigh) return rayleigh;
    estimate = rayleigh;
  }
  return estimate;
}

double lasso_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& dict,
                       const Eigen::VectorXd& s, double lambda) {
  return 0.5 * (y - dict * s).squaredNorm() + lambda * s.lpNorm<1>();
}

SparseCode ista_encode(const Eigen::VectorXd& y, const Eigen::MatrixXd& dict, double lambda,
                       std::size_t max_iter, double tol, IstaTrace* trace) {
  check_dims(y, dict);
  const Eigen::MatrixXd gram = dict.transpose() * dict;
  return ista_encode(y, dict, gram, 1.01 * spectral_norm_squared(gram), lambda, max_iter, tol,
                     trace);
}

SparseCode ista_encode(const Eigen::VectorXd& y, const Eigen::MatrixXd& dict,
                       const Eigen::MatrixXd& gram, double lipschitz, double lambda,
                       std::size_t max_iter, double tol, IstaTrace* trace) {
  check_dims(y, dict);
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be non-negative");

  SparseCode code;
  const Eigen::Index n = dict.cols();
  code.coefficients = Eigen::VectorXd::Zero(n);
  if (trace) trace->objective.push_back(lasso_objective(y, dict, code.coefficients, lambda));
  if (!(lipschitz > 0.0)) {
    // D^T D == 0: s = 0 is optimal.
    code.residual_norm = y.norm();
    return code;
  }

  const Eigen::VectorXd projections = dict.transpose() * y;
  const double step = 1.0 / lipschitz;
  const double threshold = lambda * step;
  Eigen::VectorXd s = code.coefficients;
  Eigen::VectorXd next(n);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd grad = gram * s - projections;
    next = s - step * grad;
    // soft_threshold maps NaN to 0, so test before shrinking
    if (!next.allFinite()) {
      throw Error(ErrorCode::NonFinite, "ISTA iterate became non-finite at iteration " +
                                            std::to_string(iter));
    }
    for (Eigen::Index j = 0; j < n; ++j) next(j) = soft_threshold(next(j), threshold);
    const double change = (next - s).lpNorm<Eigen::Infinity>();
    s.swap(next);
    ++code.iterations;
    if (trace) trace->objective.push_back(lasso_objective(y, dict, s, lambda));
    if (change <= tol) break;
  }

  code.coefficients = s;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (s(j) != 0.0) code.support.push_back(static_cast<std::size_t>(j));
  }
  code.residual_norm = (y - dict * s).norm();
  return code;
}

std::vector<SparseCode> batch_encode(const Eigen::MatrixXd& signals, const Eigen::MatrixXd& dict,
                                     const CoderConfig& config) {
  validate(config);
  std::vector<SparseCode> codes;
  if (signals.cols() == 0) return codes;
  if (dict.cols() == 0) throw Error(ErrorCode::EmptyDictionary, "dictionary has no atoms");
  const Eigen::MatrixXd gram = dict.transpose() * dict;
  const double lipschitz =
      config.mode == CoderMode::Ista ? 1.01 * spectral_norm_squared(gram) : 0.0;
  codes.reserve(static_cast<std::size_t>(signals.cols()));
  for (Eigen::Index p = 0; p < signals.cols(); ++p) {
    const Eigen::VectorXd y = signals.col(p);
    try {
      if (config.mode == CoderMode::Omp) {
        codes.push_back(omp_encode(y, dict, gram, config.sparsity, config.omp_relative_tol * y.norm()));
      } else {
        codes.push_back(ista_encode(y, dict, gram, lipschitz, config.lambda, config.max_iter,
                                    config.ista_tol));
      }
    } catch (const Error& e) {
      throw Error(e.code(), "column " + std::to_string(p) + ": " + e.what());
    }
  }
  return codes;
}

Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& dict, const std::vector<SparseCode>& codes) {
  Eigen::MatrixXd out(dict.rows(), static_cast<Eigen::Index>(codes.size()));
  for (std::size_t p = 0; p < codes.size(); ++p) {
    auto col = out.col(static_cast<Eigen::Index>(p));
    col.setZero();
    for (std::size_t j : codes[p].support) {
      col += codes[p].coefficients(static_cast<Eigen::Index>(j)) *
             dict.col(static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

}  // namespace ddl

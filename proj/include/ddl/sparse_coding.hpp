#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace ddl {

struct SparseCode {
  Eigen::VectorXd coefficients;
  std::vector<std::size_t> support;  // in selection order
  double residual_norm = 0.0;
  std::size_t iterations = 0;
  // Atoms rejected by OMP because they were numerically dependent on the
  // active set (the SingularGram condition).
  std::size_t singular_skips = 0;
};

enum class CoderMode { Omp, Ista };

struct CoderConfig {
  CoderMode mode = CoderMode::Omp;
  std::size_t sparsity = 5;        // OMP atom budget T
  double omp_relative_tol = 1e-6;  // OMP stops once ||residual|| <= tol * ||y||
  double lambda = 0.1;             // ISTA l1 weight
  std::size_t max_iter = 1000;     // ISTA
  double ista_tol = 1e-8;          // ISTA step tolerance (sup norm)
};

void validate(const CoderConfig& config);

// Orthogonal matching pursuit: greedily add the inactive atom with the largest
// |d_j^T r| / ||d_j|| (lowest index on ties), then refit the active set by
// orthogonal projection using a Cholesky factor of D_Q^T D_Q grown one row
// per step. Stops after `sparsity` atoms or once ||r|| <= residual_tol.
SparseCode omp_encode(const Eigen::VectorXd& y, const Eigen::MatrixXd& dict,
                      std::size_t sparsity, double residual_tol);

// Variant taking the precomputed Gram matrix D^T D, for coding many signals
// against one dictionary.
SparseCode omp_encode(const Eigen::VectorXd& y, const Eigen::MatrixXd& dict,
                      const Eigen::MatrixXd& gram, std::size_t sparsity, double residual_tol);

// Largest eigenvalue estimate of D^T D by power iteration.
double spectral_norm_squared(const Eigen::MatrixXd& gram);

struct IstaTrace {
  std::vector<double> objective;  // one entry per iterate, starting at s = 0
};

// Proximal gradient for 1/2 ||y - D s||^2 + lambda ||s||_1 from s = 0, step
// 1/L with L = 1.01 x (power-iteration estimate of the top eigenvalue of D^T D).
SparseCode ista_encode(const Eigen::VectorXd& y, const Eigen::MatrixXd& dict, double lambda,
                       std::size_t max_iter, double tol, IstaTrace* trace = nullptr);

// Same with D^T D and its Lipschitz constant supplied by the caller.
SparseCode ista_encode(const Eigen::VectorXd& y, const Eigen::MatrixXd& dict,
                       const Eigen::MatrixXd& gram, double lipschitz, double lambda,
                       std::size_t max_iter, double tol, IstaTrace* trace = nullptr);

double lasso_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& dict,
                       const Eigen::VectorXd& s, double lambda);

// Column-wise coding of Y; output order follows column order. Errors are
// rethrown with the failing column index in the message.
std::vector<SparseCode> batch_encode(const Eigen::MatrixXd& signals, const Eigen::MatrixXd& dict,
                                     const CoderConfig& config);

// D * S for a batch of codes, one column per code.
Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& dict, const std::vector<SparseCode>& codes);

}  // namespace ddl

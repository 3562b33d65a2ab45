#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddl/patches.hpp"
#include "ddl/random.hpp"

namespace ddl {

enum class Provenance { CleanTrain, PerturbedTest };

std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& text);

struct Dictionary {
  Eigen::MatrixXd atoms;   // M x N, every column inside the unit ball
  Eigen::MatrixXd stat_a;  // N x N, sum of s s^T
  Eigen::MatrixXd stat_b;  // M x N, sum of y s^T
  Provenance trained_on = Provenance::CleanTrain;
  std::uint64_t seed = 0;
  double lambda = 0.1;

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(atoms.rows()); }
  std::size_t num_atoms() const noexcept { return static_cast<std::size_t>(atoms.cols()); }
};

struct DictLearnConfig {
  std::size_t num_atoms = 38;
  double lambda = 0.1;
  std::size_t epochs = 2;
  std::size_t batch_size = 1;
  std::uint64_t seed = 1;
  std::size_t ista_max_iter = 1000;
  double ista_tol = 1e-8;
};

void validate(const DictLearnConfig& config);

// N distinct non-zero patch columns picked at random, scaled to unit norm.
Dictionary init_dictionary(const Eigen::MatrixXd& patches, std::size_t num_atoms,
                           std::uint64_t seed);

// 1/2 Tr(D^T D A) - Tr(D^T B)
double surrogate_objective(const Eigen::MatrixXd& atoms, const Eigen::MatrixXd& stat_a,
                           const Eigen::MatrixXd& stat_b);

// Draws replacement atoms for columns that no code has used yet.
struct AtomReseeder {
  const Eigen::MatrixXd* patches = nullptr;
  Rng* rng = nullptr;
};

struct UpdateReport {
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  double max_atom_norm = 0.0;
  std::size_t reseeded = 0;
};

// One block-coordinate pass over the columns of `atoms`, each column moved to
// the exact minimiser of the surrogate over the unit ball. Columns with
// A_jj <= 1e-10 are re-drawn from `reseeder` when one is given, otherwise left.
UpdateReport dictionary_update_step(Eigen::MatrixXd& atoms, const Eigen::MatrixXd& stat_a,
                                    const Eigen::MatrixXd& stat_b,
                                    const AtomReseeder& reseeder = {});

struct EpochReport {
  std::size_t epoch = 0;  // 0 = before any update
  double mean_reconstruction_error = 0.0;
};

struct LearnObserver {
  std::function<void(const UpdateReport&)> on_update;
  std::function<void(const EpochReport&)> on_epoch;
};

// Online dictionary learning over the columns of `patches`: every draw is
// ISTA-coded against the current atoms, folded into A and B, and followed by
// one update pass. Draw order is a seeded shuffle per epoch.
Dictionary learn_dictionary(const Eigen::MatrixXd& patches, const DictLearnConfig& config,
                            Provenance trained_on = Provenance::CleanTrain,
                            const LearnObserver& observer = {});

// Mean over columns of ||y - D s||^2 with s from ISTA at the given lambda.
double mean_reconstruction_error(const Eigen::MatrixXd& patches, const Eigen::MatrixXd& atoms,
                                 double lambda, std::size_t max_iter, double tol);

// Atoms as a DDL1 matrix plus "<path>.meta" (trained_on, seed, lambda, num_atoms).
void save_dictionary(const Dictionary& dict, const std::filesystem::path& path);
Dictionary load_dictionary(const std::filesystem::path& path);

}  // namespace ddl

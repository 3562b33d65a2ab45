#include "ddl/dictionary.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <string>

#include "ddl/data_io.hpp"
#include "ddl/error.hpp"
#include "ddl/sparse_coding.hpp"

namespace ddl {
namespace {

constexpr double kDeadAtom = 1e-10;

Eigen::VectorXd random_nonzero_patch(const Eigen::MatrixXd& patches, Rng& rng) {
  // Bounded retry; callers only reseed from sets that produced a dictionary.
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const auto p = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(patches.cols())));
    const double norm = patches.col(p).norm();
    if (norm > 0.0) return patches.col(p) / norm;
  }
  throw Error(ErrorCode::NotEnoughPatches, "no non-zero patch available to reseed an atom");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(Provenance p) {
  return p == Provenance::CleanTrain ? "clean-train" : "perturbed-test";
}

Provenance parse_provenance(const std::string& text) {
  if (text == "clean-train" || text == "clean") return Provenance::CleanTrain;
  if (text == "perturbed-test" || text == "perturbed") return Provenance::PerturbedTest;
  throw Error(ErrorCode::InvalidArgument, "unknown dictionary source '" + text + "'");
}

void validate(const DictLearnConfig& config) {
  if (config.num_atoms < 1) throw Error(ErrorCode::InvalidArgument, "num_atoms must be >= 1");
  if (config.epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (config.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (!(config.lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
}

Dictionary init_dictionary(const Eigen::MatrixXd& patches, std::size_t num_atoms,
                           std::uint64_t seed) {
  if (num_atoms < 1) throw Error(ErrorCode::InvalidArgument, "num_atoms must be >= 1");
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index p = 0; p < patches.cols(); ++p) {
    if (patches.col(p).squaredNorm() > 0.0) candidates.push_back(p);
  }
  Rng rng(seed);
  rng.shuffle(candidates);

  Dictionary dict;
  dict.seed = seed;
  dict.atoms.resize(patches.rows(), static_cast<Eigen::Index>(num_atoms));
  Eigen::Index filled = 0;
  for (Eigen::Index p : candidates) {
    if (filled == static_cast<Eigen::Index>(num_atoms)) break;
    const Eigen::VectorXd atom = patches.col(p).normalized();
    bool duplicate = false;
    for (Eigen::Index j = 0; j < filled && !duplicate; ++j) duplicate = dict.atoms.col(j) == atom;
    if (duplicate) continue;
    dict.atoms.col(filled++) = atom;
  }
  if (filled < static_cast<Eigen::Index>(num_atoms)) {
    throw Error(ErrorCode::NotEnoughPatches, "only " + std::to_string(filled) +
                                                 " distinct non-zero patches for " +
                                                 std::to_string(num_atoms) + " atoms");
  }
  dict.stat_a = Eigen::MatrixXd::Zero(dict.atoms.cols(), dict.atoms.cols());
  dict.stat_b = Eigen::MatrixXd::Zero(dict.atoms.rows(), dict.atoms.cols());
  return dict;
}

double surrogate_objective(const Eigen::MatrixXd& atoms, const Eigen::MatrixXd& stat_a,
                           const Eigen::MatrixXd& stat_b) {
  return 0.5 * ((atoms.transpose() * atoms) * stat_a).trace() -
         (atoms.transpose() * stat_b).trace();
}

UpdateReport dictionary_update_step(Eigen::MatrixXd& atoms, const Eigen::MatrixXd& stat_a,
                                    const Eigen::MatrixXd& stat_b, const AtomReseeder& reseeder) {
  if (stat_a.rows() != atoms.cols() || stat_a.cols() != atoms.cols() ||
      stat_b.rows() != atoms.rows() || stat_b.cols() != atoms.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "statistics do not match the dictionary shape");
  }
  UpdateReport report;
  report.surrogate_before = surrogate_objective(atoms, stat_a, stat_b);
  for (Eigen::Index j = 0; j < atoms.cols(); ++j) {
    const double ajj = stat_a(j, j);
    if (ajj > kDeadAtom) {
      Eigen::VectorXd u = (stat_b.col(j) - atoms * stat_a.col(j)) / ajj + atoms.col(j);
      atoms.col(j) = u / std::max(1.0, u.norm());
    } else if (reseeder.patches && reseeder.rng) {
      atoms.col(j) = random_nonzero_patch(*reseeder.patches, *reseeder.rng);
      ++report.reseeded;
    }
  }
  report.surrogate_after = surrogate_objective(atoms, stat_a, stat_b);
  report.max_atom_norm = atoms.colwise().norm().maxCoeff();
  return report;
}

double mean_reconstruction_error(const Eigen::MatrixXd& patches, const Eigen::MatrixXd& atoms,
                                 double lambda, std::size_t max_iter, double tol) {
  if (patches.cols() == 0) return 0.0;
  const Eigen::MatrixXd gram = atoms.transpose() * atoms;
  const double lipschitz = 1.01 * spectral_norm_squared(gram);
  double total = 0.0;
  for (Eigen::Index p = 0; p < patches.cols(); ++p) {
    const Eigen::VectorXd y = patches.col(p);
    const SparseCode code = ista_encode(y, atoms, gram, lipschitz, lambda, max_iter, tol);
    total += code.residual_norm * code.residual_norm;
  }
  return total / static_cast<double>(patches.cols());
}

Dictionary learn_dictionary(const Eigen::MatrixXd& patches, const DictLearnConfig& config,
                            Provenance trained_on, const LearnObserver& observer) {
  validate(config);
  Dictionary dict = init_dictionary(patches, config.num_atoms, config.seed);
  dict.trained_on = trained_on;
  dict.lambda = config.lambda;

  auto report_epoch = [&](std::size_t epoch) {
    if (!observer.on_epoch) return;
    observer.on_epoch({epoch, mean_reconstruction_error(patches, dict.atoms, config.lambda,
                                                        config.ista_max_iter, config.ista_tol)});
  };
  report_epoch(0);

  Rng rng(config.seed + 0x9E3779B97F4A7C15ULL);
  const AtomReseeder reseeder{&patches, &rng};
  Eigen::MatrixXd gram = dict.atoms.transpose() * dict.atoms;
  double lipschitz = 1.01 * spectral_norm_squared(gram);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(patches.cols()));
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      bool touched = false;
      for (std::size_t i = start; i < stop; ++i) {
        const Eigen::VectorXd y = patches.col(order[i]);
        const SparseCode code = ista_encode(y, dict.atoms, gram, lipschitz, config.lambda,
                                            config.ista_max_iter, config.ista_tol);
        if (code.support.empty()) continue;
        dict.stat_a.noalias() += code.coefficients * code.coefficients.transpose();
        dict.stat_b.noalias() += y * code.coefficients.transpose();
        touched = true;
      }
      // All-zero codes leave A and B untouched, so the update is skipped too.
      if (!touched) continue;
      const UpdateReport update =
          dictionary_update_step(dict.atoms, dict.stat_a, dict.stat_b, reseeder);
      if (observer.on_update) observer.on_update(update);
      gram.noalias() = dict.atoms.transpose() * dict.atoms;
      lipschitz = 1.01 * spectral_norm_squared(gram);
    }
    report_epoch(epoch);
  }
  return dict;
}

void save_dictionary(const Dictionary& dict, const std::filesystem::path& path) {
  save_matrix(dict.atoms, path);
  write_key_values(path.string() + ".meta", {{"trained_on", to_string(dict.trained_on)},
                                             {"seed", std::to_string(dict.seed)},
                                             {"lambda", format_double(dict.lambda)},
                                             {"num_atoms", std::to_string(dict.num_atoms())}});
}

Dictionary load_dictionary(const std::filesystem::path& path) {
  Dictionary dict;
  dict.atoms = load_matrix(path);
  const KeyValues meta = read_key_values(path.string() + ".meta");
  auto field = [&](const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) {
      throw Error(ErrorCode::Truncated, "dictionary sidecar lacks '" + key + "'");
    }
    return it->second;
  };
  dict.trained_on = parse_provenance(field("trained_on"));
  dict.seed = std::stoull(field("seed"));
  dict.lambda = std::stod(field("lambda"));
  if (std::stoull(field("num_atoms")) != dict.num_atoms()) {
    throw Error(ErrorCode::CountMismatch, "sidecar num_atoms disagrees with " + path.string());
  }
  dict.stat_a = Eigen::MatrixXd::Zero(dict.atoms.cols(), dict.atoms.cols());
  dict.stat_b = Eigen::MatrixXd::Zero(dict.atoms.rows(), dict.atoms.cols());
  return dict;
}

}  // namespace ddl

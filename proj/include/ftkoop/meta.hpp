#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ftkoop/gp.hpp"
#include "ftkoop/observables.hpp"
#include "ftkoop/run.hpp"

namespace ftkoop {

struct MetaRecord {
  LibraryMask mask;
  double J_R = std::numeric_limits<double>::infinity();
  double ell = std::numeric_limits<double>::infinity();
  int n_xi = 0;
  std::string run_summary;  // short reference to the identifier run behind this record
  bool converged = false;
  bool diverged = false;
};

/// J_R = ell + lambda * n_xi, or a record with infinite cost when the
/// identifier run diverges. The library is identified from scratch on the
/// shared plant trajectory and scored on its own history stack.
MetaRecord meta_cost(const ObservableLibrary& lib, double lambda_sparsity, const RunConfig& run_cfg,
                     const InputMap& input_map = identity_input_map());

/// EI for minimization: (best - mean) Phi(Z) + sd phi(Z), Z = (best - mean) / sd;
/// zero when sd = 0.
double expected_improvement(double mean, double sd, double best);

using MetaEvaluator = std::function<MetaRecord(const LibraryMask&)>;

struct MetaSearchConfig {
  double lambda_sparsity = 0.1;
  /// Total evaluation budget, seed evaluations included.
  int t_outer = 30;
  int n_init = 5;
  int patience = 10;
  std::uint64_t seed = 0;
  std::optional<GpHyper> gp;  // defaults_for(N) when unset
  std::vector<LibraryMask> whitelist;  // empty: every nonempty mask
  /// Records whose J_R is within tie_tol of the minimum tie; the lowest mask value wins.
  double tie_tol = 1e-9;
  /// Multi-start count for the continuous acquisition search (N > 12 only).
  int ascent_starts = 32;

  void validate() const;
};

struct BoState {
  int n_bits = 0;
  std::vector<MetaRecord> dataset;
  std::optional<GpModel> gp;
  int best = -1;
  int budget = 0;
  std::uint64_t rng_seed = 0;

  const MetaRecord& best_record() const { return dataset.at(static_cast<std::size_t>(best)); }
};

/// Index of the minimum-J record with the documented tie-break, -1 if empty.
int argmin_record(const std::vector<MetaRecord>& records, double tie_tol = 1e-9);

/// GP training targets: infinite costs are replaced by (worst finite + 1).
Eigen::VectorXd gp_targets(const std::vector<MetaRecord>& records);

/// Fits the GP of `state` on its dataset.
void refit(BoState& state, const GpHyper& hyper);

/// Maximizes EI over the design space and rounds to a mask.
LibraryMask propose_next(const BoState& state, const MetaSearchConfig& cfg);

struct BoResult {
  MetaRecord best;
  std::vector<MetaRecord> history;
  std::vector<double> best_so_far;
};

BoResult run_bo(int n_bits, const MetaSearchConfig& cfg, const MetaEvaluator& evaluate);

struct OracleResult {
  MetaRecord best;
  std::vector<MetaRecord> table;  // ascending mask value
};

/// Evaluates every nonempty mask (or the whitelist), fanning out over `jobs` threads.
OracleResult exhaustive_oracle(int n_bits, const MetaSearchConfig& cfg, const MetaEvaluator& evaluate, int jobs = 1);

/// Evaluator backed by meta_cost over `catalog`.
MetaEvaluator library_evaluator(const ObservableCatalog& catalog, double lambda_sparsity, const RunConfig& run_cfg,
                                const InputMap& input_map = identity_input_map());

}  // namespace ftkoop

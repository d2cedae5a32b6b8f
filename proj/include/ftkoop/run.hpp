#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ftkoop/identifier.hpp"
#include "ftkoop/memory.hpp"
#include "ftkoop/observables.hpp"
#include "ftkoop/plant.hpp"

namespace ftkoop {

struct StackConfig {
  int capacity = 21;
  /// Uniform recording at t_j = j * record_dt, j = 1..capacity (a 2 s window by default).
  double record_dt = 2.0 / 21.0;
  double rank_tol = 1e-6;
  ReplacementPolicy policy = ReplacementPolicy::kNone;
};

struct RunConfig {
  PlantParams plant;
  Eigen::Vector2d x0{1.0, -1.0};
  double dt = 1e-4;
  double t_final = 5.0;
  double filter_gain = 1.0;
  FlowConfig flow;
  StackConfig stack;
  /// Keep one full log row every `log_every` steps (diagnostics are kept at every step).
  int log_every = 10;
  /// Initial estimate; zero when unset.
  std::optional<Eigen::MatrixXd> sigma_init;
  /// Ground truth Sigma*, when known, for error diagnostics.
  std::optional<Eigen::MatrixXd> sigma_star;

  void validate(const ObservableLibrary& lib) const;
};

/// Per-step diagnostics kept for the whole run.
struct StepDiagnostics {
  double t;
  double g_norm;
  double v;
  double e_norm;
  double sigma_error;  // |Sigma_hat - Sigma*|_F, NaN without ground truth
};

/// One full log row (see timeseries_header()).
struct LogRow {
  double t;
  Eigen::Vector2d x;
  Eigen::VectorXd xi;
  Eigen::VectorXd xi_bar;
  Eigen::VectorXd xi_hat_bar;
  double u;
  double n_s;
  double e_norm;
  double g_norm;
  double v;
  double regret;
  Eigen::VectorXd sigma_t_vec;  // vec(Sigma_hat^T)
};

struct RunResult {
  ObservableLibrary library;
  KoopmanEstimated estimate;
  HistoryStackd stack;
  std::vector<StepDiagnostics> steps{};
  std::vector<LogRow> rows{};

  bool activated = false;           // rank condition held on the completed stack
  double t_activation = 0.0;        // t_a
  double g_activation = 0.0;        // |g(t_a)|
  double t_star = 0.0;              // |g(t_a)| / alpha
  std::optional<double> t_converged{};// first t >= t_a with |Sigma_tilde| < 1e-3 (ground truth)
  bool stopped_on_tolerance = false;  // |g| < stop_tol after activation
  double regret_to_t_star = 0.0;    // int_{t_a}^{t_a + t*} |g|
  double regret_bound = 0.0;        // |g(t_a)|^2 / (2 alpha)
  int lyapunov_violations = 0;      // increases of V after t_a while |g| > 10 delta
  int flow_halvings = 0;
  double t_end = 0.0;
  double final_g_norm = 0.0;
  double eval_loss = 0.0;           // mean_k |Sigma_hat^T h_k - y_k| over the stack

  /// Convergence certificate: rank condition reached and |g| fell below stop_tol.
  bool converged() const { return activated && stopped_on_tolerance; }
  std::optional<double> measured_convergence_time() const {
    if (!t_converged) return std::nullopt;
    return *t_converged - t_activation;
  }
};

inline constexpr double kConvergenceTol = 1e-3;

/// Co-integrates plant, filters and the finite-time flow for one library.
/// Throws DivergenceError if any state becomes non-finite.
RunResult integrate_identifier(const ObservableLibrary& lib, const RunConfig& cfg,
                               const InputMap& input_map = identity_input_map());

/// Sigma* for theta = {1,2,4,9} over the default catalog, else nullopt.
std::optional<Eigen::MatrixXd> known_sigma_star(const ObservableLibrary& lib, const ObservableCatalog& catalog,
                                                const PlantParams& plant);

/// mean_k |Sigma^T h_k - y_k| over the stored samples.
double stored_sample_loss(const KoopmanEstimated& est, const HistoryStackd& stack);

}  // namespace ftkoop

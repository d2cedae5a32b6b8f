#include "ftkoop/run.hpp"

#include <cmath>
#include <limits>

#include "ftkoop/filters.hpp"

namespace ftkoop {

void RunConfig::validate(const ObservableLibrary& lib) const {
  plant.validate();
  flow.validate();
  if (!(dt > 0)) throw InputError("run: dt must be positive");
  if (!(t_final > 0)) throw InputError("run: t_final must be positive");
  if (!(filter_gain > 0)) throw InputError("run: filter gain must be positive");
  if (stack.capacity < 1) throw InputError("run: stack capacity must be at least 1");
  if (!(stack.record_dt > 0)) throw InputError("run: record_dt must be positive");
  if (log_every < 1) throw InputError("run: log_every must be at least 1");
  if (lib.state_dim() != 2) throw InputError("run: benchmark plant has two states");
  if (sigma_init && (sigma_init->rows() != lib.n_xi() + 1 || sigma_init->cols() != lib.n_xi())) {
    throw InputError("run: initial estimate has the wrong shape");
  }
}

std::optional<Eigen::MatrixXd> known_sigma_star(const ObservableLibrary& lib, const ObservableCatalog& catalog,
                                                const PlantParams& plant) {
  if (catalog.state_dim() != 2) return std::nullopt;
  const std::vector<Monomial> exact{{{1, 0}}, {{0, 1}}, {{2, 0}}, {{4, 0}}};
  if (lib.terms() != exact) return std::nullopt;
  const auto truth = true_koopman(plant);
  return KoopmanEstimated::from_ab(truth.A, truth.B).sigma();
}

double stored_sample_loss(const KoopmanEstimated& est, const HistoryStackd& stack) {
  if (stack.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : stack.samples()) total += (est.sigma().transpose() * s.h_bar - s.y).norm();
  return total / stack.size();
}

namespace {

// Plant and filters advance as one cascade so the filter forcing sees the
// plant's RK4 stage states.
struct JointState {
  Eigen::Vector2d x;
  Eigen::VectorXd h;
  Eigen::VectorXd l;
};

class JointSystem {
 public:
  JointSystem(const ObservableLibrary& lib, const RunConfig& cfg, const InputMap& input_map)
      : lib_(lib), cfg_(cfg), input_map_(input_map) {}

  double input(double t) const { return probing_input(t, cfg_.plant); }

  JointState derivative(double t, const JointState& s) const {
    const double u = input(t);
    const Eigen::VectorXd xi = lift(lib_, s.x);
    const Eigen::VectorXd psi = input_map_(u);
    JointState d;
    d.x = plant_derivative<double>(s.x, u, cfg_.plant);
    d.h = -cfg_.filter_gain * s.h + stack_regressor<double>(xi, psi);
    d.l = -cfg_.filter_gain * s.l + xi;
    return d;
  }

  JointState step(double t, const JointState& s, double dt) const {
    auto axpy = [](const JointState& a, double w, const JointState& d) {
      return JointState{a.x + w * d.x, a.h + w * d.h, a.l + w * d.l};
    };
    const JointState k1 = derivative(t, s);
    const JointState k2 = derivative(t + dt / 2, axpy(s, dt / 2, k1));
    const JointState k3 = derivative(t + dt / 2, axpy(s, dt / 2, k2));
    const JointState k4 = derivative(t + dt, axpy(s, dt, k3));
    JointState next{s.x + dt / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x),
                    s.h + dt / 6 * (k1.h + 2 * k2.h + 2 * k3.h + k4.h),
                    s.l + dt / 6 * (k1.l + 2 * k2.l + 2 * k3.l + k4.l)};
    if (!next.x.allFinite() || !next.h.allFinite() || !next.l.allFinite()) {
      throw DivergenceError("run: non-finite plant/filter state at t=" + std::to_string(t + dt));
    }
    return next;
  }

 private:
  const ObservableLibrary& lib_;
  const RunConfig& cfg_;
  const InputMap& input_map_;
};

}  // namespace

RunResult integrate_identifier(const ObservableLibrary& lib, const RunConfig& cfg, const InputMap& input_map) {
  cfg.validate(lib);
  const int n = lib.n_xi();
  const int m = static_cast<int>(input_map(0.0).size());
  if (m < 1) throw InputError("run: input map must produce at least one channel");

  JointSystem system(lib, cfg, input_map);
  const Eigen::VectorXd xi0 = lift(lib, cfg.x0);
  JointState state{cfg.x0, Eigen::VectorXd::Zero(n + m), Eigen::VectorXd::Zero(n)};
  FilterStated filter(xi0, m, cfg.filter_gain);

  RunResult result{
      .library = lib,
      .estimate = cfg.sigma_init ? KoopmanEstimated(*cfg.sigma_init) : KoopmanEstimated(n, m),
      .stack = HistoryStackd(n + m, n, cfg.stack.capacity, cfg.stack.rank_tol, cfg.stack.policy),
  };
  Eigen::MatrixXd sigma_t = result.estimate.sigma().transpose();

  const auto steps = static_cast<long>(std::llround(cfg.t_final / cfg.dt));
  const double record_dt = cfg.stack.record_dt;
  long next_record = 1;
  const double ten_delta = 10.0 * cfg.flow.delta;
  double prev_v = std::numeric_limits<double>::quiet_NaN();
  double running_regret = 0.0;
  double prev_g_norm = 0.0;
  double prev_t = 0.0;
  result.steps.reserve(static_cast<std::size_t>(steps + 1));

  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    filter.h = state.h;
    filter.l = state.l;
    filter.t = t;
    const Eigen::VectorXd xi = lift(lib, state.x);
    const NormalizedSnapshotd snap = normalize(filter, xi);
    const FlowProblem<double> problem = FlowProblem<double>::from(snap, result.stack);
    const Eigen::MatrixXd e_matrix = problem.residual_matrix(sigma_t);
    const double g_norm = e_matrix.norm();
    const double v = g_norm * g_norm;
    const Eigen::VectorXd e_now = sigma_t * snap.h_bar - snap.target();
    double sigma_error = std::numeric_limits<double>::quiet_NaN();
    if (cfg.sigma_star) sigma_error = (sigma_t.transpose() - *cfg.sigma_star).norm();

    if (!result.activated && result.stack.full() && result.stack.rank_condition().satisfied) {
      result.activated = true;
      result.t_activation = t;
      result.g_activation = g_norm;
      result.t_star = settling_time(g_norm, cfg.flow.alpha);
      result.regret_bound = v / (2.0 * cfg.flow.alpha);
    } else if (result.activated) {
      if (g_norm > ten_delta && v > prev_v * (1.0 + 1e-12)) ++result.lyapunov_violations;
      running_regret += 0.5 * (prev_g_norm + g_norm) * (t - prev_t);
    }
    if (result.activated && !result.t_converged && cfg.sigma_star && sigma_error < kConvergenceTol) {
      result.t_converged = t;
    }
    result.steps.push_back({t, g_norm, v, e_now.norm(), sigma_error});

    const bool stop_tol_hit = result.activated && g_norm < cfg.flow.stop_tol;
    const bool last = k >= steps || stop_tol_hit;
    if (k % cfg.log_every == 0 || last) {
      const Eigen::VectorXd xi_hat_bar = predict_lifted(Eigen::MatrixXd(sigma_t.transpose()), snap);
      result.rows.push_back({t, state.x, xi, snap.xi_bar, xi_hat_bar, system.input(t), snap.n_s, e_now.norm(),
                             g_norm, v, running_regret,
                             Eigen::Map<const Eigen::VectorXd>(sigma_t.data(), sigma_t.size())});
    }
    prev_v = v;
    prev_g_norm = g_norm;
    prev_t = t;
    if (last) {
      result.stopped_on_tolerance = stop_tol_hit;
      result.t_end = t;
      result.final_g_norm = g_norm;
      break;
    }

    result.flow_halvings += advance_flow(sigma_t, problem, cfg.flow, cfg.dt).halvings;
    state = system.step(t, state, cfg.dt);

    const double t_next = static_cast<double>(k + 1) * cfg.dt;
    const bool recording = !result.stack.full() || cfg.stack.policy == ReplacementPolicy::kGreedy;
    if (recording && t_next >= static_cast<double>(next_record) * record_dt - 0.5 * cfg.dt) {
      filter.h = state.h;
      filter.l = state.l;
      filter.t = t_next;
      result.stack.record(normalize(filter, Eigen::VectorXd(lift(lib, state.x))));
      ++next_record;
    }
  }

  result.estimate = KoopmanEstimated(Eigen::MatrixXd(sigma_t.transpose()));
  if (result.activated) {
    std::vector<GNormSample> g_traj;
    g_traj.reserve(result.steps.size());
    for (const auto& s : result.steps) g_traj.push_back({s.t, s.g_norm});
    result.regret_to_t_star = regret(g_traj, result.t_activation, result.t_activation + result.t_star);
  }
  result.eval_loss = stored_sample_loss(result.estimate, result.stack);
  return result;
}

}  // namespace ftkoop

#include "ftkoop/io.hpp"

#include <charconv>
#include <cmath>

#include <nlohmann/json.hpp>

namespace ftkoop {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::string> timeseries_columns(const ObservableLibrary& lib, int input_dim) {
  std::vector<std::string> cols{"t", "x1", "x2"};
  for (const char* prefix : {"xi_", "xi_bar_", "xi_hat_bar_"}) {
    for (int k : lib.theta()) cols.push_back(prefix + std::to_string(k));
  }
  for (const char* name : {"u", "n_s", "e_norm", "g_norm", "V", "regret"}) cols.emplace_back(name);
  const int n = lib.n_xi();
  for (int j = 0; j < n + input_dim; ++j) {
    for (int i = 0; i < n; ++i) {
      cols.push_back(j < n ? "A_" + std::to_string(i + 1) + "_" + std::to_string(j + 1)
                           : "B_" + std::to_string(i + 1) + "_" + std::to_string(j - n + 1));
    }
  }
  return cols;
}

void write_timeseries_csv(std::ostream& out, const RunResult& run, int input_dim) {
  out << kTimeseriesSchema << '\n';
  const auto cols = timeseries_columns(run.library, input_dim);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  auto put_vec = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v(i));
  };
  for (const auto& row : run.rows) {
    out << format_double(row.t);
    put_vec(row.x);
    put_vec(row.xi);
    put_vec(row.xi_bar);
    put_vec(row.xi_hat_bar);
    for (double v : {row.u, row.n_s, row.e_norm, row.g_norm, row.v, row.regret}) out << ',' << format_double(v);
    put_vec(row.sigma_t_vec);
    out << '\n';
  }
}

void write_meta_history_csv(std::ostream& out, const std::vector<MetaRecord>& records, double tie_tol) {
  out << kMetaHistorySchema << '\n' << "iter,mask,n_xi,ell,J_R,best_so_far\n";
  std::vector<MetaRecord> prefix;
  prefix.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    prefix.push_back(records[i]);
    const double best = prefix[static_cast<std::size_t>(argmin_record(prefix, tie_tol))].J_R;
    const auto& r = records[i];
    out << i << ',' << r.mask.to_string() << ',' << r.n_xi << ',' << format_double(r.ell) << ','
        << format_double(r.J_R) << ',' << format_double(best) << '\n';
  }
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json record_to_json(const MetaRecord& rec) {
  return {{"mask", rec.mask.to_string()},
          {"n_xi", rec.n_xi},
          {"ell", finite_or_null(rec.ell)},
          {"J_R", finite_or_null(rec.J_R)},
          {"converged", rec.converged},
          {"diverged", rec.diverged},
          {"run", rec.run_summary}};
}

nlohmann::json run_summary_json(const ExperimentConfig& cfg, const RunResult& run,
                                const std::optional<Eigen::MatrixXd>& sigma_star) {
  const auto cert = run.stack.rank_condition();
  nlohmann::json j;
  j["library"] = {{"theta", run.library.theta()}, {"mask", encode_mask(run.library).to_string()},
                  {"observables", run.library.to_string()}};
  j["rank_condition_satisfied"] = run.activated;
  j["t_a"] = run.activated ? nlohmann::json(run.t_activation) : nlohmann::json(nullptr);
  j["g_at_t_a"] = run.activated ? nlohmann::json(run.g_activation) : nlohmann::json(nullptr);
  j["t_star"] = run.activated ? nlohmann::json(run.t_star) : nlohmann::json(nullptr);
  const auto measured = run.measured_convergence_time();
  j["measured_convergence_time"] = measured ? nlohmann::json(*measured) : nlohmann::json(nullptr);
  j["regret"] = run.regret_to_t_star;
  j["regret_bound"] = run.regret_bound;
  j["lyapunov_violations"] = run.lyapunov_violations;
  j["flow_halvings"] = run.flow_halvings;
  j["converged"] = run.converged();
  j["stopped_on_tolerance"] = run.stopped_on_tolerance;
  j["t_end"] = run.t_end;
  j["final_g_norm"] = run.final_g_norm;
  j["eval_loss"] = run.eval_loss;
  j["m_theta"] = cert.m_theta;
  j["A_hat"] = matrix_to_json(run.estimate.a());
  j["B_hat"] = matrix_to_json(run.estimate.b());
  j["sigma_hat"] = matrix_to_json(run.estimate.sigma());
  if (sigma_star) {
    const KoopmanEstimated truth(*sigma_star);
    j["A_true"] = matrix_to_json(truth.a());
    j["B_true"] = matrix_to_json(truth.b());
    j["max_abs_error_A"] = (run.estimate.a() - truth.a()).cwiseAbs().maxCoeff();
    j["max_abs_error_B"] = (run.estimate.b() - truth.b()).cwiseAbs().maxCoeff();
    j["sigma_error_fro"] = (run.estimate.sigma() - *sigma_star).norm();
  }
  j["stack"] = stack_to_json(run.stack);
  j["warnings"] = config_warnings(cfg);
  j["config"] = cfg.to_json();
  return j;
}

}  // namespace ftkoop

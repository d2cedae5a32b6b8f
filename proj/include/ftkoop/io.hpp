#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ftkoop/config.hpp"
#include "ftkoop/meta.hpp"
#include "ftkoop/run.hpp"

namespace ftkoop {

inline constexpr const char* kTimeseriesSchema = "# ftkoop timeseries v1";
inline constexpr const char* kMetaHistorySchema = "# ftkoop meta_history v1";

/// Column names for a library with n_xi observables and m inputs:
/// t, x1, x2, xi_<k>..., xi_bar_<k>..., xi_hat_bar_<k>..., u, n_s, e_norm,
/// g_norm, V, regret, then vec(Sigma_hat^T) as A_<i>_<j> / B_<i>_<j>
/// (column-major over [A, B]). <k> is the catalog index of each observable.
std::vector<std::string> timeseries_columns(const ObservableLibrary& lib, int input_dim);

void write_timeseries_csv(std::ostream& out, const RunResult& run, int input_dim);

/// iter, mask, n_xi, ell, J_R, best_so_far.
void write_meta_history_csv(std::ostream& out, const std::vector<MetaRecord>& records, double tie_tol = 1e-9);

nlohmann::json record_to_json(const MetaRecord& rec);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);

/// Summary of one identification run, echoing the resolved config.
nlohmann::json run_summary_json(const ExperimentConfig& cfg, const RunResult& run,
                                const std::optional<Eigen::MatrixXd>& sigma_star);

/// Shortest round-trip formatting, so identical runs give identical bytes.
std::string format_double(double v);

}  // namespace ftkoop

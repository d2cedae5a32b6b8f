#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "ftkoop/io.hpp"

using namespace ftkoop;

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

RunResult short_run() {
  const ObservableLibrary lib(default_catalog(), {1, 2, 4, 9});
  RunConfig cfg;
  cfg.t_final = 0.05;
  cfg.log_every = 100;
  return integrate_identifier(lib, cfg);
}

}  // namespace

TEST_CASE("number formatting round-trips") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-6) == "1e-06");
  CHECK(format_double(-2.0) == "-2");
  CHECK(format_double(1.0 / 0.0) == "inf");
  CHECK(format_double(0.0 / 0.0) == "nan");
  for (double v : {1.0 / 3.0, 2.0 / 21.0, 1.1916949938405974, -7.25e-300}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("timeseries columns") {
  const ObservableLibrary lib(default_catalog(), {1, 2, 4, 9});
  const auto cols = timeseries_columns(lib, 1);
  CHECK(cols.size() == 3 + 3 * 4 + 6 + 20);
  CHECK(cols[0] == "t");
  CHECK(cols[3] == "xi_1");
  CHECK(cols[6] == "xi_9");
  CHECK(cols[7] == "xi_bar_1");
  CHECK(cols[11] == "xi_hat_bar_1");
  CHECK(cols[15] == "u");
  CHECK(cols[20] == "regret");
  CHECK(cols[21] == "A_1_1");
  CHECK(cols[22] == "A_2_1");
  CHECK(cols[25] == "A_1_2");
  CHECK(cols.back() == "B_4_1");
}

TEST_CASE("timeseries CSV layout and determinism") {
  const auto run = short_run();
  std::ostringstream a, b;
  write_timeseries_csv(a, run, 1);
  write_timeseries_csv(b, short_run(), 1);
  CHECK(a.str() == b.str());

  std::istringstream in(a.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == kTimeseriesSchema);
  std::getline(in, line);
  const auto header = split_line(line);
  CHECK(header == timeseries_columns(run.library, 1));
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(split_line(line).size() == header.size());
    ++rows;
  }
  CHECK(rows == static_cast<int>(run.rows.size()));
  CHECK(rows == 6);  // t = 0, 0.01, ..., 0.05

  // The sigma columns hold vec(Sigma_hat^T): column j of [A, B] stacked.
  const auto& last = run.rows.back();
  const Eigen::MatrixXd ab = run.estimate.sigma().transpose();
  CHECK(last.sigma_t_vec(1) == ab(1, 0));
  CHECK(last.sigma_t_vec(16) == ab(0, 4));
}

TEST_CASE("meta history CSV") {
  std::vector<MetaRecord> recs(3);
  recs[0].mask = LibraryMask::parse("110");
  recs[0].n_xi = 2;
  recs[0].ell = 0.1;
  recs[0].J_R = 0.3;
  recs[1].mask = LibraryMask::parse("011");
  recs[1].n_xi = 2;
  recs[1].diverged = true;
  recs[2].mask = LibraryMask::parse("100");
  recs[2].n_xi = 1;
  recs[2].ell = 0.05;
  recs[2].J_R = 0.15;
  std::ostringstream out;
  write_meta_history_csv(out, recs);
  CHECK(out.str() == std::string(kMetaHistorySchema) +
                         "\niter,mask,n_xi,ell,J_R,best_so_far\n"
                         "0,110,2,0.1,0.3,0.3\n"
                         "1,011,2,inf,inf,0.3\n"
                         "2,100,1,0.05,0.15,0.15\n");
}

TEST_CASE("summary JSON") {
  const auto run = short_run();
  const auto cfg = parse_config("[library]\ntheta = 1, 2, 4, 9\n[run]\nt_final = 0.05\n");
  const auto truth = known_sigma_star(run.library, default_catalog(), cfg.run.plant);
  const auto j = run_summary_json(cfg, run, truth);
  CHECK(j["library"]["mask"] == "110100001");
  CHECK(j["rank_condition_satisfied"] == false);
  CHECK(j["t_a"].is_null());
  CHECK(j["A_hat"].size() == 4);
  CHECK(j["B_hat"][0].size() == 1);
  CHECK(j.contains("max_abs_error_A"));
  CHECK(j["config"]["run"]["t_final"] == 0.05);
  const auto rec = record_to_json(MetaRecord{});
  CHECK(rec["J_R"].is_null());
}

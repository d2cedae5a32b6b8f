#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ftkoop/config.hpp"
#include "ftkoop/io.hpp"
#include "ftkoop/meta.hpp"
#include "ftkoop/run.hpp"

namespace fs = std::filesystem;
using namespace ftkoop;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kNotConverged = 2;

struct Common {
  std::string config_path;
  std::string out_dir;
};

fs::path prepare_output(const Common& opts, const ExperimentConfig& cfg) {
  const std::string dir = opts.out_dir.empty() ? cfg.output_dir : opts.out_dir;
  if (dir.empty()) throw ConfigError("no output directory: pass --out or set output.dir");
  fs::create_directories(dir);
  fs::copy_file(opts.config_path, fs::path(dir) / "config.cfg", fs::copy_options::overwrite_existing);
  return dir;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  f << j.dump(2) << '\n';
}

void print_warnings(const ExperimentConfig& cfg) {
  for (const auto& w : config_warnings(cfg)) std::cerr << "warning: " << w << '\n';
}

int cmd_identify(const Common& opts) {
  const ExperimentConfig cfg = load_config(opts.config_path);
  const ObservableLibrary lib = cfg.require_library();
  const fs::path out = prepare_output(opts, cfg);
  print_warnings(cfg);

  RunConfig run_cfg = cfg.run;
  run_cfg.sigma_star = known_sigma_star(lib, cfg.catalog, cfg.run.plant);
  try {
    const RunResult run = integrate_identifier(lib, run_cfg);
    std::ofstream csv(out / "timeseries.csv");
    write_timeseries_csv(csv, run, 1);
    nlohmann::json summary = run_summary_json(cfg, run, run_cfg.sigma_star);
    const int code = run.converged() ? kOk : kNotConverged;
    summary["exit_code"] = code;
    write_json(out / "summary.json", summary);
    std::cout << "theta=" << lib.to_string() << " rank_condition=" << (run.activated ? "yes" : "no");
    if (run.activated) std::cout << " t_a=" << run.t_activation << " t*=" << run.t_star;
    std::cout << " |g|=" << run.final_g_norm << " converged=" << (run.converged() ? "yes" : "no") << '\n';
    return code;
  } catch (const DivergenceError& e) {
    write_json(out / "summary.json",
               {{"diverged", true}, {"error", e.what()}, {"exit_code", kNotConverged}, {"config", cfg.to_json()}});
    std::cerr << "error: " << e.what() << '\n';
    return kNotConverged;
  }
}

nlohmann::json history_json(const std::vector<MetaRecord>& records) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : records) out.push_back(record_to_json(r));
  return out;
}

int cmd_meta(const Common& opts, const std::optional<std::uint64_t>& seed) {
  ExperimentConfig cfg = load_config(opts.config_path);
  if (seed) cfg.meta.seed = cfg.seed = *seed;
  const fs::path out = prepare_output(opts, cfg);
  const auto evaluate = library_evaluator(cfg.catalog, cfg.meta.lambda_sparsity, cfg.run);
  const BoResult bo = run_bo(cfg.catalog.size(), cfg.meta, evaluate);

  std::ofstream csv(out / "meta_history.csv");
  write_meta_history_csv(csv, bo.history, cfg.meta.tie_tol);
  const ObservableLibrary best = decode_mask(cfg.catalog, bo.best.mask);
  write_json(out / "summary.json", {{"theta_star", best.theta()},
                                    {"mask_star", bo.best.mask.to_string()},
                                    {"J_R_star", bo.best.J_R},
                                    {"evaluations", bo.history.size()},
                                    {"history", history_json(bo.history)},
                                    {"config", cfg.to_json()}});
  std::cout << "theta*=" << best.to_string() << " J_R*=" << bo.best.J_R << " evaluations=" << bo.history.size()
            << '\n';
  return kOk;
}

int cmd_oracle(const Common& opts, int jobs) {
  const ExperimentConfig cfg = load_config(opts.config_path);
  const fs::path out = prepare_output(opts, cfg);
  const auto evaluate = library_evaluator(cfg.catalog, cfg.meta.lambda_sparsity, cfg.run);
  const OracleResult oracle = exhaustive_oracle(cfg.catalog.size(), cfg.meta, evaluate, jobs);

  std::ofstream csv(out / "meta_history.csv");
  write_meta_history_csv(csv, oracle.table, cfg.meta.tie_tol);
  const ObservableLibrary best = decode_mask(cfg.catalog, oracle.best.mask);
  write_json(out / "summary.json", {{"theta_star", best.theta()},
                                    {"mask_star", oracle.best.mask.to_string()},
                                    {"J_R_star", oracle.best.J_R},
                                    {"evaluations", oracle.table.size()},
                                    {"table", history_json(oracle.table)},
                                    {"config", cfg.to_json()}});
  std::cout << "theta*=" << best.to_string() << " J_R*=" << oracle.best.J_R << " evaluations=" << oracle.table.size()
            << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-time Koopman identification and observable-library search"};
  app.require_subcommand(1);

  Common identify_opts, meta_opts, oracle_opts;
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  auto add_common = [](CLI::App* sub, Common& o) {
    sub->add_option("--config", o.config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out_dir, "Output directory (default: output.dir from the config)");
  };
  auto* identify = app.add_subcommand("identify", "Identify one library and log the run");
  add_common(identify, identify_opts);
  auto* meta = app.add_subcommand("meta", "Bayesian-optimization search over libraries");
  add_common(meta, meta_opts);
  meta->add_option("--seed", seed, "Override rng.seed");
  auto* oracle = app.add_subcommand("oracle", "Exhaustive search over every library");
  add_common(oracle, oracle_opts);
  oracle->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (*identify) return cmd_identify(identify_opts);
    if (*meta) return cmd_meta(meta_opts, seed);
    return cmd_oracle(oracle_opts, jobs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kInvalid;
}

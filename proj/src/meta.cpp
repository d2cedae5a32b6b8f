#include "ftkoop/meta.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <random>
#include <set>
#include <thread>

namespace ftkoop {

void MetaSearchConfig::validate() const {
  if (!(lambda_sparsity >= 0)) throw InputError("meta: lambda_sparsity must be non-negative");
  if (t_outer < 1) throw InputError("meta: T_outer must be at least 1");
  if (n_init < 1) throw InputError("meta: n_init must be at least 1");
  if (patience < 1) throw InputError("meta: patience must be at least 1");
  if (!(tie_tol >= 0)) throw InputError("meta: tie_tol must be non-negative");
  if (ascent_starts < 1) throw InputError("meta: ascent_starts must be at least 1");
  if (gp) gp->validate();
  for (const auto& m : whitelist) {
    if (m.popcount() == 0) throw InputError("meta: whitelist contains the empty mask");
  }
}

MetaRecord meta_cost(const ObservableLibrary& lib, double lambda_sparsity, const RunConfig& run_cfg,
                     const InputMap& input_map) {
  RunConfig cfg = run_cfg;
  cfg.sigma_star.reset();
  cfg.sigma_init.reset();
  MetaRecord rec;
  rec.mask = encode_mask(lib);
  rec.n_xi = lib.n_xi();
  try {
    const RunResult run = integrate_identifier(lib, cfg, input_map);
    rec.ell = run.eval_loss;
    rec.J_R = rec.ell + lambda_sparsity * rec.n_xi;
    rec.converged = run.converged();
    char buf[160];
    std::snprintf(buf, sizeof buf, "theta=%s t_a=%s |g|_end=%.3e m_theta=%.3e", lib.to_string().c_str(),
                  run.activated ? std::to_string(run.t_activation).c_str() : "none", run.final_g_norm,
                  run.stack.m_theta());
    rec.run_summary = buf;
  } catch (const DivergenceError& e) {
    rec.diverged = true;
    rec.run_summary = std::string("diverged: ") + e.what();
  }
  if (!std::isfinite(rec.J_R)) {
    rec.ell = rec.J_R = std::numeric_limits<double>::infinity();
    rec.diverged = true;
  }
  return rec;
}

double expected_improvement(double mean, double sd, double best) {
  if (!(sd > 0)) return 0.0;
  const double z = (best - mean) / sd;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return std::max(0.0, (best - mean) * cdf + sd * pdf);
}

int argmin_record(const std::vector<MetaRecord>& records, double tie_tol) {
  if (records.empty()) return -1;
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& r : records) lowest = std::min(lowest, r.J_R);
  int best = -1;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const bool tied = std::isinf(lowest) ? std::isinf(r.J_R) : r.J_R <= lowest + tie_tol;
    if (!tied) continue;
    if (best < 0 || r.mask.value() < records[static_cast<std::size_t>(best)].mask.value()) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

Eigen::VectorXd gp_targets(const std::vector<MetaRecord>& records) {
  double worst = 0.0;
  bool any_finite = false;
  for (const auto& r : records) {
    if (std::isfinite(r.J_R)) {
      worst = any_finite ? std::max(worst, r.J_R) : r.J_R;
      any_finite = true;
    }
  }
  Eigen::VectorXd y(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = std::isfinite(records[i].J_R) ? records[i].J_R : worst + 1.0;
  }
  return y;
}

void refit(BoState& state, const GpHyper& hyper) {
  std::vector<Eigen::VectorXd> x;
  x.reserve(state.dataset.size());
  for (const auto& r : state.dataset) x.push_back(r.mask.as_vector());
  state.gp.emplace(std::move(x), gp_targets(state.dataset), hyper);
}

namespace {

constexpr int kEnumerationLimit = 12;

double ei_at(const GpModel& gp, const Eigen::VectorXd& q, double best) {
  const auto p = gp.posterior(q);
  return expected_improvement(p.mean, std::sqrt(std::max(0.0, p.variance)), best);
}

std::vector<LibraryMask> design_space(int n_bits, const std::vector<LibraryMask>& whitelist) {
  if (!whitelist.empty()) {
    std::vector<LibraryMask> out = whitelist;
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.value() < b.value(); });
    return out;
  }
  std::vector<LibraryMask> out;
  const std::uint64_t count = (std::uint64_t{1} << n_bits) - 1;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t v = 1; v <= count; ++v) out.push_back(LibraryMask::from_value(v, n_bits));
  return out;
}

LibraryMask round_mask(const Eigen::VectorXd& z) {
  LibraryMask m;
  m.bits.resize(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) m.bits[static_cast<std::size_t>(i)] = z(i) >= 0.5 ? 1 : 0;
  return m;
}

LibraryMask continuous_proposal(const BoState& state, const MetaSearchConfig& cfg, double best) {
  const GpModel& gp = *state.gp;
  const int n = state.n_bits;
  std::mt19937_64 rng(state.rng_seed ^ (0x9e3779b97f4a7c15ULL * (state.dataset.size() + 1)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd best_z;
  double best_ei = -1.0;
  for (int s = 0; s < cfg.ascent_starts; ++s) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = unit(rng);
    double step = 0.1;
    double cur = ei_at(gp, z, best);
    for (int it = 0; it < 200 && step > 1e-6; ++it) {
      Eigen::VectorXd grad(n);
      for (int i = 0; i < n; ++i) {
        constexpr double kH = 1e-5;
        Eigen::VectorXd zp = z, zm = z;
        zp(i) = std::min(1.0, z(i) + kH);
        zm(i) = std::max(0.0, z(i) - kH);
        grad(i) = (ei_at(gp, zp, best) - ei_at(gp, zm, best)) / (zp(i) - zm(i));
      }
      const double gn = grad.norm();
      if (gn == 0.0) break;
      const Eigen::VectorXd trial = (z + step * grad / gn).cwiseMax(0.0).cwiseMin(1.0);
      const double val = ei_at(gp, trial, best);
      if (val > cur) {
        z = trial;
        cur = val;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    if (cur > best_ei) {
      best_ei = cur;
      best_z = z;
    }
  }
  LibraryMask m = round_mask(best_z);
  if (m.popcount() > 0) return m;
  // Rounded to the empty set: fall back to the best single-observable mask.
  LibraryMask fallback;
  double fallback_ei = -1.0;
  for (int i = 0; i < n; ++i) {
    LibraryMask unit_mask;
    unit_mask.bits.assign(static_cast<std::size_t>(n), 0);
    unit_mask.bits[static_cast<std::size_t>(i)] = 1;
    const double v = ei_at(gp, unit_mask.as_vector(), best);
    if (v > fallback_ei) {
      fallback_ei = v;
      fallback = unit_mask;
    }
  }
  return fallback;
}

}  // namespace

LibraryMask propose_next(const BoState& state, const MetaSearchConfig& cfg) {
  if (!state.gp) throw InputError("meta: propose_next needs a fitted GP");
  if (state.best < 0) throw InputError("meta: propose_next needs at least one record");
  const double best = gp_targets(state.dataset)(state.best);
  if (state.n_bits > kEnumerationLimit && cfg.whitelist.empty()) return continuous_proposal(state, cfg, best);
  LibraryMask chosen;
  double chosen_ei = -1.0;
  for (const auto& m : design_space(state.n_bits, cfg.whitelist)) {
    const double v = ei_at(*state.gp, m.as_vector(), best);
    if (v > chosen_ei) {
      chosen_ei = v;
      chosen = m;
    }
  }
  return chosen;
}

BoResult run_bo(int n_bits, const MetaSearchConfig& cfg, const MetaEvaluator& evaluate) {
  cfg.validate();
  if (n_bits < 1 || n_bits > 62) throw InputError("meta: catalog size must be in [1, 62]");
  for (const auto& m : cfg.whitelist) {
    if (m.size() != n_bits) throw InputError("meta: whitelist mask length differs from the catalog size");
  }
  const GpHyper hyper = cfg.gp.value_or(GpHyper::defaults_for(n_bits));

  BoState state;
  state.n_bits = n_bits;
  state.budget = cfg.t_outer;
  state.rng_seed = cfg.seed;
  BoResult out;

  auto add = [&](MetaRecord rec) {
    state.dataset.push_back(std::move(rec));
    state.best = argmin_record(state.dataset, cfg.tie_tol);
    out.best_so_far.push_back(state.best_record().J_R);
  };

  // Seed masks: distinct uniform draws from the design space while possible.
  std::mt19937_64 rng(cfg.seed);
  const int n_seed = std::min(cfg.n_init, cfg.t_outer);
  std::set<std::uint64_t> drawn;
  const std::uint64_t space_size =
      cfg.whitelist.empty() ? (std::uint64_t{1} << n_bits) - 1 : static_cast<std::uint64_t>(cfg.whitelist.size());
  for (int i = 0; i < n_seed; ++i) {
    std::uniform_int_distribution<std::uint64_t> pick(0, space_size - 1);
    std::uint64_t idx = pick(rng);
    if (drawn.size() < space_size) {
      while (drawn.count(idx)) idx = pick(rng);
    }
    drawn.insert(idx);
    const LibraryMask m = cfg.whitelist.empty() ? LibraryMask::from_value(idx + 1, n_bits)
                                                : cfg.whitelist[static_cast<std::size_t>(idx)];
    add(evaluate(m));
  }

  int stagnant = 0;
  while (static_cast<int>(state.dataset.size()) < cfg.t_outer && stagnant < cfg.patience) {
    refit(state, hyper);
    const double before = state.best_record().J_R;
    add(evaluate(propose_next(state, cfg)));
    stagnant = state.best_record().J_R < before ? 0 : stagnant + 1;
  }
  out.history = state.dataset;
  out.best = state.best_record();
  return out;
}

OracleResult exhaustive_oracle(int n_bits, const MetaSearchConfig& cfg, const MetaEvaluator& evaluate, int jobs) {
  if (n_bits < 1 || n_bits > 24) throw InputError("meta: exhaustive search needs a catalog size in [1, 24]");
  if (jobs < 1) throw InputError("meta: jobs must be at least 1");
  for (const auto& m : cfg.whitelist) {
    if (m.size() != n_bits) throw InputError("meta: whitelist mask length differs from the catalog size");
  }
  const std::vector<LibraryMask> space = design_space(n_bits, cfg.whitelist);
  OracleResult out;
  out.table.resize(space.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < space.size(); i = next++) {
      try {
        out.table[i] = evaluate(space[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min<int>(jobs, static_cast<int>(space.size()));
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  out.best = out.table.at(static_cast<std::size_t>(argmin_record(out.table, cfg.tie_tol)));
  return out;
}

MetaEvaluator library_evaluator(const ObservableCatalog& catalog, double lambda_sparsity, const RunConfig& run_cfg,
                                const InputMap& input_map) {
  return [catalog, lambda_sparsity, run_cfg, input_map](const LibraryMask& mask) {
    return meta_cost(decode_mask(catalog, mask), lambda_sparsity, run_cfg, input_map);
  };
}

}  // namespace ftkoop

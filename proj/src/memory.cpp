#include "ftkoop/memory.hpp"

#include <nlohmann/json.hpp>

namespace ftkoop {

namespace {

nlohmann::json to_array(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd from_array(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

nlohmann::json stack_to_json(const HistoryStackd& stack) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : stack.samples()) {
    samples.push_back({{"t", s.t}, {"h_bar", to_array(s.h_bar)}, {"y", to_array(s.y)}});
  }
  const auto cert = stack.rank_condition();
  return {{"capacity", stack.capacity()},
          {"regressor_dim", stack.regressor_dim()},
          {"target_dim", stack.target_dim()},
          {"rank_tol", stack.rank_tol()},
          {"policy", stack.policy() == ReplacementPolicy::kGreedy ? "greedy" : "uniform"},
          {"m_theta", cert.m_theta},
          {"rank_condition", cert.satisfied},
          {"samples", samples}};
}

HistoryStackd stack_from_json(const nlohmann::json& j) {
  const auto policy = j.at("policy").get<std::string>() == "greedy" ? ReplacementPolicy::kGreedy
                                                                    : ReplacementPolicy::kNone;
  HistoryStackd stack(j.at("regressor_dim").get<int>(), j.at("target_dim").get<int>(),
                      j.at("capacity").get<int>(), j.at("rank_tol").get<double>(), policy);
  for (const auto& s : j.at("samples")) {
    stack.record(MemorySample<double>{from_array(s.at("h_bar")), from_array(s.at("y")), s.at("t").get<double>()});
  }
  return stack;
}

}  // namespace ftkoop

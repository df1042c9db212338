#pragma once

// Machine-readable equilibrium reports (JSON). Doubles are written in
// shortest round-trip form, so a report can be re-checked bit-exactly.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cme/bestresponse.hpp"
#include "cme/equilibrium.hpp"
#include "cme/errors.hpp"
#include "cme/market.hpp"

namespace cme::harness {

using json = nlohmann::json;

inline json to_json(const TopicPoint& p) {
  return p.dim == 1 ? json::array({p[0]}) : json::array({p[0], p[1]});
}

inline TopicPoint point_from_json(const json& j) {
  if (!j.is_array() || j.empty() || j.size() > 2) throw Error(ErrorKind::Parse, "topic point must be [x] or [x, y]");
  return j.size() == 1 ? TopicPoint(j[0].get<double>()) : TopicPoint(j[0].get<double>(), j[1].get<double>());
}

inline json to_json(const MarketConfig& cfg) {
  json pts = json::array();
  for (const auto& p : cfg.interests) pts.push_back(to_json(p));
  return {{"dim", cfg.dim},         {"M", cfg.M},         {"M_infl", cfg.M_infl},
          {"r_p", cfg.r_p},         {"r_0", cfg.r_0},     {"B_0", cfg.B_0},
          {"a_f", cfg.kernel.a_f},  {"a_g", cfg.kernel.a_g}, {"beta", cfg.delay.beta},
          {"seed", cfg.seed},       {"interests", pts}};
}

inline MarketConfig config_from_json(const json& j) {
  MarketConfig cfg;
  cfg.dim = j.at("dim").get<int>();
  cfg.M = j.at("M").get<double>();
  cfg.M_infl = j.at("M_infl").get<double>();
  cfg.r_p = j.at("r_p").get<double>();
  cfg.r_0 = j.at("r_0").get<double>();
  cfg.B_0 = j.at("B_0").get<double>();
  cfg.kernel.a_f = j.at("a_f").get<double>();
  cfg.kernel.a_g = j.at("a_g").get<double>();
  cfg.delay.beta = j.at("beta").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& p : j.at("interests")) cfg.interests.push_back(point_from_json(p));
  return cfg;
}

inline json to_json(const MarketAllocation& omega) {
  json consumers = json::array();
  for (const auto& c : omega.consumers) {
    consumers.push_back({{"outside", c.outside}, {"influencer", c.influencer}, {"direct", c.direct}});
  }
  json content = json::array();
  for (const auto& x : omega.content.x) content.push_back(to_json(x));
  return {{"influencer", omega.infl.mu}, {"consumers", consumers}, {"content", content}};
}

inline MarketAllocation allocation_from_json(const json& j) {
  MarketAllocation omega;
  omega.infl.mu = j.at("influencer").get<std::vector<double>>();
  for (const auto& c : j.at("consumers")) {
    ConsumerAllocation ca;
    ca.outside = c.at("outside").get<double>();
    ca.influencer = c.at("influencer").get<double>();
    ca.direct = c.at("direct").get<std::vector<double>>();
    omega.consumers.push_back(std::move(ca));
  }
  for (const auto& x : j.at("content")) omega.content.x.push_back(point_from_json(x));
  return omega;
}

inline json to_json(const NashCertificate& cert) {
  json res = json::array();
  for (const auto& r : cert.residuals) {
    res.push_back({{"id", r.id},
                   {"residual", r.residual},
                   {"tolerance", r.tolerance},
                   {"holds", r.holds()},
                   {"witness", r.witness}});
  }
  return {{"mode", to_string(cert.mode)},
          {"holds", cert.holds},
          {"max_residual", cert.max_residual},
          {"conditions", res}};
}

struct ResultFile {
  std::string scenario;
  GameMode mode = GameMode::Perfect;
  double tol = 1e-6;
  MarketConfig config;
  TopicSearchParams search;
  EquilibriumResult result;
};

inline json to_json(const ResultFile& r) {
  const auto& e = r.result;
  return {{"scenario", r.scenario},
          {"mode", to_string(r.mode)},
          {"tol", r.tol},
          {"config", to_json(r.config)},
          {"search", {{"grid", r.search.grid_resolution}, {"refine_iters", r.search.refine_iters}}},
          {"omega", to_json(e.omega)},
          {"welfare", e.welfare},
          {"potential_trace", e.potential_trace},
          {"rounds_used", e.rounds_used},
          {"converged", e.converged},
          {"step_residual", e.step_residual},
          {"degenerate_producers", e.degenerate_producers},
          {"restart", e.restart},
          {"certificate", to_json(e.certificate)}};
}

/// Parses the fields needed to re-check a report: config, mode, search, omega.
inline ResultFile result_from_json(const json& j) {
  try {
    ResultFile r;
    r.scenario = j.value("scenario", std::string());
    r.mode = parse_game_mode(j.at("mode").get<std::string>());
    r.tol = j.value("tol", 1e-6);
    r.config = config_from_json(j.at("config"));
    const auto& s = j.at("search");
    r.search.grid_resolution = s.at("grid").get<int>();
    r.search.refine_iters = s.at("refine_iters").get<int>();
    r.result.mode = r.mode;
    r.result.omega = allocation_from_json(j.at("omega"));
    r.result.welfare = j.value("welfare", 0.0);
    r.result.converged = j.value("converged", false);
    return r;
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::Parse, std::string("malformed result file: ") + ex.what());
  }
}

inline void save_result(const ResultFile& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write '" + path + "'");
  out << to_json(r).dump(2) << '\n';
}

inline ResultFile load_result(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open result file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::Parse, path + ": " + ex.what());
  }
  return result_from_json(j);
}

}  // namespace cme::harness

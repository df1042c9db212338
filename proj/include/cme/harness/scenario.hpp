#pragma once

// Scenario (.scn) and sweep (.swp) files: UTF-8 `key = value` lines grouped
// under `[section]` headers, `#` starts a comment.
//
//   [scenario]  name, modes, tol
//   [market]    dim, M, M_infl, r_p, r_0, B_0, a_f, a_g, beta, seed
//   [interests] distribution (explicit|uniform|two_cluster), points, count,
//               centers, spread
//   [dynamics]  max_rounds, eps_alloc, eps_potential, restarts, schedule
//   [search]    grid, refine_iters
//   [sweep]     n_values, m_infl_rule (fixed|proportional), k_infl, replicates
//
// Point lists separate points with ';' and coordinates with whitespace.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cme/bestresponse.hpp"
#include "cme/equilibrium.hpp"
#include "cme/errors.hpp"
#include "cme/market.hpp"

namespace cme::harness {

enum class InterestDistribution { Explicit, Uniform, TwoCluster };

inline const char* to_string(InterestDistribution d) {
  switch (d) {
    case InterestDistribution::Explicit: return "explicit";
    case InterestDistribution::Uniform: return "uniform";
    case InterestDistribution::TwoCluster: return "two_cluster";
  }
  return "unknown";
}

struct InterestSpec {
  InterestDistribution distribution = InterestDistribution::Explicit;
  std::vector<TopicPoint> points;   // explicit
  std::size_t count = 0;            // sampled
  std::vector<TopicPoint> centers;  // two_cluster
  double spread = 0.05;             // two_cluster standard deviation
};

enum class MInflRule { Fixed, Proportional };

struct SweepSpec {
  std::vector<std::size_t> n_values;
  MInflRule m_infl_rule = MInflRule::Proportional;
  double k_infl = 1.0;
  int replicates = 1;
};

struct Scenario {
  std::string name;
  MarketConfig market;  // interests filled in by resolve()
  InterestSpec interests;
  DynamicsParams dynamics;
  TopicSearchParams search;
  std::vector<GameMode> modes{GameMode::Perfect};
  double tol = 1e-6;
  std::optional<SweepSpec> sweep;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Field {
  std::string value;
  int line = 0;
};

class FieldReader {
 public:
  FieldReader(std::map<std::string, std::map<std::string, Field>> sections, std::string source)
      : sections_(std::move(sections)), source_(std::move(source)) {}

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }
  bool has(const std::string& s, const std::string& k) const {
    auto it = sections_.find(s);
    return it != sections_.end() && it->second.count(k) > 0;
  }

  std::optional<Field> get(const std::string& s, const std::string& k) {
    auto it = sections_.find(s);
    if (it == sections_.end()) return std::nullopt;
    auto f = it->second.find(k);
    if (f == it->second.end()) return std::nullopt;
    used_.insert(s + "." + k);
    return f->second;
  }

  [[noreturn]] void fail(const Field& f, const std::string& key, const std::string& what) const {
    throw Error(ErrorKind::Parse, source_ + ":" + std::to_string(f.line) + ": field '" + key + "' " + what);
  }

  double number(const std::string& s, const std::string& k, double fallback) {
    auto f = get(s, k);
    if (!f) return fallback;
    return parse_number(*f, k);
  }

  double parse_number(const Field& f, const std::string& key) const {
    double v = 0.0;
    const char* b = f.value.data();
    const char* e = b + f.value.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || f.value.empty() || !std::isfinite(v)) {
      fail(f, key, "expects a number, got '" + f.value + "'");
    }
    return v;
  }

  long long integer(const std::string& s, const std::string& k, long long fallback) {
    auto f = get(s, k);
    if (!f) return fallback;
    return parse_integer(*f, k);
  }

  long long parse_integer(const Field& f, const std::string& key) const {
    long long v = 0;
    const char* b = f.value.data();
    const char* e = b + f.value.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || f.value.empty()) fail(f, key, "expects an integer, got '" + f.value + "'");
    return v;
  }

  std::vector<TopicPoint> points(const Field& f, const std::string& key, int dim) const {
    std::vector<TopicPoint> out;
    for (const auto& item : split(f.value, ';')) {
      if (item.empty()) continue;
      std::istringstream is(item);
      std::vector<double> coords;
      std::string tok;
      while (is >> tok) coords.push_back(parse_number(Field{tok, f.line}, key));
      if (static_cast<int>(coords.size()) != dim) {
        fail(f, key, "point '" + item + "' must have " + std::to_string(dim) + " coordinate(s)");
      }
      out.push_back(dim == 1 ? TopicPoint(coords[0]) : TopicPoint(coords[0], coords[1]));
      if (!is_valid(out.back())) fail(f, key, "point '" + item + "' lies outside [0,1]^dim");
    }
    return out;
  }

  void check_all_used() const {
    for (const auto& [s, keys] : sections_) {
      for (const auto& [k, f] : keys) {
        if (!used_.count(s + "." + k)) {
          throw Error(ErrorKind::Parse,
                      source_ + ":" + std::to_string(f.line) + ": unknown field '" + k + "' in [" + s + "]");
        }
      }
    }
  }

 private:
  std::map<std::string, std::map<std::string, Field>> sections_;
  std::string source_;
  std::set<std::string> used_;
};

inline FieldReader tokenize(std::istream& in, const std::string& source) {
  static const std::set<std::string> known{"scenario", "market", "interests", "dynamics", "search", "sweep"};
  std::map<std::string, std::map<std::string, Field>> sections;
  std::string current;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    auto where = [&] { return source + ":" + std::to_string(line) + ": "; };
    if (text.front() == '[') {
      if (text.back() != ']') throw Error(ErrorKind::Parse, where() + "unterminated section header");
      current = trim(std::string_view(text).substr(1, text.size() - 2));
      if (!known.count(current)) throw Error(ErrorKind::Parse, where() + "unknown section [" + current + "]");
      sections[current];
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Parse, where() + "expected 'key = value'");
    if (current.empty()) throw Error(ErrorKind::Parse, where() + "field outside of any [section]");
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::Parse, where() + "empty key");
    if (sections[current].count(key)) {
      throw Error(ErrorKind::Parse, where() + "duplicate field '" + key + "' in [" + current + "]");
    }
    sections[current][key] = Field{value, line};
  }
  return FieldReader(std::move(sections), source);
}

// Standard normal from two portable uniforms (Box-Muller).
inline double normal_draw(std::mt19937_64& rng) {
  const double u1 = 1.0 - cme::detail::unit_draw(rng);
  const double u2 = cme::detail::unit_draw(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace detail

inline Scenario parse_scenario(std::istream& in, const std::string& source = "<scenario>") {
  auto r = detail::tokenize(in, source);
  Scenario sc;

  // [scenario]
  if (auto f = r.get("scenario", "name")) sc.name = f->value;
  if (sc.name.empty()) throw Error(ErrorKind::Parse, source + ": missing field 'name' in [scenario]");
  if (auto f = r.get("scenario", "modes")) {
    sc.modes.clear();
    for (const auto& m : detail::split(f->value, ',')) {
      try {
        sc.modes.push_back(parse_game_mode(m));
      } catch (const Error&) {
        r.fail(*f, "modes", "has unknown game mode '" + m + "'");
      }
    }
  }
  sc.tol = r.number("scenario", "tol", sc.tol);

  // [market]
  auto& m = sc.market;
  m.dim = static_cast<int>(r.integer("market", "dim", m.dim));
  m.M = r.number("market", "M", m.M);
  m.M_infl = r.number("market", "M_infl", m.M_infl);
  m.r_p = r.number("market", "r_p", m.r_p);
  m.r_0 = r.number("market", "r_0", m.r_0);
  m.B_0 = r.number("market", "B_0", m.B_0);
  m.kernel.a_f = r.number("market", "a_f", m.kernel.a_f);
  m.kernel.a_g = r.number("market", "a_g", m.kernel.a_g);
  m.delay.beta = r.number("market", "beta", m.delay.beta);
  if (auto f = r.get("market", "seed")) {
    const auto v = r.parse_integer(*f, "seed");
    if (v < 0) r.fail(*f, "seed", "must be nonnegative");
    m.seed = static_cast<std::uint64_t>(v);
  }
  if (m.dim != 1 && m.dim != 2) throw Error(ErrorKind::InvalidInput, source + ": field 'dim' must be 1 or 2");

  // [interests]
  auto& is = sc.interests;
  if (auto f = r.get("interests", "distribution")) {
    if (f->value == "explicit") {
      is.distribution = InterestDistribution::Explicit;
    } else if (f->value == "uniform") {
      is.distribution = InterestDistribution::Uniform;
    } else if (f->value == "two_cluster") {
      is.distribution = InterestDistribution::TwoCluster;
    } else {
      r.fail(*f, "distribution", "must be explicit, uniform or two_cluster");
    }
  }
  if (auto f = r.get("interests", "points")) is.points = r.points(*f, "points", m.dim);
  if (auto f = r.get("interests", "count")) {
    const auto v = r.parse_integer(*f, "count");
    if (v < 2) r.fail(*f, "count", "must be at least 2");
    is.count = static_cast<std::size_t>(v);
  }
  if (auto f = r.get("interests", "centers")) is.centers = r.points(*f, "centers", m.dim);
  is.spread = r.number("interests", "spread", is.spread);
  if (is.distribution == InterestDistribution::Explicit && is.points.empty()) {
    throw Error(ErrorKind::Parse, source + ": explicit interests need field 'points' in [interests]");
  }
  if (is.distribution == InterestDistribution::TwoCluster) {
    if (is.centers.empty()) {
      is.centers = m.dim == 1 ? std::vector<TopicPoint>{TopicPoint(0.25), TopicPoint(0.75)}
                              : std::vector<TopicPoint>{TopicPoint(0.25, 0.25), TopicPoint(0.75, 0.75)};
    }
    if (!(is.spread >= 0.0)) throw Error(ErrorKind::InvalidInput, source + ": field 'spread' must be nonnegative");
  }

  // [dynamics]
  auto& d = sc.dynamics;
  d.max_rounds = static_cast<int>(r.integer("dynamics", "max_rounds", d.max_rounds));
  d.eps_alloc = r.number("dynamics", "eps_alloc", 1e-8 * m.M);
  d.eps_potential = r.number("dynamics", "eps_potential", d.eps_potential);
  d.restarts = static_cast<int>(r.integer("dynamics", "restarts", d.restarts));
  if (auto f = r.get("dynamics", "schedule")) {
    if (f->value == "round_robin") {
      d.schedule = Schedule::RoundRobin;
    } else if (f->value == "jacobi") {
      d.schedule = Schedule::Jacobi;
    } else {
      r.fail(*f, "schedule", "must be round_robin or jacobi");
    }
  }

  // [search]
  sc.search.grid_resolution = static_cast<int>(r.integer("search", "grid", sc.search.grid_resolution));
  sc.search.refine_iters = static_cast<int>(r.integer("search", "refine_iters", sc.search.refine_iters));

  // [sweep]
  if (r.has_section("sweep")) {
    SweepSpec sw;
    if (auto f = r.get("sweep", "n_values")) {
      for (const auto& tok : detail::split(f->value, ',')) {
        const auto v = r.parse_integer(detail::Field{tok, f->line}, "n_values");
        if (v < 2) r.fail(*f, "n_values", "entries must be at least 2");
        if (!sw.n_values.empty() && static_cast<std::size_t>(v) <= sw.n_values.back()) {
          r.fail(*f, "n_values", "must be strictly increasing");
        }
        sw.n_values.push_back(static_cast<std::size_t>(v));
      }
    }
    if (sw.n_values.empty()) throw Error(ErrorKind::Parse, source + ": [sweep] needs field 'n_values'");
    if (auto f = r.get("sweep", "m_infl_rule")) {
      if (f->value == "fixed") {
        sw.m_infl_rule = MInflRule::Fixed;
      } else if (f->value == "proportional") {
        sw.m_infl_rule = MInflRule::Proportional;
      } else {
        r.fail(*f, "m_infl_rule", "must be fixed or proportional");
      }
    }
    sw.k_infl = r.number("sweep", "k_infl", sw.k_infl);
    if (auto f = r.get("sweep", "replicates")) {
      const auto v = r.parse_integer(*f, "replicates");
      if (v < 1) r.fail(*f, "replicates", "must be at least 1");
      sw.replicates = static_cast<int>(v);
    }
    if (!(sw.k_infl > 0.0)) throw Error(ErrorKind::InvalidInput, source + ": field 'k_infl' must be positive");
    sc.sweep = sw;
  }

  r.check_all_used();
  validate(sc.dynamics);
  validate(sc.search);
  if (!(sc.tol >= 0.0)) throw Error(ErrorKind::InvalidInput, source + ": field 'tol' must be nonnegative");
  return sc;
}

inline Scenario parse_scenario_text(const std::string& text, const std::string& source = "<scenario>") {
  std::istringstream in(text);
  return parse_scenario(in, source);
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open scenario file '" + path + "'");
  return parse_scenario(in, path);
}

/// Interests drawn deterministically from `seed`.
inline std::vector<TopicPoint> sample_interests(const InterestSpec& spec, int dim, std::size_t count,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TopicPoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    TopicPoint p = dim == 1 ? TopicPoint(0.0) : TopicPoint(0.0, 0.0);
    if (spec.distribution == InterestDistribution::TwoCluster) {
      const auto& c = spec.centers[i % spec.centers.size()];
      for (int k = 0; k < dim; ++k) p[k] = std::clamp(c[k] + spec.spread * detail::normal_draw(rng), 0.0, 1.0);
    } else {
      for (int k = 0; k < dim; ++k) p[k] = cme::detail::unit_draw(rng);
    }
    out.push_back(p);
  }
  return out;
}

/// Concrete market for the scenario; `count` overrides the sampled size.
inline MarketConfig resolve(const Scenario& sc, std::optional<std::size_t> count = std::nullopt) {
  MarketConfig cfg = sc.market;
  if (sc.interests.distribution == InterestDistribution::Explicit) {
    cfg.interests = sc.interests.points;
  } else {
    const std::size_t n = count.value_or(sc.interests.count);
    if (n < 2) throw Error(ErrorKind::InvalidInput, "sampled interests need count >= 2");
    cfg.interests = sample_interests(sc.interests, cfg.dim, n, cfg.seed);
  }
  validate(cfg);
  return cfg;
}

namespace detail {

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string fmt_points(const std::vector<TopicPoint>& pts) {
  std::string s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += "; ";
    s += fmt_double(pts[i][0]);
    if (pts[i].dim == 2) s += " " + fmt_double(pts[i][1]);
  }
  return s;
}

}  // namespace detail

/// Scenario file text for a concrete market (interests written explicitly).
inline std::string write_scenario(const std::string& name, const MarketConfig& cfg, const DynamicsParams& dyn = {},
                                  const TopicSearchParams& search = {}, const std::vector<GameMode>& modes = {GameMode::Perfect},
                                  double tol = 1e-6) {
  using detail::fmt_double;
  std::ostringstream os;
  os << "[scenario]\nname = " << name << "\nmodes = ";
  for (std::size_t i = 0; i < modes.size(); ++i) os << (i ? ", " : "") << to_string(modes[i]);
  os << "\ntol = " << fmt_double(tol) << "\n\n[market]\n";
  os << "dim = " << cfg.dim << "\nM = " << fmt_double(cfg.M) << "\nM_infl = " << fmt_double(cfg.M_infl)
     << "\nr_p = " << fmt_double(cfg.r_p) << "\nr_0 = " << fmt_double(cfg.r_0) << "\nB_0 = " << fmt_double(cfg.B_0)
     << "\na_f = " << fmt_double(cfg.kernel.a_f) << "\na_g = " << fmt_double(cfg.kernel.a_g)
     << "\nbeta = " << fmt_double(cfg.delay.beta) << "\nseed = " << cfg.seed << "\n\n";
  os << "[interests]\ndistribution = explicit\npoints = " << detail::fmt_points(cfg.interests) << "\n\n";
  os << "[dynamics]\nmax_rounds = " << dyn.max_rounds << "\neps_alloc = " << fmt_double(dyn.eps_alloc)
     << "\neps_potential = " << fmt_double(dyn.eps_potential) << "\nrestarts = " << dyn.restarts
     << "\nschedule = " << to_string(dyn.schedule) << "\n\n";
  os << "[search]\ngrid = " << search.grid_resolution << "\nrefine_iters = " << search.refine_iters << "\n";
  return os.str();
}

}  // namespace cme::harness

#pragma once

// Price-of-influence sweep over community sizes. Rows run on a worker pool
// and are reported in (N, replicate) order whatever the completion order.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <iomanip>
#include <locale>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cme/equilibrium.hpp"
#include "cme/harness/result.hpp"
#include "cme/harness/scenario.hpp"

namespace cme::harness {

struct SweepRow {
  std::size_t n = 0;
  double m_infl = 0.0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double phi_perfect = 0.0;
  double phi_imperfect = 0.0;
  double poi = 0.0;
  double relative_poi = 0.0;
  bool converged_perfect = false;
  bool certified_perfect = false;
  bool converged_imperfect = false;
  bool certified_imperfect = false;
  std::string error;  // nonempty when the row failed

  // Kept for re-validation of the reported welfare values.
  std::optional<MarketConfig> config;
  std::optional<MarketAllocation> perfect;
  std::optional<MarketAllocation> imperfect;

  bool ok() const { return error.empty(); }
  // The price of influence compares certified equilibria; other rows are
  // reported but carry no poi in the medians.
  bool certified() const { return ok() && certified_perfect && certified_imperfect; }
  // perfect converged, perfect certified, imperfect converged, imperfect certified
  std::string converged_flags() const {
    std::string s;
    for (bool b : {converged_perfect, certified_perfect, converged_imperfect, certified_imperfect}) s += b ? '1' : '0';
    return s;
  }
};

inline std::uint64_t row_seed(std::uint64_t base, std::size_t n, int replicate) {
  // splitmix64 finalizer over the three inputs
  std::uint64_t x = base ^ (static_cast<std::uint64_t>(n) * 0x9E3779B97F4A7C15ull) ^
                    (static_cast<std::uint64_t>(replicate) * 0xC2B2AE3D27D4EB4Full);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

inline unsigned worker_count() {
  if (const char* env = std::getenv("CME_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `task(i)` for i in [0, count) on `threads` workers.
template <class Task>
void parallel_for(std::size_t count, unsigned threads, Task&& task) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& th : pool) th.join();
}

/// Market for one sweep row.
inline MarketConfig sweep_config(const Scenario& sc, std::size_t n, int replicate) {
  const auto& sw = *sc.sweep;
  Scenario row = sc;
  row.market.seed = row_seed(sc.market.seed, n, replicate);
  if (sw.m_infl_rule == MInflRule::Proportional) row.market.M_infl = sw.k_infl * static_cast<double>(n);
  if (row.interests.distribution == InterestDistribution::Explicit) {
    throw Error(ErrorKind::InvalidInput, "sweeps need sampled interests (uniform or two_cluster)");
  }
  return resolve(row, n);
}

inline SweepRow run_sweep_row(const Scenario& sc, std::size_t n, int replicate) {
  SweepRow row;
  row.n = n;
  row.replicate = replicate;
  try {
    const auto cfg = sweep_config(sc, n, replicate);
    row.m_infl = cfg.M_infl;
    row.seed = cfg.seed;
    const auto p = price_of_influence(cfg, sc.dynamics, sc.search, tolerances_from(sc.tol));
    row.phi_perfect = p.phi_perfect;
    row.phi_imperfect = p.phi_imperfect;
    row.poi = p.poi;
    row.relative_poi = p.relative_poi;
    row.converged_perfect = p.converged_perfect;
    row.certified_perfect = p.certified_perfect;
    row.converged_imperfect = p.converged_imperfect;
    row.certified_imperfect = p.certified_imperfect;
    row.config = cfg;
    row.perfect = p.perfect.omega;
    row.imperfect = p.imperfect.omega;
  } catch (const std::exception& ex) {
    row.error = ex.what();
  }
  return row;
}

inline std::vector<SweepRow> run_sweep(const Scenario& sc, unsigned threads = worker_count()) {
  if (!sc.sweep) throw Error(ErrorKind::InvalidInput, "scenario '" + sc.name + "' has no [sweep] section");
  const auto& sw = *sc.sweep;
  std::vector<SweepRow> rows(sw.n_values.size() * static_cast<std::size_t>(sw.replicates));
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    const auto n = sw.n_values[i / static_cast<std::size_t>(sw.replicates)];
    const int rep = static_cast<int>(i % static_cast<std::size_t>(sw.replicates));
    rows[i] = run_sweep_row(sc, n, rep);
  });
  return rows;
}

namespace detail {

inline std::ostringstream classic_stream() {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17);
  return os;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  auto os = detail::classic_stream();
  os << "N,M_infl,replicate,phi_perfect,phi_imperfect,poi,relative_poi,converged_flags,error\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.m_infl << ',' << r.replicate << ',';
    if (r.ok()) {
      os << r.phi_perfect << ',' << r.phi_imperfect << ',' << r.poi << ',' << r.relative_poi << ','
         << r.converged_flags() << ',';
    } else {
      os << ",,,," << r.converged_flags() << ',' << detail::csv_escape(r.error);
    }
    os << '\n';
  }
  return os.str();
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct MedianPoint {
  std::size_t n = 0;
  double median_relative_poi = 0.0;
  std::size_t rows = 0;  // certified rows behind the median
};

inline std::vector<MedianPoint> median_by_n(const std::vector<SweepRow>& rows) {
  std::vector<MedianPoint> out;
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    std::vector<double> vals;
    while (j < rows.size() && rows[j].n == rows[i].n) {
      if (rows[j].certified()) vals.push_back(rows[j].relative_poi);
      ++j;
    }
    out.push_back({rows[i].n, median(vals), vals.size()});
    i = j;
  }
  return out;
}

/// gnuplot data: `N median_relative_poi certified_rows`.
inline std::string sweep_dat(const std::vector<SweepRow>& rows) {
  auto os = detail::classic_stream();
  os << "# N median_relative_poi certified_rows\n";
  for (const auto& p : median_by_n(rows)) os << p.n << ' ' << p.median_relative_poi << ' ' << p.rows << '\n';
  return os.str();
}

/// Stored allocations of every successful row, for re-validation.
inline json sweep_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json j = {{"N", r.n}, {"M_infl", r.m_infl}, {"replicate", r.replicate}, {"seed", r.seed}, {"error", r.error}};
    if (r.ok()) {
      j["phi_perfect"] = r.phi_perfect;
      j["phi_imperfect"] = r.phi_imperfect;
      j["config"] = to_json(*r.config);
      j["perfect"] = to_json(*r.perfect);
      j["imperfect"] = to_json(*r.imperfect);
    }
    out.push_back(std::move(j));
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write '" + path + "'");
  out << text;
}

}  // namespace cme::harness

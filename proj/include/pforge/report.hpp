#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pforge/rng.hpp"
#include "pforge/symexpr.hpp"

namespace pforge {

inline constexpr const char* kToolkitVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

enum class Status { Pass, Fail, Proven, UnknownEscalated };
const char* to_string(Status s);
Status status_from_string(const std::string& s);

struct Witness {
  std::int64_t sample = -1;
  double residual = 0.0;
  std::vector<std::pair<std::string, cplx>> point;
  std::string note;
};

struct CheckRecord {
  std::string name;
  Status status = Status::Pass;
  double max_residual = 0.0;
  double tol = 0.0;
  std::int64_t samples_used = 0;
  std::vector<Witness> witnesses;  // at most 3
  std::string notes;

  bool ok() const { return status == Status::Pass || status == Status::Proven; }
};

struct Report {
  std::string campaign_id;
  std::string target;
  std::vector<CheckRecord> checks;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
  std::string toolkit_version = kToolkitVersion;
  std::map<std::string, std::string> metadata;

  bool ok() const;
  void add(CheckRecord r) { checks.push_back(std::move(r)); }
  // Appends the checks of `other`, prefixing their names.
  void absorb(const Report& other, const std::string& prefix);
  const CheckRecord* find(const std::string& name) const;
};

std::string report_to_json(const Report& r, bool pretty = true);
Report report_from_json(const std::string& text);
// Writes to a temporary sibling and renames it into place.
void write_report_atomic(const Report& r, const std::string& path);

// Record for a symbolic zero test that escalates to sampling on `unknown`.
CheckRecord symbolic_record(const std::string& name, const Expr& e, double tol);

// ---- sampling campaigns ----

struct SampleResult {
  double residual = 0.0;
  bool ok = true;  // false: the sample itself could not be produced
  Point point;
  std::string note;
};

void set_default_threads(int n);
int default_threads();

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn, int threads = 0);

// Runs `samples` independent evaluations. Sample k draws from
// CounterRng(seed ^ fnv1a(name), k), so results do not depend on threading.
CheckRecord run_samples(const std::string& name, std::int64_t samples, double tol, std::uint64_t seed,
                        const std::vector<std::string>& coord_names,
                        const std::function<SampleResult(std::int64_t, CounterRng&)>& fn);

std::uint64_t fnv1a(const std::string& s);

}  // namespace pforge

#include "pforge/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace pforge {

using nlohmann::json;

const char* to_string(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Proven: return "PROVEN";
    case Status::UnknownEscalated: return "UNKNOWN-ESCALATED";
  }
  return "FAIL";
}

Status status_from_string(const std::string& s) {
  if (s == "PASS") return Status::Pass;
  if (s == "FAIL") return Status::Fail;
  if (s == "PROVEN") return Status::Proven;
  if (s == "UNKNOWN-ESCALATED") return Status::UnknownEscalated;
  throw std::invalid_argument("unknown status '" + s + "'");
}

bool Report::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckRecord& c) { return c.ok(); });
}

void Report::absorb(const Report& other, const std::string& prefix) {
  for (auto c : other.checks) {
    c.name = prefix + c.name;
    checks.push_back(std::move(c));
  }
  for (const auto& [k, v] : other.metadata) metadata[prefix + k] = v;
}

const CheckRecord* Report::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

json number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

double read_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  std::string s = j.get<std::string>();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return NAN;
}

json value_json(cplx v) {
  if (v.imag() == 0.0) return number(v.real());
  return json::array({number(v.real()), number(v.imag())});
}

cplx value_from_json(const json& j) {
  if (j.is_array()) return {read_number(j.at(0)), read_number(j.at(1))};
  return {read_number(j), 0.0};
}

}  // namespace

std::string report_to_json(const Report& r, bool pretty) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["campaign_id"] = r.campaign_id;
  j["target"] = r.target;
  j["seed"] = std::to_string(r.seed);
  j["wall_time_s"] = r.wall_time_s;
  j["toolkit_version"] = r.toolkit_version;
  j["status"] = r.ok() ? "PASS" : "FAIL";
  j["metadata"] = json::object();
  for (const auto& [k, v] : r.metadata) j["metadata"][k] = v;
  j["checks"] = json::array();
  for (const auto& c : r.checks) {
    json cj;
    cj["name"] = c.name;
    cj["status"] = to_string(c.status);
    cj["max_residual"] = number(c.max_residual);
    cj["tol"] = number(c.tol);
    cj["samples_used"] = c.samples_used;
    cj["notes"] = c.notes;
    cj["witnesses"] = json::array();
    for (const auto& w : c.witnesses) {
      json wj;
      wj["sample"] = w.sample;
      wj["residual"] = number(w.residual);
      wj["note"] = w.note;
      wj["point"] = json::object();
      for (const auto& [name, v] : w.point) wj["point"][name] = value_json(v);
      cj["witnesses"].push_back(wj);
    }
    j["checks"].push_back(cj);
  }
  return j.dump(pretty ? 2 : -1) + (pretty ? "\n" : "");
}

Report report_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.at("schema_version").get<int>() != kReportSchemaVersion)
    throw std::runtime_error("unsupported report schema version");
  Report r;
  r.campaign_id = j.at("campaign_id").get<std::string>();
  r.target = j.at("target").get<std::string>();
  r.seed = std::stoull(j.at("seed").get<std::string>());
  r.wall_time_s = j.at("wall_time_s").get<double>();
  r.toolkit_version = j.at("toolkit_version").get<std::string>();
  for (const auto& [k, v] : j.at("metadata").items()) r.metadata[k] = v.get<std::string>();
  for (const auto& cj : j.at("checks")) {
    CheckRecord c;
    c.name = cj.at("name").get<std::string>();
    c.status = status_from_string(cj.at("status").get<std::string>());
    c.max_residual = read_number(cj.at("max_residual"));
    c.tol = read_number(cj.at("tol"));
    c.samples_used = cj.at("samples_used").get<std::int64_t>();
    c.notes = cj.at("notes").get<std::string>();
    for (const auto& wj : cj.at("witnesses")) {
      Witness w;
      w.sample = wj.at("sample").get<std::int64_t>();
      w.residual = read_number(wj.at("residual"));
      w.note = wj.at("note").get<std::string>();
      for (const auto& [name, v] : wj.at("point").items()) w.point.emplace_back(name, value_from_json(v));
      c.witnesses.push_back(std::move(w));
    }
    r.checks.push_back(std::move(c));
  }
  return r;
}

void write_report_atomic(const Report& r, const std::string& path) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << report_to_json(r);
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

CheckRecord symbolic_record(const std::string& name, const Expr& e, double tol) {
  CheckRecord c;
  c.name = name;
  c.tol = tol;
  ZeroResult z = is_zero(e);
  c.samples_used = 0;
  switch (z.status) {
    case ZeroStatus::ProvenZero:
      c.status = Status::Proven;
      c.notes = "normal form is literally zero";
      break;
    case ZeroStatus::ProvenNonzero: {
      c.status = Status::Fail;
      c.max_residual = z.witness_abs;
      Witness w;
      w.residual = z.witness_abs;
      w.point = z.witness;
      w.note = z.note.empty() ? "sampled witness" : z.note;
      c.witnesses.push_back(w);
      c.notes = "nonzero";
      break;
    }
    case ZeroStatus::Unknown:
      // Escalated to sampling: the 24 sampled values all stayed below 1e-8.
      c.status = Status::Pass;
      c.samples_used = 24;
      c.max_residual = z.witness_abs;
      c.notes = "sampled, not proven (" + z.note + ")";
      break;
  }
  return c;
}

// ---------------------------------------------------------------- threads

namespace {
std::atomic<int> g_threads{0};
}

void set_default_threads(int n) { g_threads = n; }

int default_threads() {
  int n = g_threads.load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn, int threads) {
  if (threads <= 0) threads = default_threads();
  if (threads == 1 || n < 2) {
    for (std::int64_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      std::int64_t k = next.fetch_add(1);
      if (k >= n) return;
      try {
        fn(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  int t = static_cast<int>(std::min<std::int64_t>(threads, n));
  for (int k = 0; k < t; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

CheckRecord run_samples(const std::string& name, std::int64_t samples, double tol, std::uint64_t seed,
                        const std::vector<std::string>& coord_names,
                        const std::function<SampleResult(std::int64_t, CounterRng&)>& fn) {
  std::vector<SampleResult> results(static_cast<std::size_t>(samples));
  std::uint64_t stream = seed ^ fnv1a(name);
  parallel_for(samples, [&](std::int64_t k) {
    CounterRng rng(stream, static_cast<std::uint64_t>(k));
    try {
      results[static_cast<std::size_t>(k)] = fn(k, rng);
    } catch (const std::exception& e) {
      SampleResult r;
      r.ok = false;
      r.residual = NAN;
      r.note = e.what();
      results[static_cast<std::size_t>(k)] = r;
    }
  });
  CheckRecord c;
  c.name = name;
  c.tol = tol;
  c.samples_used = samples;
  std::int64_t failed_sampling = 0;
  for (std::int64_t k = 0; k < samples; ++k) {
    const auto& r = results[static_cast<std::size_t>(k)];
    bool bad = !r.ok || !std::isfinite(r.residual) || r.residual > tol;
    if (!r.ok) ++failed_sampling;
    if (r.ok && std::isfinite(r.residual)) c.max_residual = std::max(c.max_residual, r.residual);
    if (!r.ok || !std::isfinite(r.residual)) c.max_residual = INFINITY;
    if (bad) {
      c.status = Status::Fail;
      if (c.witnesses.size() < 3) {
        Witness w;
        w.sample = k;
        w.residual = r.residual;
        w.note = r.ok ? r.note : "sampling failure: " + r.note;
        for (std::size_t q = 0; q < r.point.size(); ++q)
          w.point.emplace_back(q < coord_names.size() ? coord_names[q] : "c" + std::to_string(q), r.point[q]);
        c.witnesses.push_back(std::move(w));
      }
    }
  }
  if (failed_sampling > 0) c.notes = std::to_string(failed_sampling) + " samples could not be produced";
  return c;
}

}  // namespace pforge

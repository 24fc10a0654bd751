#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pforge/apath.hpp"
#include "pforge/groupoid.hpp"
#include "pforge/liealg.hpp"
#include "pforge/resolution.hpp"

using namespace pforge;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags as given on the command line; unset ones fall back to --config, then defaults.
struct Flags {
  std::optional<std::int64_t> samples;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out, config, checks;
  // family parameters
  std::optional<int> k, n, l, winding, count, steps;
  std::optional<std::string> levi, tau, file, mutate;
  std::optional<double> lo, hi, x, y, a, b, w_re, w_im;
};

struct CampaignConfig {
  std::int64_t samples = 200;
  double tol = 1e-8;
  std::uint64_t seed = 1;
  std::string out = ".";
  std::vector<std::string> checks;
  json file = json::object();
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, sep);)
    if (!p.empty()) parts.push_back(p);
  return parts;
}

template <class T>
T pick(const std::optional<T>& flag, const json& cfg, const char* key, T def) {
  if (flag) return *flag;
  if (cfg.contains(key)) return cfg.at(key).get<T>();
  if (cfg.contains("params") && cfg.at("params").contains(key)) return cfg.at("params").at(key).get<T>();
  return def;
}

CampaignConfig resolve(const Flags& f, double default_tol) {
  CampaignConfig c;
  if (f.config) {
    std::ifstream in(*f.config);
    if (!in) throw UsageError("cannot read config " + *f.config);
    try {
      c.file = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError("bad config " + *f.config + ": " + e.what());
    }
  }
  try {
    c.samples = pick<std::int64_t>(f.samples, c.file, "samples", 200);
    c.tol = pick<double>(f.tol, c.file, "tol", default_tol);
    c.seed = pick<std::uint64_t>(f.seed, c.file, "seed", 1);
    c.out = pick<std::string>(f.out, c.file, "out", ".");
    if (f.checks)
      c.checks = split(*f.checks, ',');
    else if (c.file.contains("checks"))
      c.checks = c.file.at("checks").get<std::vector<std::string>>();
    int threads = 0;
    if (f.threads)
      threads = *f.threads;
    else if (c.file.contains("threads"))
      threads = c.file.at("threads").get<int>();
    else if (const char* env = std::getenv("POISSON_FORGE_THREADS"))
      threads = std::atoi(env);
    set_default_threads(threads);
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  if (c.samples < 1) throw UsageError("--samples must be at least 1");
  if (!(c.tol > 0 && c.tol < 1)) throw UsageError("--tol must lie in (0, 1)");
  return c;
}

Rational parse_rational(const std::string& s) {
  auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rational(std::stoll(s));
    return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
  } catch (const std::exception&) {
    throw UsageError("bad rational '" + s + "'");
  }
}

std::vector<int> parse_levi(const std::string& s) {
  std::vector<int> r;
  for (const auto& p : split(s, ',')) {
    try {
      r.push_back(std::stoi(p));
    } catch (const std::exception&) {
      throw UsageError("bad --levi entry '" + p + "'");
    }
  }
  return r;
}

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void filter_checks(Report& rep, const std::vector<std::string>& wanted) {
  if (wanted.empty()) return;
  std::vector<CheckRecord> kept;
  for (auto& c : rep.checks)
    for (const auto& w : wanted)
      if (c.name.find(w) != std::string::npos) {
        kept.push_back(c);
        break;
      }
  if (kept.empty()) throw UsageError("--checks selects no record");
  rep.checks = std::move(kept);
}

void print_checks(const Report& rep, std::ostream& os) {
  for (const auto& c : rep.checks) {
    os << std::left << std::setw(18) << to_string(c.status) << " " << c.name << "  max_residual=" << c.max_residual
       << " samples=" << c.samples_used;
    if (!c.notes.empty()) os << "  (" << c.notes << ")";
    os << "\n";
  }
}

int finish(Report rep, const CampaignConfig& cfg, std::chrono::steady_clock::time_point t0) {
  filter_checks(rep, cfg.checks);
  rep.seed = cfg.seed;
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fs::path path = fs::path(cfg.out) / (rep.campaign_id + ".json");
  fs::create_directories(cfg.out);
  write_report_atomic(rep, path.string());
  print_checks(rep, std::cout);
  std::cout << (rep.ok() ? "PASS" : "FAIL") << " " << rep.campaign_id << "  report: " << path.string() << "\n";
  return rep.ok() ? 0 : 1;
}

ResolutionAtlas build_family(const std::string& family, const Flags& f, const CampaignConfig& cfg) {
  if (family == "r2") return build_r2(pick<int>(f.k, cfg.file, "k", 0));
  if (family == "springer") {
    return springer(pick<int>(f.n, cfg.file, "n", 2), parse_levi(pick<std::string>(f.levi, cfg.file, "levi", "")));
  }
  if (family == "grothendieck") return grothendieck_sl2(parse_rational(pick<std::string>(f.tau, cfg.file, "tau", "2")));
  if (family == "kleinian") return kleinian(pick<int>(f.l, cfg.file, "l", 2));
  throw UsageError("unknown family '" + family + "' (r2, springer, grothendieck, kleinian)");
}

std::string family_tag(const std::string& family, const ResolutionAtlas& at) {
  std::string tag = family;
  for (const auto& [k, v] : at.params) tag += "-" + k + v;
  for (auto& ch : tag)
    if (ch == '/' || ch == ',' || ch == ' ') ch = '_';
  return tag;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--samples", f.samples, "Samples per sampled check");
  sub->add_option("--tol", f.tol, "Residual tolerance, in (0, 1)");
  sub->add_option("--seed", f.seed, "64-bit campaign seed");
  sub->add_option("--threads", f.threads, "Worker threads (default: POISSON_FORGE_THREADS, then hardware count)");
  sub->add_option("--out", f.out, "Output directory for reports and CSV files");
  sub->add_option("--config", f.config, "JSON config file; flags given on the command line win");
  sub->add_option("--checks", f.checks, "Comma-separated record names (substring match) to keep");
}

void add_family(CLI::App* sub, Flags& f) {
  sub->add_option("--k", f.k, "r2: relation index, 0 or 1");
  sub->add_option("--n", f.n, "springer: rank n of sl_n, 2 or 3");
  sub->add_option("--levi", f.levi, "springer: comma-separated simple roots of the Levi factor");
  sub->add_option("--tau", f.tau, "grothendieck: nonzero rational tau");
  sub->add_option("--l", f.l, "kleinian: l in {2, 3}");
}

int run(int argc, char** argv) {
  CLI::App app{"pforge: verification campaigns for Poisson groupoids and resolutions", "pforge"};
  app.require_subcommand(1);
  Flags f;
  std::string key, family, report_file;

  auto* cat = app.add_subcommand("catalog", "Groupoid catalog");
  cat->require_subcommand(1);
  auto* cat_list = cat->add_subcommand("list", "List catalog keys");
  auto* cat_verify = cat->add_subcommand("verify", "Groupoid axioms, symplectic form and pushforward");
  cat_verify->add_option("key", key, "Catalog key")->required();
  add_common(cat_verify, f);
  cat_verify->add_option("--mutate", f.mutate)->group("");  // mutation testing only

  auto* res = app.add_subcommand("resolution", "Resolution families");
  res->require_subcommand(1);
  auto* res_build = res->add_subcommand("build", "Print the atlas manifest");
  res_build->add_option("family", family, "r2, springer, grothendieck or kleinian")->required();
  add_family(res_build, f);
  res_build->add_option("--config", f.config, "JSON config file; flags win");
  auto* res_verify = res->add_subcommand("verify", "Resolution checks and family invariants");
  res_verify->add_option("family", family, "r2, springer, grothendieck or kleinian")->required();
  add_family(res_verify, f);
  add_common(res_verify, f);

  auto* spr = app.add_subcommand("springer", "Richardson and pairing certificates plus the Springer atlas");
  spr->add_option("--n", f.n, "rank n of sl_n, 2 or 3");
  spr->add_option("--levi", f.levi, "comma-separated simple roots of the Levi factor");
  add_common(spr, f);

  auto* kle = app.add_subcommand("kleinian", "Kleinian A_{l-1} resolution invariants");
  kle->add_option("--l", f.l, "l in {2, 3}");
  add_common(kle, f);

  auto* ap = app.add_subcommand("apath", "Cotangent path lifts on the plane resolution");
  ap->add_option("--k", f.k, "relation index, 0 or 1");
  ap->add_option("--winding", f.winding, "winding number of the monodromy loop");
  ap->add_option("--file", f.file, "CSV trace of the monodromy lift");
  add_common(ap, f);

  auto* rep = app.add_subcommand("report", "Saved reports");
  rep->require_subcommand(1);
  auto* rep_show = rep->add_subcommand("show", "Summarize a JSON report");
  rep_show->add_option("file", report_file, "Report path")->required();

  auto* csv = app.add_subcommand("csv", "CSV data for the plane resolution");
  csv->require_subcommand(1);
  auto* csv_grid = csv->add_subcommand("phi-grid", "Image of an (a, b) grid under phi; columns a,b,x,y");
  csv_grid->add_option("--n", f.n, "grid points per axis (default 10)");
  csv_grid->add_option("--lo", f.lo, "lower bound (default -2)");
  csv_grid->add_option("--hi", f.hi, "upper bound (default 2)");
  auto* csv_fiber = csv->add_subcommand("fiber", "Enumerated preimages; columns index,a,b,residual");
  csv_fiber->add_option("--x", f.x, "target x (default 1)");
  csv_fiber->add_option("--y", f.y, "target y (default 0)");
  csv_fiber->add_option("--count", f.count, "number of preimages (default 5)");
  csv_fiber->add_option("--k", f.k, "relation index, 0 or 1");
  auto* csv_trace = csv->add_subcommand("path-trace", "Lift of a Dazord arrow path; columns u,a,b,drift");
  csv_trace->add_option("--a", f.a, "start a (default 0.3)");
  csv_trace->add_option("--b", f.b, "start b (default 1.1)");
  csv_trace->add_option("--w-re", f.w_re, "arrow W, real part (default 0: unit action)");
  csv_trace->add_option("--w-im", f.w_im, "arrow W, imaginary part (default 0)");
  csv_trace->add_option("--steps", f.steps, "RK4 steps (default 64)");
  for (auto* s : {csv_grid, csv_fiber, csv_trace}) {
    s->add_option("--file", f.file, "output path (default OUT/<kind>.csv)");
    s->add_option("--out", f.out, "output directory");
    s->add_option("--config", f.config, "JSON config file; flags win");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  const auto t0 = std::chrono::steady_clock::now();

  if (*cat_list) {
    for (const auto& k : catalog_keys()) std::cout << k << "\n";
    return 0;
  }

  if (*cat_verify) {
    auto cfg = resolve(f, 1e-9);
    GroupoidPtr g = catalog(key);
    if (f.mutate) {
      if (*f.mutate != "product-sign") throw UsageError("unknown mutation '" + *f.mutate + "'");
      g = corrupt_product_sign(*g);
    }
    Report r = verify_axioms(*g, cfg.samples, cfg.tol, cfg.seed);
    r.campaign_id = "catalog-verify-" + key + (f.mutate ? "-mutant" : "");
    r.target = key;
    if (g->omega) r.absorb(verify_symplectic(*g, cfg.samples, cfg.seed), "symplectic.");
    if ((g->omega || g->pi) && g->base_pi)
      r.absorb(pushforward_check(*g, *g->base_pi, cfg.samples, std::max(cfg.tol, 1e-8), cfg.seed), "pushforward.");
    return finish(std::move(r), cfg, t0);
  }

  if (*res_build) {
    CampaignConfig cfg;
    if (f.config) cfg = resolve(f, 1e-8);
    std::cout << atlas_manifest(build_family(family, f, cfg));
    return 0;
  }

  if (*res_verify) {
    auto cfg = resolve(f, 1e-8);
    ResolutionAtlas at = build_family(family, f, cfg);
    Report r = verify_resolution(at, cfg.samples, cfg.tol, cfg.seed);
    r.campaign_id = "resolution-verify-" + family_tag(family, at);
    if (family == "r2") r.absorb(r2_reduction_check(cfg.samples, cfg.tol, cfg.seed), "reduction.");
    if (family == "grothendieck")
      r.absorb(grothendieck_invariants(parse_rational(at.params.at("tau")), cfg.samples, std::min(cfg.tol, 1e-12),
                                       cfg.seed),
               "invariants.");
    if (family == "kleinian")
      r.absorb(kleinian_invariants(std::stoi(at.params.at("l")), cfg.samples, cfg.tol, cfg.seed), "invariants.");
    return finish(std::move(r), cfg, t0);
  }

  if (*spr) {
    auto cfg = resolve(f, 1e-8);
    const int n = pick<int>(f.n, cfg.file, "n", 2);
    const auto levi = parse_levi(pick<std::string>(f.levi, cfg.file, "levi", ""));
    ResolutionAtlas at = springer(n, levi);
    ParabolicData p = parabolic(n, levi);
    NilpotentRep x = springer_richardson(p);
    Report r;
    r.campaign_id = family_tag("springer", at);
    r.target = "sl" + std::to_string(n);
    r.absorb(richardson_certificate(p, x), "richardson.");
    r.absorb(lagrangian_pairing_certificate(p, x, 8, cfg.seed), "pairing.");
    r.absorb(verify_resolution(at, cfg.samples, cfg.tol, cfg.seed), "resolution.");
    return finish(std::move(r), cfg, t0);
  }

  if (*kle) {
    auto cfg = resolve(f, 1e-8);
    const int l = pick<int>(f.l, cfg.file, "l", 2);
    if (l != 2 && l != 3) throw std::invalid_argument("unsupported l = " + std::to_string(l) + " (supported: 2, 3)");
    ResolutionAtlas at = kleinian(l);
    Report r = kleinian_invariants(l, cfg.samples, cfg.tol, cfg.seed);
    r.campaign_id = "kleinian-l" + std::to_string(l);
    r.absorb(verify_resolution(at, cfg.samples, cfg.tol, cfg.seed), "resolution.");
    return finish(std::move(r), cfg, t0);
  }

  if (*ap) {
    auto cfg = resolve(f, 1e-5);
    const int k = pick<int>(f.k, cfg.file, "k", 0);
    const int winding = pick<int>(f.winding, cfg.file, "winding", 1);
    ResolutionAtlas at = build_r2(k);
    Report r;
    r.campaign_id = "apath-k" + std::to_string(k);
    r.target = "r2 k=" + std::to_string(k);

    const Point z0{0.0, 1.0};
    IntegratorConfig icfg;
    icfg.keep_trace = f.file.has_value();
    const Point m0 = at.charts[0].phi(z0);
    LiftResult lift = lift_path(at, r2_loop(m0, winding), z0, icfg);
    MonodromyResult mono;
    mono.start = z0;
    mono.end = lift.end;
    mono.class_trivial = at.same_class(z0, lift.end, cfg.tol);
    mono.fiber_match = INFINITY;
    for (const auto& q : fiber_enumerate(build_r2(0), m0, std::abs(winding) + 8)) {
      double d = std::max(std::abs(q[0] - lift.end[0]), std::abs(q[1] - lift.end[1]));
      mono.fiber_match = std::min(mono.fiber_match, d);
    }
    CheckRecord endpoint;
    endpoint.name = "monodromy_endpoint_in_fiber";
    endpoint.tol = cfg.tol;
    endpoint.max_residual = mono.fiber_match;
    endpoint.samples_used = 1;
    endpoint.status = mono.fiber_match <= cfg.tol ? Status::Pass : Status::Fail;
    std::ostringstream ends;
    ends << std::setprecision(12) << "end (" << lift.end[0].real() << ", " << lift.end[1].real() << ")";
    endpoint.notes = ends.str();
    if (!endpoint.ok()) endpoint.witnesses.push_back({0, mono.fiber_match, {}, endpoint.notes});
    r.add(endpoint);

    CheckRecord cls;
    const bool expect_trivial = k == 1 || winding == 0;
    cls.name = "monodromy_class";
    cls.tol = cfg.tol;
    cls.samples_used = 1;
    cls.status = mono.class_trivial == expect_trivial ? Status::Pass : Status::Fail;
    cls.max_residual = cls.ok() ? 0.0 : 1.0;
    cls.notes = std::string(mono.class_trivial ? "trivial" : "nontrivial") + ", expected " +
                (expect_trivial ? "trivial" : "nontrivial");
    if (!cls.ok()) cls.witnesses.push_back({0, 1.0, {}, cls.notes});
    r.add(cls);
    r.metadata["winding"] = std::to_string(winding);
    r.metadata["lift_steps"] = std::to_string(lift.steps);

    r.absorb(action_consistency(at, cfg.samples, cfg.tol, cfg.seed), "action.");
    r.absorb(path_properties(at, cfg.tol), "path.");
    if (f.file) {
      std::ostringstream os;
      write_trace_csv(os, at, lift);
      write_atomic(*f.file, os.str());
    }
    return finish(std::move(r), cfg, t0);
  }

  if (*rep_show) {
    std::ifstream in(report_file);
    if (!in) throw UsageError("cannot read " + report_file);
    std::stringstream ss;
    ss << in.rdbuf();
    Report r;
    try {
      r = report_from_json(ss.str());
    } catch (const std::exception& e) {
      throw UsageError("bad report " + report_file + ": " + e.what());
    }
    std::cout << "campaign " << r.campaign_id << "  target " << r.target << "  seed " << r.seed << "  version "
              << r.toolkit_version << "\n";
    for (const auto& [k, v] : r.metadata) std::cout << "  " << k << ": " << v << "\n";
    print_checks(r, std::cout);
    std::cout << (r.ok() ? "PASS" : "FAIL") << "\n";
    return r.ok() ? 0 : 1;
  }

  if (*csv) {
    auto cfg = resolve(f, 1e-8);
    std::ostringstream os;
    os << std::setprecision(17);
    std::string kind;
    if (*csv_grid) {
      kind = "phi-grid";
      const int n = pick<int>(f.n, cfg.file, "n", 10);
      const double lo = pick<double>(f.lo, cfg.file, "lo", -2.0), hi = pick<double>(f.hi, cfg.file, "hi", 2.0);
      if (n < 2) throw UsageError("--n must be at least 2");
      const auto at = build_r2(0);
      os << "a,b,x,y\n";
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double a = lo + (hi - lo) * i / (n - 1), b = lo + (hi - lo) * j / (n - 1);
          Point m = at.charts[0].phi(Point{a, b});
          os << a << "," << b << "," << m[0].real() << "," << m[1].real() << "\n";
        }
    } else if (*csv_fiber) {
      kind = "fiber";
      const auto at = build_r2(pick<int>(f.k, cfg.file, "k", 0));
      const Point target{pick<double>(f.x, cfg.file, "x", 1.0), pick<double>(f.y, cfg.file, "y", 0.0)};
      os << "index,a,b,residual\n";
      int idx = 0;
      for (const auto& q : fiber_enumerate(at, target, pick<int>(f.count, cfg.file, "count", 5))) {
        Point m = at.charts[0].phi(q);
        const double res = std::max(std::abs(m[0] - target[0]), std::abs(m[1] - target[1]));
        os << idx++ << "," << q[0].real() << "," << q[1].real() << "," << res << "\n";
      }
    } else {
      kind = "path-trace";
      const auto at = build_r2(0);
      const Point z{pick<double>(f.a, cfg.file, "a", 0.3), pick<double>(f.b, cfg.file, "b", 1.1)};
      const cplx w{pick<double>(f.w_re, cfg.file, "w_re", 0.0), pick<double>(f.w_im, cfg.file, "w_im", 0.0)};
      const Point m = at.charts[0].phi(z);
      IntegratorConfig icfg;
      icfg.steps = pick<int>(f.steps, cfg.file, "steps", 64);
      icfg.keep_trace = true;
      write_trace_csv(os, at, lift_path(at, dazord_arrow_path(w, cplx(m[0].real(), m[1].real())), z, icfg));
    }
    fs::path path = f.file ? fs::path(*f.file) : fs::path(cfg.out) / (kind + ".csv");
    write_atomic(path, os.str());
    std::cout << kind << " written to " << path.string() << "\n";
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IntegrationFailure& e) {
    std::cerr << "integration failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

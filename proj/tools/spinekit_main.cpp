// spinekit: command-line driver for the spine toolkit.
//
// Every subcommand prints exactly one JSON document on stdout for machine
// consumption and a short human-readable summary on stderr. Exit codes:
// 0 success, 1 verification or computation failure, 2 usage error.
//
// The same parameters can be supplied in a JSON config file via --config;
// explicit command-line flags override the file. SPINEKIT_THREADS caps the
// number of worker threads for grid discovery; results never depend on it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spinekit/complex.hpp"
#include "spinekit/cone.hpp"
#include "spinekit/errors.hpp"

using nlohmann::ordered_json;
using namespace spinekit;

namespace {

// All run parameters; --config files carry the same shape in JSON.
struct RunConfig {
  std::string model;  // "h2", "bianchi", "hilbert"; derived from D if empty
  std::optional<int> D;
  double lambda = 1.0;
  double tie_tol = 1e-9;
  double fit_tol = 1e-8;
  double newton_tol = 1e-12;
  std::vector<double> region;  // lo,hi per coordinate axis
  int grid = 32;
  std::uint64_t seed = 1;
  std::string out = "spine.json";
  std::string format = "json";
  int resolution = 8;
};

[[noreturn]] void usage_fail(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  std::exit(2);
}

std::vector<double> parse_csv(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      usage_fail("not a number in list: '" + item + "'");
    }
  }
  return out;
}

void load_config(const std::string& path, RunConfig& rc) {
  std::ifstream in(path);
  if (!in) usage_fail("cannot open config file " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    usage_fail(std::string("config parse: ") + e.what());
  }
  try {
    if (j.contains("model")) rc.model = j["model"].get<std::string>();
    if (j.contains("D")) rc.D = j["D"].get<int>();
    if (j.contains("lambda")) rc.lambda = j["lambda"].get<double>();
    if (j.contains("tie_tol")) rc.tie_tol = j["tie_tol"].get<double>();
    if (j.contains("fit_tol")) rc.fit_tol = j["fit_tol"].get<double>();
    if (j.contains("newton_tol")) rc.newton_tol = j["newton_tol"].get<double>();
    if (j.contains("region")) rc.region = j["region"].get<std::vector<double>>();
    if (j.contains("grid")) rc.grid = j["grid"].get<int>();
    if (j.contains("seed")) rc.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out")) rc.out = j["out"].get<std::string>();
    if (j.contains("format")) rc.format = j["format"].get<std::string>();
    if (j.contains("resolution")) rc.resolution = j["resolution"].get<int>();
  } catch (const std::exception& e) {
    usage_fail(std::string("config field: ") + e.what());
  }
}

int default_D(const std::string& model) {
  if (model == "bianchi") return -1;
  if (model == "hilbert") return 2;
  if (model == "h2" || model.empty()) return 0;
  usage_fail("unknown model '" + model + "' (expected h2, bianchi, or hilbert)");
}

// Cross-checks --model against --D and instantiates the model.
Model resolve_model(RunConfig& rc) {
  int D = rc.D.value_or(default_D(rc.model));
  Model m = make_model(D);  // throws UnsupportedField for bad D
  if (!rc.model.empty() && model_kind_name(m.kind) != rc.model)
    usage_fail("model '" + rc.model + "' does not match D = " + std::to_string(D));
  rc.D = D;
  rc.model = model_kind_name(m.kind);
  if (rc.lambda <= 0 || rc.tie_tol <= 0 || rc.fit_tol <= 0 || rc.newton_tol <= 0)
    usage_fail("scales and tolerances must be positive");
  return m;
}

HeightParams params_of(const RunConfig& rc) {
  HeightParams hp;
  hp.lambda = rc.lambda;
  return hp;
}

ModelPoint parse_point(const Model& m, const std::string& csv) {
  std::vector<double> v = parse_csv(csv);
  if (static_cast<int>(v.size()) != m.point_dim())
    usage_fail("point needs " + std::to_string(m.point_dim()) +
               " coordinates for model " + model_kind_name(m.kind));
  ModelPoint z{v};
  if (!point_valid(m, z)) usage_fail("point is not in the model domain");
  return z;
}

// Sampled box: explicit --region (lo,hi per axis) or a one-period default
// slab above the spine.
void resolve_region(const Model& m, const RunConfig& rc,
                    std::vector<double>& lo, std::vector<double>& hi) {
  std::vector<double> r = rc.region;
  if (r.empty()) {
    switch (m.kind) {
      case ModelKind::ModularH2: r = {-0.5, 0.5, 2.0, 2.0}; break;
      case ModelKind::BianchiH3: r = {-0.5, 0.5, -0.5, 0.5, 1.5, 1.5}; break;
      default: r = {-0.5, 0.5, 1.0, 1.0, -0.5, 0.5, 1.0, 1.0}; break;
    }
  }
  if (static_cast<int>(r.size()) != 2 * m.point_dim())
    usage_fail("region needs lo,hi for each of " +
               std::to_string(m.point_dim()) + " coordinates");
  lo.clear();
  hi.clear();
  for (size_t i = 0; i + 1 < r.size(); i += 2) {
    if (r[i] > r[i + 1]) usage_fail("region lo > hi on an axis");
    lo.push_back(r[i]);
    hi.push_back(r[i + 1]);
  }
}

int thread_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  long n = static_cast<long>(std::min(hw, 8u));
  if (const char* env = std::getenv("SPINEKIT_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      usage_fail("SPINEKIT_THREADS must be a positive integer");
    n = std::min(v, 64L);
  }
  return static_cast<int>(n);
}

ordered_json json_point(const ModelPoint& z) {
  return ordered_json(z.v);
}

ordered_json json_cusps(const std::vector<Cusp>& cs) {
  ordered_json a = ordered_json::array();
  for (const auto& c : cs) a.push_back(cusp_to_string(c));
  return a;
}

void emit(const ordered_json& doc) {
  std::cout << doc.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Random sampling shared by the verify suites (deterministic in the seed).

double unif(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() % (1 << 24)) / (1 << 24);
}

QuadElem rand_int_elem(const FieldSpec& f, std::mt19937_64& rng, int span = 5) {
  auto pick = [&] {
    return Rat(static_cast<long>(rng() % (2 * span + 1)) - span);
  };
  return from_basis_coords(f, pick(), f.D == 0 ? Rat(0) : pick());
}

Cusp rand_cusp(const FieldSpec& f, std::mt19937_64& rng) {
  for (;;) {
    QuadElem p = rand_int_elem(f, rng), q = rand_int_elem(f, rng);
    if (p.is_zero() && q.is_zero()) continue;
    return Cusp::from_pair(p, q);
  }
}

ModelPoint rand_point(const Model& m, std::mt19937_64& rng) {
  switch (m.kind) {
    case ModelKind::ModularH2:
      return h2_point(unif(rng, -2, 2), unif(rng, 0.2, 3));
    case ModelKind::BianchiH3:
      return h3_point(unif(rng, -2, 2), unif(rng, -2, 2), unif(rng, 0.2, 3));
    default:
      return hh_point(unif(rng, -2, 2), unif(rng, 0.2, 3), unif(rng, -2, 2),
                      unif(rng, 0.2, 3));
  }
}

double point_dist(const ModelPoint& a, const ModelPoint& b) {
  double s = 0;
  for (size_t i = 0; i < a.v.size(); ++i) s += (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
  return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// n independent vectors in R^dim with all pairwise inner products < 0:
// alpha_i = e_i - t*u for a positive unit vector u.
std::vector<std::vector<double>> obtuse_family(int n, int dim,
                                               std::mt19937_64& rng,
                                               double frac = 0.9) {
  std::vector<double> u(dim);
  for (;;) {
    double norm = 0;
    for (int i = 0; i < dim; ++i) u[i] = unif(rng, 0.1, 1.0);
    for (double x : u) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : u) x /= norm;
    double sum = 0;
    for (double x : u) sum += x;
    double tmax = 2.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) tmax = std::min(tmax, u[i] + u[j]);
    double t = frac * tmax;
    if (std::abs(1.0 - t * sum) < 1e-3) continue;
    std::vector<std::vector<double>> vs(n, std::vector<double>(dim, 0.0));
    for (int i = 0; i < n; ++i) {
      vs[i][i] = 1.0;
      for (int r = 0; r < dim; ++r) vs[i][r] -= t * u[r];
    }
    return vs;
  }
}

// ---------------------------------------------------------------------------
// Verify suites. Each returns the number of failed trials and fills details.

int suite_invariants(const Model& m, const HeightParams& hp, int trials,
                     std::uint64_t seed, ordered_json& details) {
  const FieldSpec& f = m.field();
  std::mt19937_64 rng(seed);
  int height_failed = 0;
  for (int i = 0; i < trials; ++i) {
    ModelPoint z = rand_point(m, rng);
    Cusp c = rand_cusp(f, rng);
    GroupElement g = random_group_element(f, 4, rng());
    double rhs = height_eval(m, hp, c, z);
    double lhs = height_eval(m, hp, act_cusp(g, c), act_point(m, g, z));
    if (std::abs(lhs / rhs - 1) > 1e-9) ++height_failed;
  }
  int retract_trials = trials / 2;
  int retract_failed = 0;
  for (int i = 0; i < retract_trials; ++i) {
    ModelPoint z = rand_point(m, rng);
    GroupElement g = random_group_element(f, 3, rng());
    double t = unif(rng, 0, 1);
    try {
      RetractionResult lhs = retract_map(m, hp, act_point(m, g, z), t);
      RetractionResult rhs = retract_map(m, hp, z, t);
      if (point_dist(lhs.point, act_point(m, g, rhs.point)) > 1e-9)
        ++retract_failed;
    } catch (const Error&) {
      ++retract_failed;
    }
  }
  details["height_trials"] = trials;
  details["height_failed"] = height_failed;
  details["retraction_trials"] = retract_trials;
  details["retraction_failed"] = retract_failed;
  return height_failed + retract_failed;
}

int suite_cone(int trials, std::uint64_t seed, ordered_json& details) {
  std::mt19937_64 rng(seed);
  int cert_failed = 0, rank_failed = 0, span_failed = 0, proj_failed = 0;
  for (int trial = 0; trial < trials; ++trial) {
    int dim = 2 + static_cast<int>(rng() % 5);
    int n = 2 + static_cast<int>(rng() % static_cast<unsigned>(dim - 1));
    auto cfg = make_config(obtuse_family(n, dim, rng));
    try {
      DualBasis db = dual_basis(cfg);
      bool ok = langlands_certificate(cfg).valid;
      for (int i = 0; i < n && ok; ++i)
        for (int j = 0; j < n && ok; ++j)
          if (std::abs(dot(db.dual.vectors[i], cfg.vectors[j]) -
                       (i == j ? 1.0 : 0.0)) > 1e-10)
            ok = false;
      if (!ok) ++cert_failed;

      if (pairwise_negative_rank(cfg) != n) ++rank_failed;
      if (difference_span_dim(cfg) != n - 1) ++span_failed;

      // u = -sum c_j beta_j has <v_i, u> = -c_i <= 0 by duality.
      std::vector<double> u(dim, 0.0);
      if (trial % 10 != 0) {
        for (int j = 0; j < n; ++j) {
          double c = unif(rng, 0.0, 2.0);
          for (int r = 0; r < dim; ++r) u[r] -= c * db.dual.vectors[j][r];
        }
      }
      if (!boundary_projection_check(cfg, u).flag) ++proj_failed;
    } catch (const Error&) {
      ++cert_failed;
    }
  }
  details["certificate_failed"] = cert_failed;
  details["rank_failed"] = rank_failed;
  details["span_failed"] = span_failed;
  details["projection_failed"] = proj_failed;
  return cert_failed + rank_failed + span_failed + proj_failed;
}

int suite_flowform(const Model& m, const HeightParams& hp, int trials,
                   std::uint64_t seed, ordered_json& details) {
  const FieldSpec& f = m.field();
  std::mt19937_64 rng(seed);
  int failed = 0, done = 0;
  while (done < trials) {
    Cusp c1 = rand_cusp(f, rng), c2 = rand_cusp(f, rng);
    if (c1 == c2) continue;
    ModelPoint base = rand_point(m, rng);
    ++done;
    try {
      FlowCoefficients fc = flow_form_fit(m, hp, c1, c2, base);
      double rho = pair_invariant(m, hp, c1, c2);
      bool ok = std::abs(fc.limit_invariant / rho - 1) < 1e-8;
      for (double e : fc.e)
        if (e < -1e-10) ok = false;
      if (!ok) ++failed;
    } catch (const Error&) {
      ++failed;
    }
  }
  details["pairs"] = trials;
  details["failed"] = failed;
  return failed;
}

int suite_cover(const Model& m, const HeightParams& hp, const RunConfig& rc,
                int trials, std::uint64_t seed, ordered_json& details) {
  std::vector<double> lo, hi;
  resolve_region(m, rc, lo, hi);
  SpineComplex cx =
      discover_cells(m, hp, lo, hi, rc.grid, rc.tie_tol, thread_count());
  CoverReport rep = verify_cover(m, hp, cx, trials, seed);
  details["cells"] = cx.cells.size();
  details["samples"] = rep.total;
  details["matched"] = rep.matched;
  details["fraction"] = rep.fraction;
  details["sample_errors"] = cx.sample_errors.size();
  return rep.total - rep.matched;
}

// ---------------------------------------------------------------------------
// Subcommands.

int cmd_heights(RunConfig& rc, const std::string& cusp_str,
                const std::string& point_csv) {
  Model m = resolve_model(rc);
  HeightParams hp = params_of(rc);
  Cusp c = parse_cusp(m.field(), cusp_str);
  ModelPoint z = parse_point(m, point_csv);
  double fval = height_eval(m, hp, c, z);
  std::vector<double> grad = riem_gradient(m, hp, c, z);
  ordered_json doc;
  doc["model"] = rc.model;
  doc["D"] = *rc.D;
  doc["cusp"] = cusp_to_string(c);
  doc["point"] = json_point(z);
  doc["f"] = fval;
  doc["grad"] = ordered_json(grad);
  emit(doc);
  std::cerr << "f_" << cusp_to_string(c) << " = " << fval << "\n";
  return 0;
}

int cmd_retract(RunConfig& rc, const std::string& point_csv, double t) {
  Model m = resolve_model(rc);
  HeightParams hp = params_of(rc);
  ModelPoint z = parse_point(m, point_csv);
  if (t < 0 || t > 1) usage_fail("t must lie in [0, 1]");
  RetractionResult r = retract_map(m, hp, z, t, rc.tie_tol);
  ordered_json doc;
  doc["model"] = rc.model;
  doc["D"] = *rc.D;
  doc["t"] = t;
  doc["point"] = json_point(r.point);
  doc["mu"] = r.mu;
  doc["dominant"] = cusp_to_string(r.dominant);
  doc["active"] = json_cusps(r.active.cusps);
  doc["height"] = r.active.height;
  emit(doc);
  std::cerr << "retracted to active set of order " << r.active.cusps.size()
            << " at height " << r.active.height << "\n";
  return 0;
}

int cmd_first_contact(RunConfig& rc, const std::string& cusps_str) {
  Model m = resolve_model(rc);
  HeightParams hp = params_of(rc);
  std::vector<std::string> parts;
  std::stringstream ss(cusps_str);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() != 2) usage_fail("--cusps needs exactly two cusps");
  Cusp c1 = parse_cusp(m.field(), parts[0]);
  Cusp c2 = parse_cusp(m.field(), parts[1]);
  FirstContact fc = first_contact_pair(m, hp, c1, c2);
  FirstContactReport rep = first_contact_check(m, hp, fc.witness, c1, c2);
  ordered_json doc;
  doc["model"] = rc.model;
  doc["D"] = *rc.D;
  doc["cusps"] = ordered_json::array({cusp_to_string(c1), cusp_to_string(c2)});
  doc["height"] = fc.height;
  doc["witness"] = json_point(fc.witness);
  doc["invariant"] = pair_invariant(m, hp, c1, c2);
  doc["gradient_certificate"] = rep.first_contact;
  doc["height_certificate"] = rep.height_certificate;
  emit(doc);
  std::cerr << "first contact of {" << cusp_to_string(c1) << ", "
            << cusp_to_string(c2) << "} at height " << fc.height << "\n";
  return rep.first_contact && rep.height_certificate ? 0 : 1;
}

// Shared by spine/table/export: grid discovery plus incidence.
SpineComplex discover_for(const Model& m, const HeightParams& hp,
                          const RunConfig& rc) {
  std::vector<double> lo, hi;
  resolve_region(m, rc, lo, hi);
  SpineComplex cx =
      discover_cells(m, hp, lo, hi, rc.grid, rc.tie_tol, thread_count());
  build_incidence(cx);
  return cx;
}

ordered_json complex_summary(const SpineComplex& cx, const RunConfig& rc) {
  ordered_json doc;
  doc["model"] = rc.model;
  doc["D"] = *rc.D;
  doc["grid"] = rc.grid;
  doc["cells"] = cx.cells.size();
  ordered_json orbits = ordered_json::object();
  for (const auto& [key, count] : cx.orbit_counts) orbits[key] = count;
  doc["orbits"] = orbits;
  doc["sample_errors"] = cx.sample_errors.size();
  return doc;
}

int cmd_spine(RunConfig& rc) {
  Model m = resolve_model(rc);
  HeightParams hp = params_of(rc);
  SpineComplex cx = discover_for(m, hp, rc);
  export_complex(cx, rc.format, rc.out, rc.resolution);
  ordered_json doc = complex_summary(cx, rc);
  doc["out"] = rc.out;
  doc["format"] = rc.format;
  emit(doc);
  std::cerr << "spine: " << cx.cells.size() << " cells, "
            << cx.orbit_counts.size() << " orbits -> " << rc.out << "\n";
  return 0;
}

int cmd_export(RunConfig& rc) {
  return cmd_spine(rc);  // same pipeline; format/resolution come from flags
}

int cmd_table(RunConfig& rc) {
  Model m = resolve_model(rc);
  HeightParams hp = params_of(rc);
  SpineComplex cx = discover_for(m, hp, rc);
  IncidenceTable tbl = incidence_table(cx);
  ordered_json doc;
  doc["model"] = rc.model;
  doc["D"] = *rc.D;
  doc["labels"] = ordered_json(tbl.labels);
  doc["dims"] = ordered_json(tbl.dims);
  doc["short_names"] = ordered_json(tbl.short_names);
  ordered_json rows = ordered_json::array();
  for (const auto& row : tbl.entries) rows.push_back(ordered_json(row));
  doc["entries"] = rows;
  emit(doc);
  // Aligned human-readable table on stderr.
  size_t w = 4;
  for (const auto& s : tbl.short_names) w = std::max(w, s.size());
  std::cerr << std::string(w + 2, ' ');
  for (size_t c = 0; c < tbl.short_names.size(); ++c)
    std::cerr << tbl.short_names[c] << "  ";
  std::cerr << "\n";
  for (size_t r = 0; r < tbl.entries.size(); ++r) {
    std::cerr << tbl.short_names[r]
              << std::string(w + 2 - tbl.short_names[r].size(), ' ');
    for (size_t c = 0; c < tbl.entries[r].size(); ++c)
      std::cerr << tbl.entries[r][c]
                << std::string(tbl.short_names[c].size() + 2 -
                                   std::min(tbl.short_names[c].size() + 1,
                                            tbl.entries[r][c].size()),
                               ' ');
    std::cerr << "\n";
  }
  return 0;
}

int cmd_verify(RunConfig& rc, const std::string& suite, int trials) {
  Model m = resolve_model(rc);
  HeightParams hp = params_of(rc);
  if (trials < 0) usage_fail("--trials must be nonnegative");
  ordered_json details = ordered_json::object();
  int failed = 0;
  if (suite == "invariants") {
    failed = suite_invariants(m, hp, trials, rc.seed, details);
  } else if (suite == "cone") {
    failed = suite_cone(trials, rc.seed, details);
  } else if (suite == "flowform") {
    failed = suite_flowform(m, hp, trials, rc.seed, details);
  } else if (suite == "cover") {
    failed = suite_cover(m, hp, rc, trials, rc.seed, details);
  } else {
    usage_fail("unknown suite '" + suite +
               "' (expected invariants, cone, flowform, or cover)");
  }
  ordered_json doc;
  doc["suite"] = suite;
  doc["model"] = rc.model;
  doc["D"] = *rc.D;
  doc["seed"] = rc.seed;
  doc["trials"] = trials;
  doc["failed"] = failed;
  doc["passed"] = failed == 0;
  doc["details"] = details;
  emit(doc);
  std::cerr << "verify " << suite << ": " << (failed == 0 ? "PASS" : "FAIL")
            << " (" << failed << " failed trials)\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig rc;

  // The config file seeds the defaults; explicit flags then override.
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") load_config(argv[i + 1], rc);

  CLI::App app{"spine construction toolkit for rank-one arithmetic quotients"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (same keys as flags)");

  auto add_model_flags = [&rc, &config_path](CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "JSON config file (same keys as flags)");
    sub->add_option("--model", rc.model, "h2, bianchi, or hilbert");
    sub->add_option("--D", rc.D, "field discriminant parameter");
    sub->add_option("--lambda", rc.lambda, "global height scale");
    sub->add_option("--tie-tol", rc.tie_tol, "relative tie tolerance");
    sub->add_option("--fit-tol", rc.fit_tol, "flow-form fit tolerance");
    sub->add_option("--newton-tol", rc.newton_tol, "tie solver tolerance");
    sub->add_option("--seed", rc.seed, "random seed");
  };
  auto add_grid_flags = [&rc](CLI::App* sub) {
    sub->add_option("--region", [&rc](const std::vector<std::string>& vals) {
      rc.region = parse_csv(vals.back());
      return true;
    }, "sample box as lo,hi per coordinate");
    sub->add_option("--grid", rc.grid, "samples per non-degenerate axis");
    sub->add_option("--out", rc.out, "output path");
    sub->add_option("--format", rc.format, "export format: json or off");
    sub->add_option("--resolution", rc.resolution, "segments per exported edge");
  };

  std::string cusp_str, point_csv = "0,1", cusps_str, suite = "invariants";
  double t_val = 1.0;
  int trials = 100;

  CLI::App* c_heights = app.add_subcommand("heights", "evaluate f and grad f");
  add_model_flags(c_heights);
  c_heights->add_option("--cusp", cusp_str, "cusp, e.g. inf or 1/2")->required();
  c_heights->add_option("--point", point_csv, "model point as csv")->required();

  CLI::App* c_retract = app.add_subcommand("retract", "flow a point onto the spine");
  add_model_flags(c_retract);
  c_retract->add_option("--point", point_csv, "model point as csv")->required();
  c_retract->add_option("--t", t_val, "retraction time in [0, 1]");

  CLI::App* c_spine = app.add_subcommand("spine", "discover cells, build incidence, export");
  add_model_flags(c_spine);
  add_grid_flags(c_spine);

  CLI::App* c_verify = app.add_subcommand("verify", "run a randomized property suite");
  add_model_flags(c_verify);
  add_grid_flags(c_verify);
  c_verify->add_option("--suite", suite, "invariants, cone, flowform, or cover");
  c_verify->add_option("--trials", trials, "number of random trials");

  CLI::App* c_table = app.add_subcommand("table", "print the orbit incidence table");
  add_model_flags(c_table);
  add_grid_flags(c_table);

  CLI::App* c_export = app.add_subcommand("export", "write the complex to json or off");
  add_model_flags(c_export);
  add_grid_flags(c_export);

  CLI::App* c_fc = app.add_subcommand("first-contact", "solve a cusp pair's first contact");
  add_model_flags(c_fc);
  c_fc->add_option("--cusps", cusps_str, "two cusps, comma separated")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (app.got_subcommand(c_heights)) return cmd_heights(rc, cusp_str, point_csv);
    if (app.got_subcommand(c_retract)) return cmd_retract(rc, point_csv, t_val);
    if (app.got_subcommand(c_spine)) return cmd_spine(rc);
    if (app.got_subcommand(c_verify)) return cmd_verify(rc, suite, trials);
    if (app.got_subcommand(c_table)) return cmd_table(rc);
    if (app.got_subcommand(c_export)) return cmd_export(rc);
    if (app.got_subcommand(c_fc)) return cmd_first_contact(rc, cusps_str);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::ParseError:
      case ErrorCode::UnsupportedField:
      case ErrorCode::NotSquarefree:
      case ErrorCode::NonIntegerInput:
      case ErrorCode::FieldMismatch:
      case ErrorCode::BothZero:
      case ErrorCode::IoError:
        return 2;  // bad input
      default:
        return 1;  // computation failed
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

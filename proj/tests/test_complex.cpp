#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "spinekit/complex.hpp"
#include "spinekit/errors.hpp"

using namespace spinekit;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;  // sentinel: "did not throw"
}

double unif(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() % (1 << 24)) / (1 << 24);
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

std::vector<Cusp> cusps_of(const FieldSpec& f,
                           const std::vector<std::string>& names) {
  std::vector<Cusp> out;
  for (const auto& s : names) out.push_back(parse_cusp(f, s));
  std::sort(out.begin(), out.end());
  return out;
}

TieSet tie_of(const Model& m, const std::vector<std::string>& names) {
  TieSet ts;
  ts.cusps = cusps_of(m.field(), names);
  return ts;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The standard plane-model discovery complex: the spine over the strip,
// reached from the horizontal start line at height two.
SpineComplex plane_complex(int grid = 64) {
  Model m = make_model(0);
  HeightParams hp;
  return discover_cells(m, hp, {-0.5, 2.0}, {0.5, 2.0}, grid);
}

}  // namespace

TEST_SUITE("complex") {

TEST_CASE("orbit labels collapse translated and swapped cusp sets") {
  Model m = make_model(0);
  const FieldSpec& f = m.field();

  OrbitLabel base = classify_orbit(m, tie_of(m, {"inf", "0"}));
  OrbitLabel shifted = classify_orbit(m, tie_of(m, {"inf", "1"}));
  OrbitLabel swapped = classify_orbit(m, tie_of(m, {"0", "1"}));
  CHECK(base.key() == shifted.key());
  CHECK(base.key() == swapped.key());
  CHECK_FALSE(base.provisional);

  OrbitLabel corner = classify_orbit(m, tie_of(m, {"inf", "0", "1"}));
  OrbitLabel mirror = classify_orbit(m, tie_of(m, {"inf", "0", "-1"}));
  CHECK(corner.key() == mirror.key());
  CHECK(corner.key() != base.key());

  OrbitLabel lone = classify_orbit(m, tie_of(m, {"inf"}));
  CHECK(lone.key() == "inf");

  // The recorded group element actually carries the input onto the label.
  TieSet ts = tie_of(m, {"inf", "0", "-1"});
  std::vector<Cusp> moved;
  for (const auto& c : ts.cusps) moved.push_back(act_cusp(mirror.gamma, c));
  std::sort(moved.begin(), moved.end());
  CHECK(moved == mirror.cusps);

  CHECK(code_of([&] {
          classify_orbit(m, TieSet{});
        }) == ErrorCode::PreconditionViolated);
  Model mi = make_model(-1);
  CHECK(code_of([&] { classify_orbit(mi, tie_of(m, {"inf", "0"})); }) ==
        ErrorCode::FieldMismatch);
  (void)f;
}

TEST_CASE("orbit labels are invariant under random group elements") {
  std::mt19937_64 rng(41);
  for (int D : {0, -1, 2}) {
    Model m = make_model(D);
    const FieldSpec& f = m.field();
    std::vector<TieSet> bases = {
        tie_of(m, {"inf", "0"}),
        tie_of(m, {"inf", "0", "1"}),
    };
    if (D == -1) bases.push_back(tie_of(m, {"inf", "0", "1", "i"}));
    if (D == 2) bases.push_back(tie_of(m, {"inf", "0", "1", "1/sqrt(2)"}));
    int trials = 0;
    for (int k = 0; k < 70 && trials < 67; ++k, ++trials) {
      const TieSet& ts = bases[k % bases.size()];
      OrbitLabel ref = classify_orbit(m, ts);
      GroupElement g = random_group_element(f, 4, 1000 * D + k);
      TieSet moved;
      for (const auto& c : ts.cusps) moved.cusps.push_back(act_cusp(g, c));
      std::sort(moved.cusps.begin(), moved.cusps.end());
      OrbitLabel lab = classify_orbit(m, moved);
      REQUIRE(lab.key() == ref.key());
      CHECK_FALSE(lab.provisional);
    }
  }
  (void)rng;
}

TEST_CASE("plane discovery finds one edge orbit and one vertex orbit") {
  SpineComplex cx = plane_complex();
  REQUIRE(cx.sample_errors.empty());
  REQUIRE(cx.cells.size() == 3);

  // Orbit classes: one of dimension one, one of dimension zero.
  std::set<std::string> edge_labels, vertex_labels;
  for (const auto& c : cx.cells) {
    if (c.dim == 1) edge_labels.insert(c.orbit.key());
    if (c.dim == 0) vertex_labels.insert(c.orbit.key());
  }
  CHECK(edge_labels.size() == 1);
  CHECK(vertex_labels.size() == 1);

  // Ids are canonical: the edge (higher dimension) comes first.
  CHECK(cx.cells[0].dim == 1);
  CHECK(cx.cells[0].id == 0);
  CHECK(cx.cells[1].dim == 0);
  CHECK(cx.cells[2].dim == 0);

  // Vertex witnesses are the two corner points at height sqrt(3)/2.
  for (size_t i = 1; i < 3; ++i) {
    CHECK(std::abs(std::abs(cx.cells[i].tie.witness.v[0]) - 0.5) < 1e-9);
    CHECK(cx.cells[i].tie.witness.v[1] ==
          doctest::Approx(std::sqrt(3.0) / 2).epsilon(1e-9));
    CHECK(cx.cells[i].tie.cusps.size() == 3);
  }
  CHECK(cx.cells[0].tie.cusps.size() == 2);
  CHECK(cx.orbit_counts.at(cx.cells[1].orbit.key()) == 2);
}

TEST_CASE("plane incidence: two endpoints per edge, trivalent vertices") {
  SpineComplex cx = plane_complex();
  build_incidence(cx);
  REQUIRE(cx.incidence_built);

  const Cell& edge = cx.cells[0];
  REQUIRE(edge.dim == 1);
  CHECK(edge.boundary_ids.size() == 2);
  CHECK(edge.coboundary_ids.empty());
  for (int vid : edge.boundary_ids) {
    const Cell* v = cx.find(vid);
    REQUIRE(v != nullptr);
    CHECK(v->dim == 0);
    CHECK(v->coboundary_ids == std::vector<int>{edge.id});
    // Boundary increases tie order and decreases dimension.
    CHECK(v->tie.cusps.size() > edge.tie.cusps.size());
    CHECK(v->dim < edge.dim);
    // Each vertex opens into three admissible edge directions.
    CHECK(cell_valence(cx, vid) == 3);
  }

  IncidenceTable table = incidence_table(cx);
  REQUIRE(table.labels.size() == 2);
  CHECK(table.dims == std::vector<int>{1, 0});
  // Below the diagonal: vertices in the boundary of one edge cell.
  CHECK(table.entries[1][0] == "2");
  // Above the diagonal: edge cells meeting one vertex cell.
  CHECK(table.entries[0][1] == "3");
  CHECK(table.entries[0][0] == "0");
  CHECK(table.entries[1][1] == "0");

  SpineComplex fresh = plane_complex(8);
  CHECK(code_of([&] { incidence_table(fresh); }) ==
        ErrorCode::IncidenceMissing);
}

TEST_CASE("grid edge cases: single sample and degenerate axes") {
  Model m = make_model(0);
  HeightParams hp;
  SpineComplex cx = discover_cells(m, hp, {0.25, 3.0}, {0.25, 3.0}, 1);
  REQUIRE(cx.cells.size() == 1);
  CHECK(cx.cells[0].tie.cusps.size() == 2);
  CHECK(cx.cells[0].tie.witness.v[0] == doctest::Approx(0.25).epsilon(1e-9));

  CHECK(code_of([&] {
          discover_cells(m, hp, {0.0}, {1.0}, 4);
        }) == ErrorCode::PreconditionViolated);
  CHECK(code_of([&] {
          discover_cells(m, hp, {0.0, 2.0}, {1.0, 1.0}, 4);
        }) == ErrorCode::PreconditionViolated);
  CHECK(code_of([&] {
          discover_cells(m, hp, {0.0, 1.0}, {1.0, 2.0}, 0);
        }) == ErrorCode::PreconditionViolated);
}

TEST_CASE("discovery is deterministic and thread-count independent") {
  Model m = make_model(0);
  HeightParams hp;
  SpineComplex a = discover_cells(m, hp, {-0.5, 2.0}, {0.5, 2.0}, 16, 1e-9, 1);
  SpineComplex b = discover_cells(m, hp, {-0.5, 2.0}, {0.5, 2.0}, 16, 1e-9, 3);
  REQUIRE(a.cells.size() == b.cells.size());
  for (size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].id == b.cells[i].id);
    CHECK(a.cells[i].orbit.key() == b.cells[i].orbit.key());
    CHECK(a.cells[i].tie.witness.v == b.cells[i].tie.witness.v);
  }
}

TEST_CASE("space-model discovery reaches the quadruple corner vertex") {
  Model m = make_model(-1);
  HeightParams hp;
  SpineComplex cx =
      discover_cells(m, hp, {0.0, 0.0, 1.2}, {0.5, 0.5, 1.2}, 8);
  std::vector<Cusp> quad = cusps_of(m.field(), {"inf", "0", "1", "i"});
  bool found = false;
  for (const auto& c : cx.cells) {
    if (c.dim != 0) continue;
    if (!std::includes(c.tie.cusps.begin(), c.tie.cusps.end(), quad.begin(),
                       quad.end()))
      continue;
    found = true;
    CHECK(c.tie.witness.v[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(c.tie.witness.v[1] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(c.tie.witness.v[2] ==
          doctest::Approx(std::sqrt(0.5)).epsilon(1e-9));
  }
  CHECK(found);
}

TEST_CASE("coverage: all retracted samples match discovered orbits") {
  Model m = make_model(0);
  HeightParams hp;
  SpineComplex cx = plane_complex();
  CoverReport rep = verify_cover(m, hp, cx, 500, 2024);
  CHECK(rep.total == 500);
  CHECK(rep.matched == 500);
  CHECK(rep.fraction == 1.0);
  CHECK(rep.errors.empty());

  // Rescaling every height uniformly leaves the classification unchanged.
  HeightParams scaled;
  scaled.lambda = 2.5;
  CoverReport rep2 = verify_cover(m, scaled, cx, 200, 7);
  CHECK(rep2.fraction == 1.0);

  CoverReport empty = verify_cover(m, hp, cx, 0, 1);
  CHECK(empty.total == 0);
  CHECK(empty.fraction == 1.0);
}

TEST_CASE("product-model boundary walk around the twelve-sided cell") {
  Model m = make_model(2);
  HeightParams hp;
  SpineComplex cx{m, hp, 1e-9, {}, {}, {}, false, {}, {}};

  // The two-dimensional cell on the triple tie, then its rim.
  int a = add_cell(cx, cusps_of(m.field(), {"inf", "0", "1"}),
                   hh_point(0.5, 0.87, 0.5, 0.87));
  REQUIRE(cx.cells[a].dim == 2);
  CHECK(cx.cells[a].tie.height ==
        doctest::Approx(std::sqrt(3.0) / 2).epsilon(1e-9));

  std::vector<int> edges = expand_cell(cx, a, 16.0);
  for (int e : edges) {
    REQUIRE(cx.find(e)->dim == 1);
    expand_cell(cx, e, 16.0);
  }
  build_incidence(cx);

  std::string vertex_label =
      classify_orbit(m, tie_of(m, {"inf", "0", "1", "sqrt(2)", "1/sqrt(2)"}))
          .key();
  std::string edge_label =
      classify_orbit(m, tie_of(m, {"inf", "0", "1", "1/sqrt(2)"})).key();

  // Re-locate the two-cell after id reassignment.
  const Cell* face = nullptr;
  for (const auto& c : cx.cells)
    if (c.dim == 2) face = &c;
  REQUIRE(face != nullptr);

  // The rim is counted by cell type: tie order five and dimension zero for
  // the corners, tie order four and dimension one for the sides. A type may
  // split into several group orbits, so labels are tallied separately below.
  int rim_vertices = 0, rim_edges = 0;
  std::map<std::string, int> vertex_labels, edge_labels;
  for (int bid : face->boundary_ids) {
    const Cell* b = cx.find(bid);
    REQUIRE(b != nullptr);
    if (b->tie.cusps.size() == 5 && b->dim == 0) {
      ++rim_vertices;
      ++vertex_labels[b->orbit.key()];
    }
    if (b->tie.cusps.size() == 4 && b->dim == 1) {
      ++rim_edges;
      ++edge_labels[b->orbit.key()];
    }
  }
  CHECK(rim_vertices == 12);
  CHECK(rim_edges == 12);

  // Every rim edge closes up against exactly two corner vertices.
  for (const auto& c : cx.cells) {
    if (c.tie.cusps.size() != 4 || c.dim != 1) continue;
    int ends = 0;
    for (int bid : c.boundary_ids)
      if (cx.find(bid)->tie.cusps.size() == 5) ++ends;
    CHECK(ends == 2);
  }

  // The order-three symmetry of the triple tie splits the rim into two
  // alternating corner classes (six each) and four side classes (three
  // each); the solved reference ties land in one class of each kind.
  CHECK(vertex_labels.size() == 2);
  for (const auto& [lbl, n] : vertex_labels) CHECK(n == 6);
  CHECK(vertex_labels.count(vertex_label) == 1);
  CHECK(edge_labels.size() == 4);
  for (const auto& [lbl, n] : edge_labels) CHECK(n == 3);
  CHECK(edge_labels.count(edge_label) == 1);

  // All twelve corners sit at the common height of the five-fold tie
  // (50-digit root of the four pairwise tie equations: 0.68901732299819).
  for (const auto& c : cx.cells) {
    if (c.tie.cusps.size() != 5) continue;
    CHECK(c.tie.height == doctest::Approx(0.68901732299819).epsilon(1e-9));
  }
}

TEST_CASE("crossing on the four-fold tie splits into two transverse branches") {
  Model m = make_model(2);
  HeightParams hp;
  std::vector<Cusp> four = cusps_of(m.field(), {"inf", "0", "sqrt(2)",
                                                "1/sqrt(2)"});

  // Generic solves land on one-dimensional branches.
  TieSet b1 = solve_tie(m, hp, four, hh_point(0.62, 0.74, -0.80, 0.66),
                        1e-12, false);
  TieSet b2 = solve_tie(m, hp, four, hh_point(0.80, 0.66, -0.62, 0.74),
                        1e-12, false);
  CHECK(tie_locus_dim(m, hp, b1) == 1);
  CHECK(tie_locus_dim(m, hp, b2) == 1);

  // At the symmetric point the Jacobian rank drops and the two branches
  // cross: the dimension report jumps.
  double r = std::sqrt(0.5);
  TieSet crossing;
  crossing.cusps = four;
  crossing.witness = hh_point(r, r, -r, r);
  crossing.height = std::sqrt(0.5);
  crossing.residual = 0;
  for (const auto& c : four)
    CHECK(height_eval(m, hp, c, crossing.witness) ==
          doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(tie_locus_dim(m, hp, crossing) == 2);
}

TEST_CASE("unit scaling direction keeps order-two product cells on the spine") {
  Model m = make_model(2);
  const FieldSpec& f = m.field();
  HeightParams hp;

  // The order-two cell through the base point, and the unit diagonal that
  // stabilizes its cusp pair.
  ModelPoint base = hh_point(0, 1, 0, 1);
  TieSet cell = active_set(m, hp, base);
  REQUIRE(cell.cusps.size() == 2);
  QuadElem eps(f, f.unit_a, f.unit_b);
  GroupElement ge = GroupElement::unit_diag(eps);

  ModelPoint moved = base;
  for (int k = 0; k < 3; ++k) {
    moved = act_point(m, ge, moved);
    TieSet there = active_set(m, hp, moved);
    CHECK(there.cusps == cell.cusps);
    for (const auto& c : cell.cusps)
      CHECK(height_eval(m, hp, c, moved) ==
            doctest::Approx(height_eval(m, hp, c, base)).epsilon(1e-9));
  }

  // The tabulation marks the non-compact column.
  SpineComplex cx{m, hp, 1e-9, {}, {}, {}, false, {}, {}};
  add_cell(cx, cell.cusps, base);
  add_cell(cx, cusps_of(f, {"inf", "0", "1", "sqrt(2)", "1/sqrt(2)"}),
           hh_point(0.7, 0.6, -0.4, 0.8));
  build_incidence(cx);
  IncidenceTable table = incidence_table(cx);
  REQUIRE(table.labels.size() == 2);
  CHECK(table.dims[0] == 3);
  CHECK(table.entries[1][0] == "inf");
}

TEST_CASE("stratified tie sets over the real quadratic field") {
  Model m = make_model(2);
  HeightParams hp;
  auto dim_of = [&](const std::vector<std::string>& names, ModelPoint seed) {
    TieSet ts = solve_tie(m, hp, cusps_of(m.field(), names), seed, 1e-12,
                          false);
    return tie_locus_dim(m, hp, ts);
  };
  CHECK(dim_of({"inf", "0"}, hh_point(0, 1, 0, 1)) == 3);
  CHECK(dim_of({"inf", "1/sqrt(2)"}, hh_point(0.7, 0.5, -0.7, 0.5)) == 3);
  CHECK(dim_of({"inf", "0", "1"}, hh_point(0.5, 0.85, 0.5, 0.85)) == 2);
  CHECK(dim_of({"inf", "0", "1/sqrt(2)"}, hh_point(0.6, 0.75, -0.6, 0.75)) ==
        2);
  CHECK(dim_of({"inf", "0", "1", "1/sqrt(2)"},
               hh_point(0.78, 0.58, -0.45, 0.83)) == 1);
  CHECK(dim_of({"inf", "0", "1", "sqrt(2)", "1/sqrt(2)"},
               hh_point(0.7, 0.6, -0.4, 0.8)) == 0);
}

TEST_CASE("export: schema order, polylines, and failure modes") {
  SpineComplex cx = plane_complex();
  build_incidence(cx);

  const std::string jpath = "/tmp/spinekit_test_complex.json";
  export_complex(cx, "json", jpath);
  std::string text = slurp(jpath);
  REQUIRE(!text.empty());
  CHECK(text.back() == '\n');
  auto j = nlohmann::ordered_json::parse(text);
  // Top-level and per-cell key order is pinned.
  std::vector<std::string> top;
  for (auto it = j.begin(); it != j.end(); ++it) top.push_back(it.key());
  CHECK(top == std::vector<std::string>{"model", "tolerance", "cells"});
  CHECK(j["model"]["kind"] == "h2");
  CHECK(j["model"]["D"] == 0);
  REQUIRE(j["cells"].size() == 3);
  std::vector<std::string> cell_keys;
  for (auto it = j["cells"][0].begin(); it != j["cells"][0].end(); ++it)
    cell_keys.push_back(it.key());
  CHECK(cell_keys == std::vector<std::string>{"id", "cusps", "dim", "witness",
                                              "height", "orbit", "boundary"});
  CHECK(j["cells"][0]["boundary"].size() == 2);

  const std::string opath = "/tmp/spinekit_test_complex.off";
  export_complex(cx, "off", opath, 6);
  std::istringstream off(slurp(opath));
  std::string header;
  int nv = 0, nf = 0, ne = 0;
  off >> header >> nv >> nf >> ne;
  CHECK(header == "OFF");
  CHECK(nv == 2 + 5);  // two vertex cells plus five interior polyline points
  CHECK(nf == 6);      // six polyline segments
  CHECK(ne == 0);

  CHECK(code_of([&] {
          export_complex(cx, "json", "/nonexistent-dir/x.json");
        }) == ErrorCode::IoError);
  CHECK(code_of([&] { export_complex(cx, "step", jpath); }) ==
        ErrorCode::PreconditionViolated);
  std::remove(jpath.c_str());
  std::remove(opath.c_str());
}

TEST_CASE("orbit classification agrees across random model points") {
  // The same cell reached from different sides of the fundamental region
  // classifies identically under retraction.
  Model m = make_model(0);
  HeightParams hp;
  std::mt19937_64 rng(99);
  std::string edge_label = classify_orbit(m, tie_of(m, {"inf", "0"})).key();
  int edges_seen = 0;
  for (int k = 0; k < 40; ++k) {
    ModelPoint z = h2_point(unif(rng, -3, 3), unif(rng, 0.4, 2.5));
    RetractionResult rr = retract_map(m, hp, z, 1.0);
    OrbitLabel lab = classify_orbit(m, rr.active);
    if (rr.active.cusps.size() == 2) {
      CHECK(lab.key() == edge_label);
      ++edges_seen;
    }
  }
  CHECK(edges_seen > 10);
}

}  // TEST_SUITE

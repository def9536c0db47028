#include "spinekit/complex.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace spinekit {

namespace {

std::vector<double> metric_factors(const Model& m, const ModelPoint& z) {
  switch (m.kind) {
    case ModelKind::ModularH2:
      return {z.v[1], z.v[1]};
    case ModelKind::BianchiH3:
      return {z.v[2], z.v[2], z.v[2]};
    case ModelKind::HilbertH2xH2:
      return {z.v[1], z.v[1], z.v[3], z.v[3]};
  }
  return {};
}

double model_height(const Model& m, const ModelPoint& z) {
  switch (m.kind) {
    case ModelKind::ModularH2:
      return z.v[1];
    case ModelKind::BianchiH3:
      return z.v[2];
    case ModelKind::HilbertH2xH2:
      return std::sqrt(z.v[1] * z.v[3]);
  }
  return 0.0;
}

std::string cusp_key(const std::vector<Cusp>& cs) {
  std::string out;
  for (size_t i = 0; i < cs.size(); ++i) {
    if (i) out += '|';
    out += cusp_to_string(cs[i]);
  }
  return out;
}

std::vector<Cusp> act_set(const GroupElement& g, const std::vector<Cusp>& cs) {
  std::vector<Cusp> out;
  out.reserve(cs.size());
  for (const auto& c : cs) out.push_back(act_cusp(g, c));
  std::sort(out.begin(), out.end());
  return out;
}

// Jacobian of the log height differences of the tie system at w; its null
// space is the tangent space of the tie locus.
Eigen::MatrixXd tie_jacobian(const Model& m, const HeightParams& hp,
                             const std::vector<Cusp>& cs, const ModelPoint& w) {
  const int d = m.point_dim();
  const int k = static_cast<int>(cs.size());
  auto fac = metric_factors(m, w);
  double f0 = height_eval(m, hp, cs[0], w);
  auto g0 = riem_gradient(m, hp, cs[0], w);
  Eigen::MatrixXd J(std::max(k - 1, 0), d);
  for (int i = 1; i < k; ++i) {
    double fi = height_eval(m, hp, cs[i], w);
    auto gi = riem_gradient(m, hp, cs[i], w);
    for (int j = 0; j < d; ++j)
      J(i - 1, j) = (g0[j] / f0 - gi[j] / fi) / (fac[j] * fac[j]);
  }
  return J;
}

// Orthonormal basis of the null space of J (columns), rank by the same
// relative threshold the dimension report uses.
Eigen::MatrixXd null_basis(const Eigen::MatrixXd& J) {
  const int d = static_cast<int>(J.cols());
  if (J.rows() == 0) return Eigen::MatrixXd::Identity(d, d);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-7 * smax) ++rank;
  return svd.matrixV().rightCols(d - rank);
}

bool contains_cusp(const std::vector<Cusp>& sorted, const Cusp& c) {
  return std::binary_search(sorted.begin(), sorted.end(), c);
}

// True when no cusp outside the tie exceeds the tie height at the witness
// beyond a small relative slack; cusps tying exactly are allowed.
bool on_spine(const Model& m, const HeightParams& hp, const TieSet& ts,
              double slack) {
  double h = ts.height;
  for (const auto& c : relevant_cusps(m, hp, ts.witness, h * (1 - 1e-9))) {
    if (contains_cusp(ts.cusps, c)) continue;
    if (height_eval(m, hp, c, ts.witness) > h * (1 + slack)) return false;
  }
  return true;
}

struct Candidate {
  std::vector<Cusp> cusps;
  GroupElement gamma;
  std::string key;
};

// Candidates of one pre-scaled configuration, one per finite pivot cusp:
// the translation rounding that pivot to the origin. Pivot candidates are
// unchanged when the configuration is shifted by an integral translation,
// which makes the minimum over them canonical; an unshifted candidate is
// added only when no finite pivot exists.
void reduced_candidates(const GroupElement& pre, const std::vector<Cusp>& base,
                        std::vector<Candidate>& out) {
  const FieldSpec& f = pre.field();
  std::vector<Cusp> scaled = act_set(pre, base);
  std::vector<QuadElem> shifts;
  for (const auto& c : scaled) {
    if (c.is_infinity()) continue;
    shifts.push_back(round_to_integral(c.value()));
  }
  if (shifts.empty()) shifts.push_back(QuadElem(f, 0));
  std::sort(shifts.begin(), shifts.end());
  shifts.erase(std::unique(shifts.begin(), shifts.end()), shifts.end());
  for (const auto& v : shifts) {
    if (v.is_zero()) {
      out.push_back({scaled, pre, cusp_key(scaled)});
      continue;
    }
    GroupElement t = GroupElement::translation(-v);
    std::vector<Cusp> moved = act_set(t, scaled);
    out.push_back({moved, t * pre, cusp_key(moved)});
  }
}

ModelPoint lerp_point(const ModelPoint& a, const ModelPoint& b, double t) {
  ModelPoint out;
  out.v.resize(a.v.size());
  for (size_t i = 0; i < a.v.size(); ++i)
    out.v[i] = (1 - t) * a.v[i] + t * b.v[i];
  return out;
}

double point_dist(const ModelPoint& a, const ModelPoint& b) {
  double s = 0;
  for (size_t i = 0; i < a.v.size(); ++i) {
    double d = a.v[i] - b.v[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::string describe_error(const Error& e) { return e.what(); }

}  // namespace

std::string OrbitLabel::key() const { return cusp_key(cusps); }

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::ModularH2:
      return "h2";
    case ModelKind::BianchiH3:
      return "bianchi";
    case ModelKind::HilbertH2xH2:
      return "hilbert";
  }
  return "unknown";
}

OrbitLabel classify_orbit(const Model& m, const TieSet& ts) {
  const FieldSpec& f = m.field();
  if (ts.cusps.empty() || ts.cusps.size() > 8)
    fail(ErrorCode::PreconditionViolated,
         "classify_orbit handles tie sets of order 1 to 8");
  for (const auto& c : ts.cusps)
    if (!(c.field() == f))
      fail(ErrorCode::FieldMismatch, "tie set cusps from a different field");

  std::optional<Candidate> best;
  auto consider = [&](std::vector<Candidate>& cands) {
    for (auto& c : cands)
      if (!best || c.key < best->key) best = c;
  };

  bool provisional = false;
  int bound_used = 0;
  const int kUnitCap = 64;
  const int kWindow = 4;

  for (const auto& anchor : ts.cusps) {
    GroupElement g0 = bezout_to_cusp(anchor).inverse();
    if (!f.is_real) {
      // The unit group is finite; every scaling is enumerated directly.
      for (const auto& u : finite_units(f)) {
        GroupElement pre = GroupElement::unit_diag(u) * g0;
        std::vector<Candidate> cands;
        reduced_candidates(pre, ts.cusps, cands);
        consider(cands);
      }
      bound_used = std::max(bound_used, 1);
      continue;
    }
    QuadElem eps(f, f.unit_a, f.unit_b);
    std::vector<QuadElem> values;
    for (const auto& c : act_set(g0, ts.cusps))
      if (!c.is_infinity()) values.push_back(c.value());

    if (values.size() >= 2) {
      // With two or more finite members the configuration's diameter grows
      // under unit scaling in one embedding and shrinks in the other, so
      // the lexicographic minimum sits near the power that balances the two
      // diameters. The balance point shifts by exactly the relative unit
      // power between equivalent configurations, which makes a fixed
      // window around it canonical.
      double d1 = 0, d2 = 0;
      for (size_t i = 0; i < values.size(); ++i)
        for (size_t j = i + 1; j < values.size(); ++j) {
          QuadElem diff = values[i] - values[j];
          d1 = std::max(d1, std::abs(embed_real(diff, 1)));
          d2 = std::max(d2, std::abs(embed_real(diff, 2)));
        }
      double eps1 = std::abs(embed_real(QuadElem(f, f.unit_a, f.unit_b), 1));
      long j0 = std::lround(std::log(d2 / d1) / (4 * std::log(eps1)));
      QuadElem pw(f, 1);
      for (long j = 0; j < j0 - kWindow; ++j) pw = pw * eps;
      for (long j = 0; j > j0 - kWindow; --j) pw = pw * eps.inverse();
      for (int step = 0; step <= 2 * kWindow; ++step) {
        GroupElement pre = GroupElement::unit_diag(pw) * g0;
        std::vector<Candidate> cands;
        reduced_candidates(pre, ts.cusps, cands);
        consider(cands);
        pw = pw * eps;
      }
      bound_used = std::max(bound_used, 2 * kWindow + 1);
      continue;
    }

    // At most one finite member: its translation-reduced value has bounded
    // norm, so the unit action cycles through a finite orbit of forms.
    // Powers are walked until the signature repeats; hitting the cap leaves
    // the label provisional.
    GroupElement up = GroupElement::identity(f);
    std::set<std::string> seen;
    int j = 0;
    for (; j < kUnitCap; ++j) {
      GroupElement pre = up * g0;
      std::vector<Candidate> cands;
      reduced_candidates(pre, ts.cusps, cands);
      consider(cands);
      std::vector<std::string> keys;
      keys.reserve(cands.size());
      for (auto& c : cands) keys.push_back(c.key);
      std::sort(keys.begin(), keys.end());
      std::string sig;
      for (auto& k : keys) {
        sig += k;
        sig += '#';
      }
      if (!seen.insert(sig).second) break;
      up = up * GroupElement::unit_diag(eps);
    }
    bound_used = std::max(bound_used, j);
    if (j == kUnitCap) provisional = true;
  }

  OrbitLabel label{best->cusps, best->gamma, provisional, bound_used};
  return label;
}

const Cell* SpineComplex::find(int id) const {
  for (const auto& c : cells)
    if (c.id == id) return &c;
  return nullptr;
}

std::vector<int> SpineComplex::cells_with_label(
    const std::string& label_key) const {
  std::vector<int> out;
  for (const auto& c : cells)
    if (c.orbit.key() == label_key) out.push_back(c.id);
  return out;
}

void assign_ids(SpineComplex& cx) {
  std::vector<size_t> order(cx.cells.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::string> keys(cx.cells.size());
  for (size_t i = 0; i < cx.cells.size(); ++i) keys[i] = cx.cells[i].orbit.key();
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (cx.cells[a].dim != cx.cells[b].dim)
      return cx.cells[a].dim > cx.cells[b].dim;
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return cx.cells[a].tie.witness.v < cx.cells[b].tie.witness.v;
  });
  std::map<int, int> remap;
  std::vector<Cell> sorted;
  sorted.reserve(cx.cells.size());
  for (size_t n = 0; n < order.size(); ++n) {
    remap[cx.cells[order[n]].id] = static_cast<int>(n);
    sorted.push_back(cx.cells[order[n]]);
    sorted.back().id = static_cast<int>(n);
  }
  for (auto& c : sorted) {
    for (auto& b : c.boundary_ids) b = remap.at(b);
    for (auto& b : c.coboundary_ids) b = remap.at(b);
    std::sort(c.boundary_ids.begin(), c.boundary_ids.end());
    std::sort(c.coboundary_ids.begin(), c.coboundary_ids.end());
  }
  cx.cells = std::move(sorted);
  cx.orbit_counts.clear();
  for (const auto& c : cx.cells) ++cx.orbit_counts[c.orbit.key()];
}

SpineComplex discover_cells(const Model& m, const HeightParams& hp,
                            const std::vector<double>& region_lo,
                            const std::vector<double>& region_hi, int grid,
                            double tol, int threads) {
  const int d = m.point_dim();
  if (static_cast<int>(region_lo.size()) != d ||
      static_cast<int>(region_hi.size()) != d)
    fail(ErrorCode::PreconditionViolated,
         "region bounds must match the model dimension");
  for (int i = 0; i < d; ++i)
    if (!(region_hi[i] >= region_lo[i]))
      fail(ErrorCode::PreconditionViolated, "region upper bound below lower");
  if (grid < 1)
    fail(ErrorCode::PreconditionViolated, "grid must be at least 1");

  std::vector<std::vector<double>> axes(d);
  for (int i = 0; i < d; ++i) {
    if (region_hi[i] == region_lo[i]) {
      axes[i] = {region_lo[i]};
    } else if (grid == 1) {
      axes[i] = {0.5 * (region_lo[i] + region_hi[i])};
    } else {
      for (int k = 0; k < grid; ++k)
        axes[i].push_back(region_lo[i] + (region_hi[i] - region_lo[i]) * k /
                                             (grid - 1));
    }
  }
  size_t total = 1;
  for (auto& a : axes) total *= a.size();

  auto sample_at = [&](size_t idx) {
    ModelPoint z;
    z.v.resize(d);
    for (int i = d - 1; i >= 0; --i) {
      z.v[i] = axes[i][idx % axes[i].size()];
      idx /= axes[i].size();
    }
    return z;
  };

  int nthreads = std::max(1, threads);
  nthreads = static_cast<int>(
      std::min<size_t>(nthreads, std::max<size_t>(total, 1)));
  std::vector<std::map<std::string, TieSet>> found(nthreads);
  std::vector<std::vector<std::string>> errs(nthreads);

  auto run = [&](int w, size_t b, size_t e) {
    for (size_t idx = b; idx < e; ++idx) {
      ModelPoint z = sample_at(idx);
      try {
        RetractionResult rr = retract_map(m, hp, z, 1.0, tol);
        std::string k = cusp_key(rr.active.cusps);
        if (!found[w].count(k)) found[w].emplace(k, rr.active);
      } catch (const Error& e2) {
        errs[w].push_back("sample " + std::to_string(idx) + ": " +
                          describe_error(e2));
      }
    }
  };

  if (nthreads == 1) {
    run(0, 0, total);
  } else {
    std::vector<std::thread> pool;
    size_t chunk = (total + nthreads - 1) / nthreads;
    for (int w = 0; w < nthreads; ++w) {
      size_t b = std::min(total, w * chunk);
      size_t e = std::min(total, b + chunk);
      pool.emplace_back(run, w, b, e);
    }
    for (auto& t : pool) t.join();
  }

  SpineComplex cx{m, hp, tol, region_lo, region_hi, {}, false, {}, {}};
  std::map<std::string, TieSet> merged;
  for (int w = 0; w < nthreads; ++w) {
    for (auto& [k, ts] : found[w])
      if (!merged.count(k)) merged.emplace(k, ts);
    for (auto& e : errs[w]) cx.sample_errors.push_back(e);
  }

  int next_id = 0;
  for (auto& [k, ts] : merged) {
    TieSet refined = ts;
    try {
      refined = solve_tie(m, hp, ts.cusps, ts.witness, 1e-12, true);
    } catch (const Error& e) {
      cx.sample_errors.push_back("refine " + k + ": " + describe_error(e));
    }
    int dim = 0;
    try {
      dim = tie_locus_dim(m, hp, refined);
    } catch (const Error& e) {
      cx.sample_errors.push_back("dimension " + k + ": " + describe_error(e));
      continue;
    }
    Cell cell{next_id++, refined, dim, classify_orbit(m, refined), {}, {}};
    cx.cells.push_back(std::move(cell));
  }
  assign_ids(cx);
  return cx;
}

namespace {

// Cusps outside the tie whose height at the tie witness exceeds the common
// height beyond the relative slack. Empty exactly when the point is on the
// spine (up to the slack).
std::vector<Cusp> exceeding_cusps(const Model& m, const HeightParams& hp,
                                  const std::vector<Cusp>& base,
                                  const TieSet& at, double slack) {
  std::vector<Cusp> out;
  for (const auto& c : relevant_cusps(m, hp, at.witness,
                                      at.height * (1 - 1e-9))) {
    if (contains_cusp(base, c)) continue;
    if (height_eval(m, hp, c, at.witness) > at.height * (1 + slack))
      out.push_back(c);
  }
  return out;
}

// Largest outside-cusp height ratio at the tie witness; 1 on the cell's
// boundary, above 1 off the spine, and strictly below 1 in the relative
// interior of the cell. Cusps below half the tie height are ignored — the
// ratio is a proximity measure, not an exhaustive maximum.
double outside_ratio(const Model& m, const HeightParams& hp,
                     const std::vector<Cusp>& base, const TieSet& at) {
  double worst = 0.0;
  for (const auto& c : relevant_cusps(m, hp, at.witness, at.height * 0.5)) {
    if (contains_cusp(base, c)) continue;
    worst = std::max(worst, height_eval(m, hp, c, at.witness) / at.height);
  }
  return worst;
}

// Walks the witness of ts into the relative interior of its cell: while
// some outside cusp ties or nearly ties at the witness, probe a fan of
// tangent directions one step in and keep the projection with the smallest
// outside ratio. A witness solved from a seed on the cell's own boundary
// (a corner, say) stays there otherwise, and a boundary witness is a poor
// representative: incidence paths and expansion fans anchor on it.
void interiorize(const Model& m, const HeightParams& hp, TieSet& ts) {
  const int d = m.point_dim();
  const double h = ts.height;
  double current = outside_ratio(m, hp, ts.cusps, ts);
  for (int round = 0; round < 12 && current > 0.6; ++round) {
    Eigen::MatrixXd tb;
    try {
      tb = null_basis(tie_jacobian(m, hp, ts.cusps, ts.witness));
    } catch (const Error&) {
      return;
    }
    if (tb.cols() == 0) return;  // an isolated point has no interior to find
    int ndirs = std::min<int>(static_cast<int>(tb.cols()), 2);
    std::optional<TieSet> best;
    double best_score = current - 1e-3;  // stop once the bottom flattens out
    for (int a = -2; a <= 2; ++a) {
      for (int b = ndirs > 1 ? -2 : 0; b <= (ndirs > 1 ? 2 : 0); ++b) {
        if (a == 0 && b == 0) continue;
        Eigen::VectorXd dir(d);
        for (int j = 0; j < d; ++j)
          dir(j) = a * tb(j, 0) + (ndirs > 1 ? b * tb(j, 1) : 0.0);
        if (dir.norm() == 0.0) continue;
        dir.normalize();
        ModelPoint seed = ts.witness;
        for (int j = 0; j < d; ++j) seed.v[j] += 0.3 * h * dir(j);
        if (!point_valid(m, seed)) continue;
        TieSet pm;
        try {
          pm = solve_tie(m, hp, ts.cusps, seed, 1e-12, false);
        } catch (const Error&) {
          continue;
        }
        double mh = model_height(m, pm.witness);
        if (mh < 0.1 * h || mh > 10.0 * h) continue;
        double score = outside_ratio(m, hp, ts.cusps, pm);
        if (score < best_score) {
          best_score = score;
          best = pm;
        }
      }
    }
    if (!best) return;  // no direction leads further inside
    ts = *best;
    current = best_score;
  }
}

}  // namespace

int add_cell(SpineComplex& cx, const std::vector<Cusp>& cusps,
             const ModelPoint& seed) {
  TieSet ts = solve_tie(cx.model, cx.params, cusps, seed, 1e-12, true);
  interiorize(cx.model, cx.params, ts);
  std::string k = cusp_key(ts.cusps);
  for (const auto& c : cx.cells)
    if (cusp_key(c.tie.cusps) == k) return c.id;
  int dim = tie_locus_dim(cx.model, cx.params, ts);
  Cell cell{static_cast<int>(cx.cells.size()),
            ts,
            dim,
            classify_orbit(cx.model, ts),
            {},
            {}};
  ++cx.orbit_counts[cell.orbit.key()];
  cx.cells.push_back(cell);
  cx.incidence_built = false;
  return cx.cells.back().id;
}

std::vector<int> expand_cell(SpineComplex& cx, int cell_id, double norm_bound) {
  const Model& m = cx.model;
  const HeightParams hp = cx.params;
  const Cell* base_ptr = cx.find(cell_id);
  if (!base_ptr) fail(ErrorCode::PreconditionViolated, "no such cell");
  const Cell base = *base_ptr;  // the cell vector reallocates while we append
  const int d = m.point_dim();
  const double h = base.tie.height;
  const long nb = std::lround(norm_bound);
  if (base.dim == 0) return {};  // a point has no boundary cells

  // Ray directions in the cell's tangent plane: primitive grid offsets
  // along up to two tangent directions.
  int ndirs = std::min<int>(base.dim, 2);
  double step = 0.45 * h;
  std::vector<std::pair<int, int>> offsets;
  for (int a = -4; a <= 4; ++a) {
    if (ndirs == 1) {
      if (a == 1 || a == -1) offsets.push_back({a, 0});
      continue;
    }
    for (int b = -4; b <= 4; ++b)
      if ((a != 0 || b != 0) && std::gcd(std::abs(a), std::abs(b)) == 1)
        offsets.push_back({a, b});
  }

  // The fan origin: the stored witness, interior by construction; walked
  // further inside as a safety net for cells recorded by older paths.
  TieSet origin = base.tie;
  interiorize(m, hp, origin);
  Eigen::MatrixXd nb_basis =
      null_basis(tie_jacobian(m, hp, base.tie.cusps, origin.witness));

  // Walk each ray outward from the witness (interior, on the spine) while
  // following the curved tie locus: every step re-projects onto the locus
  // and carries the travel direction over to the local tangent plane, so
  // the walk cannot drift back toward sectors favored by the curvature.
  // When an outside cusp has caught up with the common height, bisection on
  // the final short segment localizes the first crossing, and the cusps
  // tying there extend the cell to a boundary cell. Seeding the enlarged
  // system at the crossing keeps the solve on the correct branch.
  std::vector<int> added;
  const double kSlack = 1e-7;
  for (auto [a, b] : offsets) {
    Eigen::VectorXd dir(d);
    for (int j = 0; j < d; ++j)
      dir(j) = a * nb_basis(j, 0) + (ndirs > 1 ? b * nb_basis(j, 1) : 0.0);
    if (dir.norm() == 0.0) continue;
    dir.normalize();

    TieSet inside = origin;
    std::optional<TieSet> first_out;
    ModelPoint seg_from = origin.witness;
    for (int k = 0; k < 30 && !first_out; ++k) {
      ModelPoint seed = inside.witness;
      for (int j = 0; j < d; ++j) seed.v[j] += step * dir(j);
      if (!point_valid(m, seed)) break;
      TieSet pm;
      try {
        pm = solve_tie(m, hp, base.tie.cusps, seed, 1e-12, false);
      } catch (const Error&) {
        break;  // the locus basin ends here; no boundary along this ray
      }
      double mh = model_height(m, pm.witness);
      if (mh < 0.05 * h || mh > 20.0 * h) break;
      if (point_dist(pm.witness, origin.witness) > 8.0 * h) break;
      Eigen::VectorXd disp(d);
      for (int j = 0; j < d; ++j) disp(j) = pm.witness.v[j] - inside.witness.v[j];
      if (disp.norm() < 1e-3 * step) break;  // walk stalled against a fold
      if (exceeding_cusps(m, hp, base.tie.cusps, pm, kSlack).empty()) {
        seg_from = inside.witness;
        inside = pm;
        // carry the direction over to the tangent plane at the new point
        Eigen::MatrixXd tb =
            null_basis(tie_jacobian(m, hp, base.tie.cusps, pm.witness));
        Eigen::VectorXd carried = tb * (tb.transpose() * disp);
        if (carried.norm() < 1e-6 * step) break;
        dir = carried.normalized();
      } else {
        first_out = pm;
        seg_from = inside.witness;
      }
    }
    if (!first_out) continue;  // ray never left the cell within reach

    TieSet at_hi = *first_out;
    double t_lo = 0.0, t_hi = 1.0;
    for (int it = 0; it < 48 && t_hi - t_lo > 1e-11; ++it) {
      double mid = 0.5 * (t_lo + t_hi);
      ModelPoint seed = lerp_point(seg_from, first_out->witness, mid);
      try {
        TieSet pm = solve_tie(m, hp, base.tie.cusps, seed, 1e-12, false);
        if (exceeding_cusps(m, hp, base.tie.cusps, pm, kSlack).empty()) {
          t_lo = mid;
        } else {
          t_hi = mid;
          at_hi = pm;
        }
      } catch (const Error&) {
        t_hi = mid;  // projection failures cluster off the cell; shrink inward
      }
    }
    for (const auto& c :
         exceeding_cusps(m, hp, base.tie.cusps, at_hi, kSlack)) {
      if (!c.is_infinity() && abs_rat(norm(c.q())) > Rat(nb)) continue;
      std::vector<Cusp> cs = base.tie.cusps;
      cs.push_back(c);
      try {
        // Solved without the built-in maximality pass: the explicit spine
        // check below is cheaper and cannot hit a degenerate enumeration.
        TieSet ts = solve_tie(m, hp, cs, at_hi.witness, 1e-12, false);
        if (!point_valid(m, ts.witness)) continue;
        double mh = model_height(m, ts.witness);
        if (!(mh > 0.2 * h && mh < 5.0 * h)) continue;
        std::string k = cusp_key(ts.cusps);
        bool dup = false;
        for (const auto& cell : cx.cells)
          if (cusp_key(cell.tie.cusps) == k) {
            dup = true;
            break;
          }
        if (dup) continue;
        interiorize(m, hp, ts);  // the crossing sits on this cell's rim
        if (point_dist(ts.witness, origin.witness) > 6.0 * h) continue;
        if (!on_spine(m, hp, ts, kSlack)) continue;
        int dim = tie_locus_dim(m, hp, ts);
        Cell cell{static_cast<int>(cx.cells.size()),
                  ts,
                  dim,
                  classify_orbit(m, ts),
                  {},
                  {}};
        ++cx.orbit_counts[cell.orbit.key()];
        cx.cells.push_back(cell);
        added.push_back(cell.id);
      } catch (const Error& e) {
        cx.sample_errors.push_back("extend " + cusp_key(base.tie.cusps) +
                                   " by " + cusp_to_string(c) + ": " +
                                   describe_error(e));
      }
    }
  }
  if (!added.empty()) cx.incidence_built = false;
  return added;
}

namespace {

// B's witness must lie in the closure of A's component: project a short
// path from B's witness to A's witness onto A's tie locus and require every
// projected point to stay on the spine.
bool incident_check(const SpineComplex& cx, const Cell& A, const Cell& B) {
  const int kSteps = 8;
  for (int s = 0; s <= kSteps; ++s) {
    double t = static_cast<double>(s) / kSteps;
    ModelPoint seed = lerp_point(B.tie.witness, A.tie.witness, t);
    try {
      TieSet proj =
          solve_tie(cx.model, cx.params, A.tie.cusps, seed, 1e-12, false);
      if (!on_spine(cx.model, cx.params, proj, 1e-7)) return false;
    } catch (const Error&) {
      return false;
    }
  }
  return true;
}

}  // namespace

void build_incidence(SpineComplex& cx) {
  assign_ids(cx);
  for (auto& c : cx.cells) {
    c.boundary_ids.clear();
    c.coboundary_ids.clear();
  }
  const size_t n = cx.cells.size();
  for (size_t a = 0; a < n; ++a) {
    for (size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      Cell& A = cx.cells[a];
      Cell& B = cx.cells[b];
      if (B.tie.cusps.size() <= A.tie.cusps.size()) continue;
      if (B.dim >= A.dim) continue;
      if (!std::includes(B.tie.cusps.begin(), B.tie.cusps.end(),
                         A.tie.cusps.begin(), A.tie.cusps.end()))
        continue;
      if (!incident_check(cx, A, B)) continue;
      A.boundary_ids.push_back(B.id);
      B.coboundary_ids.push_back(A.id);
    }
  }
  for (auto& c : cx.cells) {
    std::sort(c.boundary_ids.begin(), c.boundary_ids.end());
    std::sort(c.coboundary_ids.begin(), c.coboundary_ids.end());
  }
  cx.incidence_built = true;
}

namespace {

// A one-smaller subset opens into an admissible cell when a tangent step
// into its locus keeps exactly that subset active.
bool subset_admissible(const Model& m, const HeightParams& hp,
                       const std::vector<Cusp>& subset, const ModelPoint& at,
                       double scale) {
  Eigen::MatrixXd basis = null_basis(tie_jacobian(m, hp, subset, at));
  const int d = m.point_dim();
  double delta = 0.04 * std::max(scale, 1e-6);
  for (int col = 0; col < basis.cols(); ++col) {
    for (int sgn : {+1, -1}) {
      ModelPoint seed = at;
      for (int j = 0; j < d; ++j) seed.v[j] += sgn * delta * basis(j, col);
      if (!point_valid(m, seed)) continue;
      try {
        TieSet proj = solve_tie(m, hp, subset, seed, 1e-12, false);
        TieSet act = active_set(m, hp, proj.witness);
        if (act.cusps == subset) return true;
      } catch (const Error&) {
        continue;
      }
    }
  }
  return false;
}

}  // namespace

int cell_valence(const SpineComplex& cx, int cell_id) {
  const Cell* cell = cx.find(cell_id);
  if (!cell) fail(ErrorCode::PreconditionViolated, "no such cell");
  const auto& cs = cell->tie.cusps;
  if (cs.size() < 3) fail(ErrorCode::PreconditionViolated,
                          "valence needs a tie set of order at least 3");
  int count = 0;
  for (size_t drop = 0; drop < cs.size(); ++drop) {
    std::vector<Cusp> subset;
    for (size_t i = 0; i < cs.size(); ++i)
      if (i != drop) subset.push_back(cs[i]);
    if (subset_admissible(cx.model, cx.params, subset, cell->tie.witness,
                          cell->tie.height))
      ++count;
  }
  return count;
}

CoverReport verify_cover(const Model& m, const HeightParams& hp,
                         const SpineComplex& cx, int n_samples,
                         std::uint64_t seed) {
  CoverReport rep;
  if (n_samples <= 0) return rep;
  if (cx.region_lo.empty())
    fail(ErrorCode::PreconditionViolated,
         "coverage needs a complex with a sampling region");
  std::set<std::string> labels;
  for (const auto& c : cx.cells) labels.insert(c.orbit.key());

  std::mt19937_64 rng(seed);
  auto unif = [&](double lo, double hi) {
    double u = (rng() >> 11) * (1.0 / 9007199254740992.0);
    return lo + (hi - lo) * u;
  };

  const int d = m.point_dim();
  for (int i = 0; i < n_samples; ++i) {
    ModelPoint z;
    z.v.resize(d);
    for (int j = 0; j < d; ++j)
      z.v[j] = cx.region_hi[j] > cx.region_lo[j]
                   ? unif(cx.region_lo[j], cx.region_hi[j])
                   : cx.region_lo[j];
    ++rep.total;
    try {
      RetractionResult rr = retract_map(m, hp, z, 1.0, cx.tolerance);
      OrbitLabel lab = classify_orbit(m, rr.active);
      if (labels.count(lab.key()))
        ++rep.matched;
      else
        rep.unmatched.push_back(i);
    } catch (const Error& e) {
      rep.unmatched.push_back(i);
      rep.errors.push_back("sample " + std::to_string(i) + ": " +
                           describe_error(e));
    }
  }
  rep.fraction =
      rep.total ? static_cast<double>(rep.matched) / rep.total : 1.0;
  return rep;
}

namespace {

// A cell is non-compact when an infinite-order stabilizer generator of one
// of its cusps preserves the whole tie set; the cell then extends along a
// unit or translation direction.
bool label_non_compact(const SpineComplex& cx, const Cell& cell) {
  for (const auto& c : cell.tie.cusps) {
    for (const auto& g : cusp_stabilizer_generators(c)) {
      if (act_set(g, cell.tie.cusps) == cell.tie.cusps) return true;
    }
  }
  return false;
}

}  // namespace

IncidenceTable incidence_table(const SpineComplex& cx) {
  if (!cx.incidence_built)
    fail(ErrorCode::IncidenceMissing,
         "incidence must be built before tabulation");
  IncidenceTable table;
  // Representative cell per label, labels ordered by dimension descending.
  std::map<std::string, const Cell*> reps;
  for (const auto& c : cx.cells) {
    auto key = c.orbit.key();
    if (!reps.count(key)) reps[key] = &c;
  }
  std::vector<std::pair<std::string, const Cell*>> order(reps.begin(),
                                                         reps.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second->dim != b.second->dim) return a.second->dim > b.second->dim;
    return a.first < b.first;
  });
  const size_t n = order.size();
  for (auto& [key, rep] : order) {
    table.labels.push_back(key);
    table.dims.push_back(rep->dim);
    table.short_names.push_back(cusp_key(rep->tie.cusps));
  }
  table.entries.assign(n, std::vector<std::string>(n, "?"));

  for (size_t r = 0; r < n; ++r) {
    for (size_t c = 0; c < n; ++c) {
      const Cell* row_rep = order[r].second;
      const Cell* col_rep = order[c].second;
      if (r == c) {
        table.entries[r][c] = "0";
        continue;
      }
      if (r > c) {
        // Row-type cells in the boundary of one column-type cell.
        if (label_non_compact(cx, *col_rep)) {
          table.entries[r][c] = "inf";
          continue;
        }
        int count = 0;
        for (int bid : col_rep->boundary_ids) {
          const Cell* b = cx.find(bid);
          if (b && b->orbit.key() == order[r].first) ++count;
        }
        table.entries[r][c] = std::to_string(count);
      } else {
        // Row-type cells having one column-type cell in their boundary:
        // counted over the subsets of the column representative's tie set.
        size_t row_order = row_rep->tie.cusps.size();
        size_t col_order = col_rep->tie.cusps.size();
        if (row_order >= col_order) {
          table.entries[r][c] = "0";
          continue;
        }
        const auto& cs = col_rep->tie.cusps;
        int count = 0;
        // Subset enumeration over the tie set of the representative cell.
        std::vector<size_t> idx(row_order);
        std::function<void(size_t, size_t)> rec = [&](size_t pos,
                                                      size_t start) {
          if (pos == row_order) {
            std::vector<Cusp> subset;
            for (size_t i : idx) subset.push_back(cs[i]);
            TieSet sub{subset, col_rep->tie.witness, col_rep->tie.height, 0};
            if (classify_orbit(cx.model, sub).key() != order[r].first) return;
            if (subset_admissible(cx.model, cx.params, subset,
                                  col_rep->tie.witness, col_rep->tie.height))
              ++count;
            return;
          }
          for (size_t i = start; i + (row_order - pos) <= cs.size(); ++i) {
            idx[pos] = i;
            rec(pos + 1, i + 1);
          }
        };
        rec(0, 0);
        table.entries[r][c] = std::to_string(count);
      }
    }
  }
  return table;
}

namespace {

std::vector<double> project3(const Model& m, const ModelPoint& z) {
  switch (m.kind) {
    case ModelKind::ModularH2:
      return {z.v[0], z.v[1], 0.0};
    case ModelKind::BianchiH3:
      return {z.v[0], z.v[1], z.v[2]};
    case ModelKind::HilbertH2xH2:
      return {z.v[0], z.v[2], std::sqrt(z.v[1] * z.v[3])};
  }
  return {0, 0, 0};
}

}  // namespace

void export_complex(const SpineComplex& cx, const std::string& format,
                    const std::string& path, int resolution) {
  if (format != "json" && format != "off")
    fail(ErrorCode::PreconditionViolated, "format must be json or off");
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path + " for writing");

  if (format == "json") {
    nlohmann::ordered_json j;
    j["model"] = {{"kind", model_kind_name(cx.model.kind)},
                  {"D", cx.model.field().D}};
    j["tolerance"] = cx.tolerance;
    j["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : cx.cells) {
      nlohmann::ordered_json jc;
      jc["id"] = c.id;
      jc["cusps"] = nlohmann::ordered_json::array();
      for (const auto& cusp : c.tie.cusps) jc["cusps"].push_back(cusp_to_string(cusp));
      jc["dim"] = c.dim;
      jc["witness"] = c.tie.witness.v;
      jc["height"] = c.tie.height;
      jc["orbit"] = c.orbit.key();
      jc["boundary"] = c.boundary_ids;
      j["cells"].push_back(jc);
    }
    out << j.dump(2) << "\n";
  } else {
    if (resolution < 1) resolution = 1;
    std::vector<std::array<double, 3>> verts;
    std::vector<std::vector<int>> faces;
    std::map<int, int> vertex_of_cell;  // dim-0 cell id -> vertex index

    for (const auto& c : cx.cells) {
      if (c.dim != 0) continue;
      auto p = project3(cx.model, c.tie.witness);
      vertex_of_cell[c.id] = static_cast<int>(verts.size());
      verts.push_back({p[0], p[1], p[2]});
    }
    for (const auto& c : cx.cells) {
      if (c.dim != 1) continue;
      std::vector<int> ends;
      for (int bid : c.boundary_ids)
        if (vertex_of_cell.count(bid)) ends.push_back(vertex_of_cell[bid]);
      std::vector<int> chain;
      if (ends.size() == 2) {
        const Cell* b1 = cx.find(c.boundary_ids[0]);
        const Cell* b2 = cx.find(c.boundary_ids[1]);
        chain.push_back(ends[0]);
        for (int s = 1; s < resolution; ++s) {
          double t = static_cast<double>(s) / resolution;
          ModelPoint seed =
              lerp_point(b1->tie.witness, b2->tie.witness, t);
          ModelPoint on = seed;
          try {
            on = solve_tie(cx.model, cx.params, c.tie.cusps, seed, 1e-12,
                           false)
                     .witness;
          } catch (const Error&) {
          }
          auto p = project3(cx.model, on);
          chain.push_back(static_cast<int>(verts.size()));
          verts.push_back({p[0], p[1], p[2]});
        }
        chain.push_back(ends[1]);
      } else {
        // No resolved endpoints: a short polyline through the witness.
        Eigen::MatrixXd basis = null_basis(
            tie_jacobian(cx.model, cx.params, c.tie.cusps, c.tie.witness));
        for (int s = -resolution / 2; s <= resolution / 2; ++s) {
          ModelPoint seed = c.tie.witness;
          for (int j = 0; j < cx.model.point_dim(); ++j)
            seed.v[j] += 0.2 * c.tie.height * s * basis(j, 0) / resolution;
          ModelPoint on = seed;
          try {
            on = solve_tie(cx.model, cx.params, c.tie.cusps, seed, 1e-12,
                           false)
                     .witness;
          } catch (const Error&) {
          }
          auto p = project3(cx.model, on);
          chain.push_back(static_cast<int>(verts.size()));
          verts.push_back({p[0], p[1], p[2]});
        }
      }
      for (size_t i = 0; i + 1 < chain.size(); ++i)
        faces.push_back({chain[i], chain[i + 1]});
    }
    for (const auto& c : cx.cells) {
      if (c.dim != 2) continue;
      // Polygon over the cell's boundary vertices, ordered by angle in the
      // tangent plane at the witness.
      Eigen::MatrixXd basis = null_basis(
          tie_jacobian(cx.model, cx.params, c.tie.cusps, c.tie.witness));
      if (basis.cols() < 2) continue;
      std::vector<std::pair<double, int>> ring;
      for (int bid : c.boundary_ids) {
        const Cell* b = cx.find(bid);
        if (!b || b->dim != 0 || !vertex_of_cell.count(bid)) continue;
        double u = 0, v = 0;
        for (int j = 0; j < cx.model.point_dim(); ++j) {
          double dj = b->tie.witness.v[j] - c.tie.witness.v[j];
          u += dj * basis(j, 0);
          v += dj * basis(j, 1);
        }
        ring.push_back({std::atan2(v, u), vertex_of_cell[bid]});
      }
      if (ring.size() < 3) continue;
      std::sort(ring.begin(), ring.end());
      std::vector<int> face;
      for (auto& [ang, vi] : ring) face.push_back(vi);
      faces.push_back(face);
    }

    out << "OFF\n" << verts.size() << " " << faces.size() << " 0\n";
    std::ostringstream body;
    body.precision(12);
    for (const auto& v : verts)
      body << v[0] << " " << v[1] << " " << v[2] << "\n";
    for (const auto& f : faces) {
      body << f.size();
      for (int vi : f) body << " " << vi;
      body << "\n";
    }
    out << body.str();
  }
  if (!out.good()) fail(ErrorCode::IoError, "failed writing " + path);
}

}  // namespace spinekit

#include "spinekit/spine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include "spinekit/errors.hpp"

namespace spinekit {

namespace {

// Riemannian gradient = factor^2 * Euclidean gradient, per coordinate.
std::vector<double> metric_factors(const Model& m, const ModelPoint& z) {
  switch (m.kind) {
    case ModelKind::ModularH2:
      return {z.v[1], z.v[1]};
    case ModelKind::BianchiH3:
      return {z.v[2], z.v[2], z.v[2]};
    default:
      return {z.v[1], z.v[1], z.v[3], z.v[3]};
  }
}

Cusp dominant_cusp(const Model& m, const HeightParams& hp, const ModelPoint& z,
                   const std::vector<Cusp>& members) {
  Cusp best = members.front();
  double hbest = height_eval(m, hp, best, z);
  for (size_t i = 1; i < members.size(); ++i) {
    double h = height_eval(m, hp, members[i], z);
    if (h > hbest * (1.0 + 1e-14)) {
      best = members[i];
      hbest = h;
    }
  }
  return best;
}

TieSet tie_set_at(const Model& m, const HeightParams& hp,
                  const std::vector<Cusp>& cusps, const ModelPoint& z) {
  TieSet ts;
  ts.cusps = cusps;
  ts.witness = z;
  double sum = 0;
  for (const Cusp& c : cusps) sum += height_eval(m, hp, c, z);
  ts.height = sum / static_cast<double>(cusps.size());
  ts.residual = 0;
  for (const Cusp& c : cusps)
    ts.residual = std::max(
        ts.residual, std::abs(height_eval(m, hp, c, z) - ts.height) / ts.height);
  return ts;
}

double min_scale(const HeightParams& hp) {
  double s = hp.lambda;
  for (const auto& [c, v] : hp.cusp_scales) s = std::min(s, v);
  return s;
}

}  // namespace

TieSet active_set(const Model& m, const HeightParams& hp, const ModelPoint& z,
                  double tol) {
  if (!(tol > 0 && tol <= 1e-3))
    fail(ErrorCode::PreconditionViolated, "tol must lie in (0, 1e-3]");
  if (!point_valid(m, z))
    fail(ErrorCode::PreconditionViolated, "point outside the model");
  double best = height_eval(m, hp, Cusp::infinity(m.field()), z);
  for (const Cusp& c : relevant_cusps(m, hp, z, best))
    best = std::max(best, height_eval(m, hp, c, z));
  // Second pass slightly below the max picks up every cusp tying within tol.
  std::set<Cusp> members;
  for (const Cusp& c : relevant_cusps(m, hp, z, best * (1.0 - 2.0 * tol)))
    if (height_eval(m, hp, c, z) >= best * (1.0 - tol)) members.insert(c);
  TieSet ts;
  ts.cusps.assign(members.begin(), members.end());
  ts.witness = z;
  ts.height = best;
  ts.residual = 0;
  for (const Cusp& c : ts.cusps)
    ts.residual = std::max(ts.residual,
                           (best - height_eval(m, hp, c, z)) / best);
  return ts;
}

namespace {

MuLevel mu_with_active(const Model& m, const HeightParams& hp,
                       const ModelPoint& z, const TieSet& act, const Cusp& P) {
  if (act.cusps.size() >= 2) {
    for (const Cusp& c : act.cusps)
      if (!(c == P)) return {1.0, c};
  }
  const double h1 = height_eval(m, hp, P, z);
  const double theta_floor = 1e-4 * min_scale(hp);

  // Best competing relative height at flow level s; the ratio is strictly
  // decreasing in s, which makes the bisection below provably convergent.
  // Only the comparison against 1 drives the bisection, so the enumeration
  // threshold sits just below the flowed dominant height.
  auto phi = [&](double s, std::optional<Cusp>* who) -> double {
    ModelPoint zs = geodesic_flow(m, P, z, s);
    const double hs = s * h1;  // exact by the flow contract
    double top = 0;
    for (const Cusp& c : relevant_cusps(m, hp, zs, hs * (1.0 - 1e-9))) {
      if (c == P) continue;
      double v = height_eval(m, hp, c, zs);
      if (v > top) {
        top = v;
        if (who) *who = c;
      }
    }
    return top / hs;
  };

  std::optional<Cusp> second;
  if (phi(1.0, &second) >= 1.0) return {1.0, *second};  // sub-tol tie

  double lo = 0.5, hi = 1.0;
  while (phi(lo, &second) < 1.0) {
    hi = lo;
    lo *= 0.5;
    if (lo * h1 < theta_floor)
      fail(ErrorCode::NoSecondCusp,
           "no competing cusp above the enumeration floor");
  }
  for (int i = 0; i < 100 && (hi - lo) > 1e-15 * hi; ++i) {
    double mid = 0.5 * (lo + hi);
    if (phi(mid, &second) >= 1.0)
      lo = mid;
    else
      hi = mid;
  }
  return {0.5 * (lo + hi), *second};
}

}  // namespace

MuLevel mu_level(const Model& m, const HeightParams& hp, const ModelPoint& z,
                 double tol) {
  TieSet act = active_set(m, hp, z, tol);
  return mu_with_active(m, hp, z, act, dominant_cusp(m, hp, z, act.cusps));
}

RetractionResult retract_map(const Model& m, const HeightParams& hp,
                             const ModelPoint& z, double t, double tol) {
  if (!(t >= 0 && t <= 1))
    fail(ErrorCode::PreconditionViolated, "t must lie in [0, 1]");
  TieSet act = active_set(m, hp, z, tol);
  Cusp P = dominant_cusp(m, hp, z, act.cusps);
  if (act.cusps.size() >= 2) return {z, 1.0, P, act};  // already on the spine
  double mu = mu_with_active(m, hp, z, act, P).mu;
  ModelPoint pt = geodesic_flow(m, P, z, (1.0 - t) + t * mu);
  return {pt, mu, P, active_set(m, hp, pt, tol)};
}

FirstContactReport first_contact_check(const Model& m, const HeightParams& hp,
                                       const ModelPoint& z, const Cusp& c1,
                                       const Cusp& c2) {
  const double f1 = height_eval(m, hp, c1, z);
  const double f2 = height_eval(m, hp, c2, z);
  if (std::abs(f1 - f2) > 1e-8 * std::max(f1, f2))
    fail(ErrorCode::NotOnTieSet, "heights differ by " + std::to_string(f1 - f2));
  std::vector<double> g1 = riem_gradient(m, hp, c1, z);
  std::vector<double> g2 = riem_gradient(m, hp, c2, z);
  FirstContactReport rep;
  rep.defect.resize(g1.size());
  for (size_t i = 0; i < g1.size(); ++i) rep.defect[i] = g1[i] + g2[i];
  rep.defect_norm = std::sqrt(riem_inner(m, z, rep.defect, rep.defect));
  rep.gradient_norm = std::sqrt(riem_inner(m, z, g1, g1));
  rep.first_contact = rep.defect_norm <= 1e-8 * rep.gradient_norm;
  rep.height = 0.5 * (f1 + f2);
  rep.invariant_height = std::sqrt(pair_invariant(m, hp, c1, c2));
  rep.height_certificate =
      std::abs(rep.height - rep.invariant_height) <= 1e-8 * rep.invariant_height;
  return rep;
}

TieSet solve_tie(const Model& m, const HeightParams& hp,
                 const std::vector<Cusp>& cusps, const ModelPoint& seed,
                 double tol, bool require_maximality) {
  std::set<Cusp> uniq(cusps.begin(), cusps.end());
  if (uniq.size() < 2)
    fail(ErrorCode::PreconditionViolated, "need at least two distinct cusps");
  if (!point_valid(m, seed))
    fail(ErrorCode::PreconditionViolated, "seed outside the model");
  std::vector<Cusp> cs(uniq.begin(), uniq.end());
  const int dim = m.point_dim();
  const int k = static_cast<int>(cs.size()) - 1;

  // The tie system is solved in log form, log f_{c_0} - log f_{c_i} = 0:
  // same zero set, but scale-invariant, which keeps far seeds from sliding
  // toward the height-degenerate boundary of the model.
  auto residuals = [&](const ModelPoint& p, Eigen::VectorXd& f) -> double {
    double f0 = height_eval(m, hp, cs[0], p);
    double worst = 0;
    for (int i = 1; i <= k; ++i) {
      f(i - 1) = std::log(f0 / height_eval(m, hp, cs[i], p));
      worst = std::max(worst, std::abs(f(i - 1)));
    }
    return worst;
  };

  ModelPoint z = seed;
  Eigen::VectorXd f(k);
  double res = residuals(z, f);
  for (int it = 0; it < 100 && res > tol; ++it) {
    std::vector<double> fac = metric_factors(m, z);
    std::vector<double> g0 = riem_gradient(m, hp, cs[0], z);
    const double f0 = height_eval(m, hp, cs[0], z);
    Eigen::MatrixXd jac(k, dim);
    for (int i = 1; i <= k; ++i) {
      std::vector<double> gi = riem_gradient(m, hp, cs[i], z);
      const double fi = height_eval(m, hp, cs[i], z);
      for (int j = 0; j < dim; ++j)
        jac(i - 1, j) = (g0[j] / f0 - gi[j] / fi) / (fac[j] * fac[j]);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-10);
    Eigen::VectorXd step = svd.solve(-f);  // minimum-norm least squares
    bool accepted = false;
    double alpha = 1.0;
    for (int half = 0; half < 40; ++half, alpha *= 0.5) {
      ModelPoint cand = z;
      for (int j = 0; j < dim; ++j) cand.v[j] += alpha * step(j);
      if (!point_valid(m, cand)) continue;  // keep heights positive
      Eigen::VectorXd fc(k);
      double rc = residuals(cand, fc);
      if (rc < res) {
        z = cand;
        f = fc;
        res = rc;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (res > tol)
    fail(ErrorCode::NewtonDiverged,
         "relative residual " + std::to_string(res) + " after damped Newton");

  TieSet ts = tie_set_at(m, hp, cs, z);
  if (require_maximality) {
    for (const Cusp& c : relevant_cusps(m, hp, z, ts.height * (1.0 - 1e-9))) {
      if (uniq.count(c)) continue;
      if (height_eval(m, hp, c, z) > ts.height * (1.0 + 1e-9))
        fail(ErrorCode::DominatedTie,
             "cusp " + cusp_to_string(c) + " exceeds the tie height");
    }
  }
  return ts;
}

int tie_locus_dim(const Model& m, const HeightParams& hp, const TieSet& ts) {
  if (!(ts.residual < 1e-8))
    fail(ErrorCode::ResidualTooLarge,
         "residual " + std::to_string(ts.residual));
  const int dim = m.point_dim();
  const int k = static_cast<int>(ts.cusps.size());
  if (k < 2) return dim;
  std::vector<double> g0 = riem_gradient(m, hp, ts.cusps[0], ts.witness);
  Eigen::MatrixXd jac(k - 1, dim);
  for (int i = 1; i < k; ++i) {
    std::vector<double> gi = riem_gradient(m, hp, ts.cusps[i], ts.witness);
    for (int j = 0; j < dim; ++j) jac(i - 1, j) = g0[j] - gi[j];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-7 * sv(0)) ++rank;
  return dim - rank;
}

SeparationReport separation_report(const Model& m, const HeightParams& hp,
                                   const std::vector<Cusp>& cusps,
                                   const std::vector<ModelPoint>& samples) {
  if (cusps.size() < 2)
    fail(ErrorCode::PreconditionViolated, "need at least two cusps");
  SeparationReport rep;
  for (std::size_t idx = 0; idx < samples.size(); ++idx) {
    const ModelPoint& z = samples[idx];
    double hmax = 0, hmin = 0;
    for (size_t i = 0; i < cusps.size(); ++i) {
      double h = height_eval(m, hp, cusps[i], z);
      hmax = i == 0 ? h : std::max(hmax, h);
      hmin = i == 0 ? h : std::min(hmin, h);
    }
    if (hmax - hmin > 1e-8 * hmax) {
      rep.skipped.push_back({idx, "heights do not tie"});
      continue;
    }
    bool dominated = false;
    for (const Cusp& c : relevant_cusps(m, hp, z, hmax * (1.0 - 1e-9))) {
      if (std::count(cusps.begin(), cusps.end(), c)) continue;
      if (height_eval(m, hp, c, z) > hmax * (1.0 + 1e-8)) {
        rep.skipped.push_back({idx, "dominated by " + cusp_to_string(c)});
        dominated = true;
        break;
      }
    }
    if (dominated) continue;
    std::vector<std::vector<double>> grads;
    for (const Cusp& c : cusps) grads.push_back(riem_gradient(m, hp, c, z));
    for (size_t i = 0; i < cusps.size(); ++i)
      for (size_t j = i + 1; j < cusps.size(); ++j)
        rep.entries.push_back(
            {idx, cusps[i], cusps[j], riem_inner(m, z, grads[i], grads[j])});
  }
  if (rep.entries.empty()) {
    rep.verdict = "empty";
    return rep;
  }
  bool all_nonpos = true, all_strict = true;
  for (const SeparationEntry& e : rep.entries) {
    if (e.inner > 1e-10) all_nonpos = false;
    if (!(e.inner < -1e-10)) all_strict = false;
  }
  rep.verdict = !all_nonpos ? "violated"
                            : (all_strict ? "strictly separated" : "separated");
  return rep;
}

}  // namespace spinekit

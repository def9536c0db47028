#pragma once

// The three symmetric-space models (upper half-plane, upper half-space, and
// the product of two half-planes), cusp height functions, their Riemannian
// gradients, the geodesic flow toward a cusp, candidate-cusp enumeration,
// exact pair invariants, and the polynomial flow-form fit.

#include <map>
#include <optional>
#include <vector>

#include "spinekit/cusp.hpp"
#include "spinekit/field.hpp"

namespace spinekit {

enum class ModelKind { ModularH2, BianchiH3, HilbertH2xH2 };

struct Model {
  ModelKind kind;
  const FieldSpec* field_ptr;
  int weight_count;        // N: degree of the flow-form denominator in f^2
  double grad_norm_ratio;  // kappa: ||grad f|| / f, constant per model

  const FieldSpec& field() const { return *field_ptr; }
  // Coordinates: H2 (x, y); H3 (re z, im z, t); HxH (x1, y1, x2, y2).
  int point_dim() const;
};

// D == 0 -> ModularH2, D < 0 -> BianchiH3, D > 0 -> HilbertH2xH2.
Model make_model(int D);

struct ModelPoint {
  std::vector<double> v;
};

ModelPoint h2_point(double x, double y);
ModelPoint h3_point(double re, double im, double t);
ModelPoint hh_point(double x1, double y1, double x2, double y2);
bool point_valid(const Model& m, const ModelPoint& z);

struct HeightParams {
  double lambda = 1.0;                // scale of the single cusp class
  std::map<Cusp, double> cusp_scales; // synthetic per-cusp overrides

  double scale_for(const Cusp& c) const {
    auto it = cusp_scales.find(c);
    return it == cusp_scales.end() ? lambda : it->second;
  }
};

// f_c(z): closed forms lambda*y/|qz-p|^2 (H2), lambda*t/(|qz-p|^2+|q|^2 t^2)
// (H3), lambda*sqrt(y1 y2)/(d1 d2) with d_i^2 = (q_i x_i - p_i)^2 + q_i^2
// y_i^2 (HxH); the normalized pair (1, 0) makes f_inf = lambda * height.
double height_eval(const Model& m, const HeightParams& hp, const Cusp& c,
                   const ModelPoint& z);

// Isometric Moebius action per model.
ModelPoint act_point(const Model& m, const GroupElement& g, const ModelPoint& z);

// Flows z along the geodesic toward/away from c so that f_c scales by s
// exactly; other heights change per the flow form.
ModelPoint geodesic_flow(const Model& m, const Cusp& c, const ModelPoint& z,
                         double s);

double geodesic_ratio(const Model& m, const HeightParams& hp, const Cusp& c,
                      const ModelPoint& z, const ModelPoint& x);

// Riemannian gradient: Euclidean gradient rescaled by y^2 / t^2 /
// componentwise y_i^2. Returned in Euclidean coordinates of the model chart.
std::vector<double> riem_gradient(const Model& m, const HeightParams& hp,
                                  const Cusp& c, const ModelPoint& z);

// Inner product of tangent vectors at z in the model metric.
double riem_inner(const Model& m, const ModelPoint& z,
                  const std::vector<double>& u, const std::vector<double>& w);

// Every cusp with height >= theta at z; complete via the bound
// f_{p/q} <= lambda / (|q|^2_model * height(z)).
std::vector<Cusp> relevant_cusps(const Model& m, const HeightParams& hp,
                                 const ModelPoint& z, double theta);

// rho(c1, c2) = lambda1*lambda2 / |Delta|^2_model, the z-independent pair
// constant; |Delta|^2_model is Delta^2, the complex norm, or |field norm|.
double pair_invariant(const Model& m, const HeightParams& hp, const Cusp& c1,
                      const Cusp& c2);

struct FlowCoefficients {
  std::vector<double> e;   // e_0 .. e_N, all >= -1e-10, e_N > 0
  double limit_invariant;  // e_N^{-1/N} = limit of f_P * f_Q up the P-flow
};

// Fits (u / f_Q)^N = sum_k e_k u^{2k} with u = f_P along the cP-flow through
// base; validates on held-out levels with relative residual < 1e-8, measured
// against the fit's sample scale once the reference value underflows it (on
// first-contact lines the held-out values vanish like u^{2N}).
FlowCoefficients flow_form_fit(const Model& m, const HeightParams& hp,
                               const Cusp& cP, const Cusp& cQ,
                               const ModelPoint& base);

struct FirstContact {
  double height;      // sqrt(pair_invariant)
  ModelPoint witness; // f_{c1} = f_{c2} = height, gradients anti-aligned
};

FirstContact first_contact_pair(const Model& m, const HeightParams& hp,
                                const Cusp& c1, const Cusp& c2);

}  // namespace spinekit

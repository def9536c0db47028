#pragma once

// The spine machinery: active sets of tied cusps, the equivariant retraction
// onto the locus where at least two exhaustion functions tie, first-contact
// certification, Newton solvers for tie systems, the dimension of a tie
// locus, and a sampling diagnostic for gradient separatedness.

#include <string>
#include <vector>

#include "spinekit/heights.hpp"

namespace spinekit {

struct TieSet {
  std::vector<Cusp> cusps;  // sorted, at least one entry
  ModelPoint witness;
  double height = 0;    // common height at the witness
  double residual = 0;  // |f_c(witness) - height| <= residual * height
};

// All cusps whose height at z is within relative tol of the maximum height
// at z. Deterministic; tol in (0, 1e-3].
TieSet active_set(const Model& m, const HeightParams& hp, const ModelPoint& z,
                  double tol = 1e-9);

struct MuLevel {
  double mu;   // largest s <= 1 at which a second cusp ties the flowed level
  Cusp second; // the cusp achieving the tie
};

// Flow level at which the dominant cusp P first shares its height: bisection
// on s (the ratio max_{Q != P} f_Q / f_P along the P-flow is strictly
// monotone in s), with the candidate set re-enumerated at every level.
// Returns mu = 1 when z is already tied. Errors: NoSecondCusp.
MuLevel mu_level(const Model& m, const HeightParams& hp, const ModelPoint& z,
                 double tol = 1e-9);

struct RetractionResult {
  ModelPoint point;
  double mu;     // <= 1; equals 1 iff z was already tied (within tol)
  Cusp dominant; // the cusp whose flow carries z
  TieSet active; // active set at `point`
};

// r_t(z) = flow of z along the dominant-cusp geodesic to level (1-t) + t*mu.
// t = 0 is the identity; t = 1 lands on the spine (active order >= 2).
RetractionResult retract_map(const Model& m, const HeightParams& hp,
                             const ModelPoint& z, double t, double tol = 1e-9);

struct FirstContactReport {
  bool first_contact;          // gradient certificate: grad f1 = -grad f2
  std::vector<double> defect;  // grad f_{c1} + grad f_{c2} at z
  double defect_norm;          // Riemannian norm of the defect
  double gradient_norm;        // Riemannian norm of grad f_{c1}
  double height;               // common height at z
  double invariant_height;     // sqrt(pair_invariant(c1, c2))
  bool height_certificate;     // height matches invariant_height (1e-8 rel)
};

// z must lie on the tie locus of {c1, c2} within 1e-8 relative, else
// NotOnTieSet. The two certificates agree on valid input.
FirstContactReport first_contact_check(const Model& m, const HeightParams& hp,
                                       const ModelPoint& z, const Cusp& c1,
                                       const Cusp& c2);

// Damped Newton iteration on f_{c_0} - f_{c_i} = 0 with minimum-norm
// least-squares steps (underdetermined systems converge to the nearest point
// of the tie locus). After convergence the maximality side-condition is
// re-checked by enumeration unless require_maximality is false.
// Errors: NewtonDiverged (100-iteration cap), DominatedTie.
TieSet solve_tie(const Model& m, const HeightParams& hp,
                 const std::vector<Cusp>& cusps, const ModelPoint& seed,
                 double tol = 1e-12, bool require_maximality = true);

// dim(model) minus the numerical rank of the Riemannian gradient-difference
// rows at the witness. Requires ts.residual < 1e-8, else ResidualTooLarge.
int tie_locus_dim(const Model& m, const HeightParams& hp, const TieSet& ts);

struct SeparationEntry {
  std::size_t sample;  // index into the input sequence
  Cusp p, q;
  double inner;  // Riemannian <grad f_p, grad f_q> at the sample
};

struct SeparationSkip {
  std::size_t sample;
  std::string reason;
};

struct SeparationReport {
  std::vector<SeparationEntry> entries;
  std::vector<SeparationSkip> skipped;
  std::string verdict;  // "strictly separated", "separated", "violated",
                        // or "empty"
};

// Sampling diagnostic for pairwise gradient obtuseness on D(cusps): samples
// failing the tie or maximality test (1e-8 relative) are skipped with a
// note. Never a proof.
SeparationReport separation_report(const Model& m, const HeightParams& hp,
                                   const std::vector<Cusp>& cusps,
                                   const std::vector<ModelPoint>& samples);

}  // namespace spinekit

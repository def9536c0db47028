#pragma once

// Assembly of the equivariant spine into a finite cell complex: grid
// discovery of tie cells by retraction, orbit classification under the
// arithmetic group, incidence between cells, coverage verification,
// orbit-pair tabulation, and JSON / OFF export.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spinekit/heights.hpp"
#include "spinekit/spine.hpp"

namespace spinekit {

// "h2", "bianchi", or "hilbert"; used in exports and the CLI.
std::string model_kind_name(ModelKind kind);

// Canonical form of the group orbit of a tie set: the lexicographically
// minimal normalized cusp tuple found by anchoring each member at infinity
// and reducing modulo the stabilizer (translations and unit scalings),
// together with a group element carrying the input onto it. `provisional`
// marks labels where the unit-scaling cycle failed to close within the
// search bound; the bound used is recorded either way.
struct OrbitLabel {
  std::vector<Cusp> cusps;  // sorted canonical representative
  GroupElement gamma;       // gamma . input = cusps, as sets
  bool provisional = false;
  int search_bound = 0;  // unit powers examined per anchor

  // Serialized representative; key equality is label equality.
  std::string key() const;
};

// Canonical label of the orbit of ts.cusps. Tie sets of order up to eight;
// the witness is not consulted.
OrbitLabel classify_orbit(const Model& m, const TieSet& ts);

struct Cell {
  int id = -1;
  TieSet tie;
  int dim = 0;  // tie_locus_dim at the witness
  OrbitLabel orbit;
  std::vector<int> boundary_ids;    // incident cells of strictly larger order
  std::vector<int> coboundary_ids;  // cells this one bounds
};

struct SpineComplex {
  Model model;
  HeightParams params;
  double tolerance = 1e-9;
  // Sampled coordinate box; axes with lo == hi are degenerate. Empty for
  // complexes seeded cell by cell.
  std::vector<double> region_lo, region_hi;
  std::vector<Cell> cells;
  bool incidence_built = false;
  std::map<std::string, int> orbit_counts;  // label key -> number of cells
  std::vector<std::string> sample_errors;   // non-fatal solver failures

  const Cell* find(int id) const;
  std::vector<int> cells_with_label(const std::string& label_key) const;
};

// Retracts every sample of a coordinate grid over the given box (inside a
// fundamental region of the stabilizer of infinity) at t = 1, solves each
// distinct active tie set to full precision, classifies orbits, and records
// one cell per distinct tie set encountered. grid is the per-axis sample
// count for non-degenerate axes; solver failures are recorded per sample and
// skipped. threads > 1 splits the grid; the result does not depend on it.
SpineComplex discover_cells(const Model& m, const HeightParams& hp,
                            const std::vector<double>& region_lo,
                            const std::vector<double>& region_hi, int grid,
                            double tol = 1e-9, int threads = 1);

// Solves the given cusp set from `seed` and appends the resulting cell
// unless an equal tie set is already present. Returns the cell id.
int add_cell(SpineComplex& cx, const std::vector<Cusp>& cusps,
             const ModelPoint& seed);

// Finds cells one order deeper whose closure meets the given cell: extends
// its tie set by every nearby cusp whose denominator norm is at most
// norm_bound, solves each extension, and records the maximal solutions.
// Returns the ids of the newly added cells.
std::vector<int> expand_cell(SpineComplex& cx, int cell_id, double norm_bound);

// Sorts cells into the canonical id order (dimension descending, orbit
// label, witness lexicographic) and reassigns ids. Called by discover_cells
// and build_incidence; identical inputs give identical ids.
void assign_ids(SpineComplex& cx);

// Fills boundary/coboundary lists. B bounds A when tie(B) strictly contains
// tie(A), dim(B) < dim(A), and B's witness lies in the closure of A's
// component: a short path from B's witness toward A's witness is projected
// onto A's tie locus and must stay maximal throughout.
void build_incidence(SpineComplex& cx);

// Distinct one-smaller tie subsets of the given cell that open into
// admissible cells: a step into the subset's locus keeps exactly that
// subset active. A plane-model spine vertex has valence three.
int cell_valence(const SpineComplex& cx, int cell_id);

struct CoverReport {
  int total = 0;
  int matched = 0;
  double fraction = 1.0;         // 1 for an empty report
  std::vector<int> unmatched;    // indices of unmatched samples
  std::vector<std::string> errors;
};

// Draws n_samples random points in the complex's region, retracts each, and
// matches the active orbit label against the complex's labels. Heights are
// evaluated under hp, which may rescale the parameters the complex was
// built with.
CoverReport verify_cover(const Model& m, const HeightParams& hp,
                         const SpineComplex& cx, int n_samples,
                         std::uint64_t seed);

// Orbit-pair incidence counts, labels ordered by decreasing cell dimension.
// entries[r][c] below the diagonal counts row-type cells in the boundary of
// one column-type cell; above the diagonal, row-type cells having one
// column-type cell in their boundary; "inf" marks columns whose cells are
// non-compact along a unit direction; "?" marks pairs with no data.
struct IncidenceTable {
  std::vector<std::string> labels;
  std::vector<int> dims;
  std::vector<std::string> short_names;  // tie sets of a representative cell
  std::vector<std::vector<std::string>> entries;
};

IncidenceTable incidence_table(const SpineComplex& cx);

// Writes the complex to `path`. format "json": one object with keys model,
// tolerance, cells (id, cusps, dim, witness, height, orbit, boundary), in
// that order, newline-terminated. format "off": OFF header, 3-d vertex
// projections, edge polylines as degenerate faces (resolution segments
// each), and 2-cells as polygons over their boundary vertices.
void export_complex(const SpineComplex& cx, const std::string& format,
                    const std::string& path, int resolution = 8);

}  // namespace spinekit

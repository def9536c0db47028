#pragma once

// Linear-algebra toolkit for obtuse vector configurations: dual bases,
// nonnegativity certificates for the dominant cone, rank lemmas for
// pairwise-obtuse families, and the boundary projection inequality.

#include <Eigen/Dense>
#include <vector>

namespace spinekit {

struct VectorConfig {
  std::vector<std::vector<double>> vectors;  // common ambient dimension
  Eigen::MatrixXd gram;                      // pairwise inner products
};

// Builds the config and caches the Gram matrix.
VectorConfig make_config(std::vector<std::vector<double>> vectors);

struct DualBasis {
  VectorConfig dual;  // beta_i with <beta_i, alpha_j> = delta_ij
  double condition;   // singular-value condition number of the input
};

// Input must be linearly independent with all off-diagonal inner products
// <= 0. Errors: SingularBasis, NotObtuse.
DualBasis dual_basis(const VectorConfig& delta);

struct LanglandsCertificate {
  Eigen::MatrixXd e;  // beta_i = sum_j e(j, i) * alpha_j; entries >= 0
  bool valid;
};

// The dual basis lies in the cone spanned by the input (all e >= 0) and is
// pairwise non-obtuse; both certified numerically with 1e-10 slack.
LanglandsCertificate langlands_certificate(const VectorConfig& delta);

// Rank of a strictly pairwise-obtuse family of k+1 vectors; always k or k+1,
// with every size-k subfamily independent. Errors: NotStrictlyObtuse.
int pairwise_negative_rank(const VectorConfig& vs);

// Rank of the difference family {v_0 - v_i}; always count - 1 for strictly
// pairwise-obtuse input. Errors: NotStrictlyObtuse.
int difference_span_dim(const VectorConfig& vs);

struct BoundaryProjection {
  std::vector<double> projection;  // pr(v_0), orthogonal to all v_i - v_j
  bool flag;                       // <pr, v_i - u> > 1e-12 for every i
};

// vs independent, pairwise inner products <= 0, and <v_i, u> <= 0 for all i;
// then the projection pairs strictly positively with every v_i - u.
BoundaryProjection boundary_projection_check(const VectorConfig& vs,
                                             const std::vector<double>& u);

}  // namespace spinekit

#include "spinekit/cone.hpp"

#include <cmath>

#include "spinekit/errors.hpp"

namespace spinekit {

namespace {

constexpr double kRankThreshold = 1e-7;  // relative to largest singular value

Eigen::MatrixXd as_matrix(const VectorConfig& vc) {
  if (vc.vectors.empty()) fail(ErrorCode::PreconditionViolated, "empty config");
  const size_t d = vc.vectors[0].size();
  Eigen::MatrixXd a(d, vc.vectors.size());
  for (size_t i = 0; i < vc.vectors.size(); ++i) {
    if (vc.vectors[i].size() != d)
      fail(ErrorCode::PreconditionViolated, "mixed vector dimensions");
    for (size_t r = 0; r < d; ++r) a(r, i) = vc.vectors[i][r];
  }
  return a;
}

int numerical_rank(const Eigen::MatrixXd& a, double* condition = nullptr) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0) return 0;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > kRankThreshold * s(0)) ++rank;
  if (condition) *condition = s(0) / s(s.size() - 1);
  return rank;
}

double gram_scale(const Eigen::MatrixXd& g) {
  return std::max(g.cwiseAbs().maxCoeff(), 1.0);
}

void require_obtuse(const Eigen::MatrixXd& g, bool strict) {
  const double slack = 1e-12 * gram_scale(g);
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j) {
      if (i == j) continue;
      if (strict ? !(g(i, j) < -slack) : !(g(i, j) <= slack))
        fail(strict ? ErrorCode::NotStrictlyObtuse : ErrorCode::NotObtuse,
             "off-diagonal inner product has the wrong sign");
    }
}

// Dependence is diagnosed before obtuseness so that a degenerate family gets
// a SingularBasis error even when its inner products also have wrong signs.
Eigen::MatrixXd gram_inverse(const VectorConfig& delta, double* condition) {
  Eigen::MatrixXd a = as_matrix(delta);
  const int n = static_cast<int>(delta.vectors.size());
  if (numerical_rank(a, condition) < n)
    fail(ErrorCode::SingularBasis, "vectors are linearly dependent");
  require_obtuse(delta.gram, /*strict=*/false);
  return delta.gram.inverse();
}

}  // namespace

VectorConfig make_config(std::vector<std::vector<double>> vectors) {
  VectorConfig vc;
  vc.vectors = std::move(vectors);
  Eigen::MatrixXd a = as_matrix(vc);
  vc.gram = a.transpose() * a;
  return vc;
}

DualBasis dual_basis(const VectorConfig& delta) {
  double condition = 0;
  Eigen::MatrixXd ginv = gram_inverse(delta, &condition);
  Eigen::MatrixXd beta = as_matrix(delta) * ginv;
  std::vector<std::vector<double>> cols(delta.vectors.size());
  for (int i = 0; i < beta.cols(); ++i)
    cols[i] = std::vector<double>(beta.col(i).data(), beta.col(i).data() + beta.rows());
  return {make_config(std::move(cols)), condition};
}

LanglandsCertificate langlands_certificate(const VectorConfig& delta) {
  double condition = 0;
  // beta_i = sum_j (G^-1)_{ji} alpha_j; for an obtuse basis G is a Stieltjes
  // matrix, so G^-1 is entrywise nonnegative and <beta_i, beta_j> = (G^-1)_{ij}.
  Eigen::MatrixXd e = gram_inverse(delta, &condition);
  LanglandsCertificate out{e, true};
  for (int i = 0; i < e.rows(); ++i)
    for (int j = 0; j < e.cols(); ++j)
      if (!(e(i, j) >= -1e-10)) out.valid = false;
  if (!out.valid)
    fail(ErrorCode::CertificateViolated, "dual-basis coefficient is negative");
  return out;
}

int pairwise_negative_rank(const VectorConfig& vs) {
  require_obtuse(vs.gram, /*strict=*/true);
  Eigen::MatrixXd a = as_matrix(vs);
  const int count = static_cast<int>(vs.vectors.size());
  int rank = numerical_rank(a);
  if (rank != count && rank != count - 1)
    fail(ErrorCode::CertificateViolated, "rank outside {k, k+1}");
  for (int leave = 0; leave < count; ++leave) {
    Eigen::MatrixXd sub(a.rows(), count - 1);
    for (int i = 0, c = 0; i < count; ++i)
      if (i != leave) sub.col(c++) = a.col(i);
    if (numerical_rank(sub) != count - 1)
      fail(ErrorCode::CertificateViolated, "size-k subfamily is dependent");
  }
  return rank;
}

int difference_span_dim(const VectorConfig& vs) {
  require_obtuse(vs.gram, /*strict=*/true);
  Eigen::MatrixXd a = as_matrix(vs);
  const int count = static_cast<int>(vs.vectors.size());
  if (count < 2) return 0;
  Eigen::MatrixXd diffs(a.rows(), count - 1);
  for (int i = 1; i < count; ++i) diffs.col(i - 1) = a.col(0) - a.col(i);
  int rank = numerical_rank(diffs);
  if (rank != count - 1)
    fail(ErrorCode::CertificateViolated, "difference span has defective rank");
  return rank;
}

BoundaryProjection boundary_projection_check(const VectorConfig& vs,
                                             const std::vector<double>& u) {
  double condition = 0;
  Eigen::MatrixXd ginv = gram_inverse(vs, &condition);
  Eigen::MatrixXd a = as_matrix(vs);
  if (u.size() != static_cast<size_t>(a.rows()))
    fail(ErrorCode::PreconditionViolated, "u has the wrong dimension");
  Eigen::VectorXd uv(u.size());
  for (size_t i = 0; i < u.size(); ++i) uv(i) = u[i];
  for (int i = 0; i < a.cols(); ++i) {
    double ip = a.col(i).dot(uv);
    if (!(ip <= 1e-12 * gram_scale(vs.gram)))
      fail(ErrorCode::PreconditionViolated,
           "<v_" + std::to_string(i) + ", u> = " + std::to_string(ip) + " > 0");
  }
  // pr(v_0) = A G^-1 1 / (1' G^-1 1): orthogonal to every v_i - v_j, inside
  // the nonnegative cone of the v_i, with <pr, v_i> = ||pr||^2 for all i.
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(a.cols());
  Eigen::VectorXd coeff = ginv * ones;
  double denom = ones.dot(coeff);
  Eigen::VectorXd pr = a * coeff / denom;
  BoundaryProjection out;
  out.projection = std::vector<double>(pr.data(), pr.data() + pr.size());
  out.flag = true;
  for (int i = 0; i < a.cols(); ++i)
    if (!(pr.dot(a.col(i) - uv) > 1e-12)) out.flag = false;
  return out;
}

}  // namespace spinekit

#pragma once

// Exact arithmetic in Q and in the supported quadratic fields Q(sqrt(D)).
// Elements are stored as exact rational pairs a + b*sqrt(D); floating point
// enters only at the embed() boundary.

#include <boost/multiprecision/cpp_int.hpp>

#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spinekit/errors.hpp"

namespace spinekit {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

// Supported D values: 0 (the rational field), -1, -2, -3, -7, -11 (imaginary),
// 2, 5 (real). All have class number 1 and are norm-Euclidean.
struct FieldSpec {
  int D = 0;
  bool is_real = false;
  bool half_integer_basis = false;  // ring basis {1, (1+sqrt(D))/2} when D = 1 mod 4
  bool euclidean = true;
  // Fundamental unit a + b*sqrt(D) for real fields; 1 otherwise.
  Rat unit_a = 1, unit_b = 0;

  bool operator==(const FieldSpec& o) const { return D == o.D; }
};

// Returns a reference with program lifetime; QuadElem keeps a pointer to it.
const FieldSpec& make_field(int D);

class QuadElem {
 public:
  QuadElem() : field_(&make_field(0)) {}
  explicit QuadElem(const FieldSpec& f) : field_(&f) {}
  QuadElem(const FieldSpec& f, Rat a, Rat b);
  QuadElem(const FieldSpec& f, long v) : QuadElem(f, Rat(v), Rat(0)) {}

  const FieldSpec& field() const { return *field_; }
  const Rat& a() const { return a_; }
  const Rat& b() const { return b_; }
  bool is_zero() const { return a_ == 0 && b_ == 0; }

  QuadElem operator+(const QuadElem& o) const;
  QuadElem operator-(const QuadElem& o) const;
  QuadElem operator*(const QuadElem& o) const;
  QuadElem operator-() const;
  QuadElem inverse() const;  // exact; input must be nonzero
  QuadElem operator/(const QuadElem& o) const { return *this * o.inverse(); }

  bool operator==(const QuadElem& o) const;
  bool operator!=(const QuadElem& o) const { return !(*this == o); }
  // Lexicographic on (a, b); a total order usable as a map key.
  bool operator<(const QuadElem& o) const;

 private:
  const FieldSpec* field_;
  Rat a_ = 0, b_ = 0;
};

Rat norm(const QuadElem& x);   // a^2 - D b^2, exact
Rat trace(const QuadElem& x);  // 2a, exact
QuadElem conj(const QuadElem& x);

// Galois embeddings. which is 1 or 2. For D < 0 the embeddings are complex
// conjugates of each other; for D = 0 they coincide. The result is correctly
// rounded through a 50-digit intermediate.
std::complex<double> embed(const QuadElem& x, int which);
double embed_real(const QuadElem& x, int which);  // real and rational fields only

// Exact sign of x in the first real embedding (real and rational fields).
int sign_embed1(const QuadElem& x);

// Coordinates (m, n) with x = m + n*omega in the integer basis {1, omega}.
std::pair<Rat, Rat> basis_coords(const QuadElem& x);
QuadElem from_basis_coords(const FieldSpec& f, const Rat& m, const Rat& n);
bool is_integral(const QuadElem& x);

// Nearest algebraic integer by rounding the basis coordinates.
QuadElem round_to_integral(const QuadElem& x);

bool is_unit(const QuadElem& x);  // integral with |norm| = 1

// The finite unit group for imaginary/rational fields ({+-1}, {+-1,+-i}, or
// the six units for D = -3). Throws for real fields.
std::vector<QuadElem> finite_units(const FieldSpec& f);

// Canonical representative of the unit-association class of x. Imaginary and
// rational fields: lexicographically greatest basis coordinates among
// associates. Real fields: embedding ratio |x1/x2| in [1, eps^2) and x1 > 0,
// decided exactly.
QuadElem canonical_associate(const QuadElem& x);

QuadElem euclid_gcd(const QuadElem& x, const QuadElem& y);

struct ExtGcd {
  QuadElem g, s, t;  // s*x + t*y = g
};
ExtGcd euclid_gcd_ext(const QuadElem& x, const QuadElem& y);

// All algebraic integers x with |norm(x)| <= bound. Without per-embedding
// bounds: one nonzero representative per unit-association class (canonical as
// above). With bounds (b1, b2): every such integer, zero included, whose
// archimedean absolute values satisfy |x^(i)| <= b_i (complex modulus for
// imaginary fields, where b1 alone applies).
std::vector<QuadElem> enumerate_bounded_norm(
    const FieldSpec& f, const Rat& bound,
    std::optional<std::pair<double, double>> per_embedding_bounds = std::nullopt);

// Integers x with embed_real(x, i) in [lo_i, hi_i] for both embeddings.
// Real fields only; used for box searches in the product model.
std::vector<QuadElem> integers_in_box(const FieldSpec& f, double lo1, double hi1,
                                      double lo2, double hi2);

// "a+b*sqrt(D)" syntax, e.g. "3/2", "sqrt(-1)", "1-2*sqrt(2)". parse accepts
// "i" for sqrt(-1) when D = -1.
std::string elem_to_string(const QuadElem& x);
QuadElem parse_elem(const FieldSpec& f, const std::string& text);

std::string rat_to_string(const Rat& r);

Int floor_rat(const Rat& r);
Rat abs_rat(const Rat& r);

}  // namespace spinekit

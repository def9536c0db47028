#pragma once

// Cusps as normalized projective pairs over the ring of integers, the
// SL2(O) action on them, Bruhat factorization and cusp stabilizers.

#include <string>
#include <vector>

#include "spinekit/field.hpp"

namespace spinekit {

// Coprime pair (p : q), q canonicalized within its unit class; (1, 0) is the
// cusp at infinity. Instances are always in normal form.
class Cusp {
 public:
  static Cusp infinity(const FieldSpec& f);
  // Accepts any field pair (not both zero); clears denominators and reduces.
  static Cusp from_pair(const QuadElem& p, const QuadElem& q);
  static Cusp from_value(const QuadElem& value);  // finite cusp p/q = value

  const QuadElem& p() const { return p_; }
  const QuadElem& q() const { return q_; }
  const FieldSpec& field() const { return p_.field(); }
  bool is_infinity() const { return q_.is_zero(); }
  QuadElem value() const;  // p/q, finite cusps only

  bool operator==(const Cusp& o) const { return p_ == o.p_ && q_ == o.q_; }
  bool operator!=(const Cusp& o) const { return !(*this == o); }
  bool operator<(const Cusp& o) const;

 private:
  friend Cusp normalize_cusp(const QuadElem& p, const QuadElem& q);
  Cusp(QuadElem p, QuadElem q) : p_(std::move(p)), q_(std::move(q)) {}
  QuadElem p_, q_;
};

Cusp normalize_cusp(const QuadElem& p, const QuadElem& q);

// Delta = p1 q2 - p2 q1 from the normalized representatives; zero iff equal.
QuadElem cusp_delta(const Cusp& c1, const Cusp& c2);

struct GroupElement {
  QuadElem a, b, c, d;

  GroupElement(QuadElem a_, QuadElem b_, QuadElem c_, QuadElem d_);
  static GroupElement identity(const FieldSpec& f);
  static GroupElement weyl(const FieldSpec& f);                  // (0,-1;1,0)
  static GroupElement translation(const QuadElem& w);            // (1,w;0,1)
  static GroupElement unit_diag(const QuadElem& u);              // (u,0;0,1/u)

  const FieldSpec& field() const { return a.field(); }
  GroupElement operator*(const GroupElement& o) const;
  GroupElement inverse() const;
  bool operator==(const GroupElement& o) const;
};

Cusp act_cusp(const GroupElement& g, const Cusp& c);

struct BruhatFactors {
  bool in_parabolic = false;
  GroupElement u, w, p;  // input = u * w * p when not in_parabolic
};

BruhatFactors bruhat_decompose(const GroupElement& g);

// Element with gamma * infinity = c, determinant one, integral entries.
GroupElement bezout_to_cusp(const Cusp& c);

// Generators of a finite-index subgroup of the stabilizer of c: translations
// over the integer basis (conjugated for finite cusps) and, in real fields,
// the fundamental-unit diagonal.
std::vector<GroupElement> cusp_stabilizer_generators(const Cusp& c);

// Deterministic pseudo-random word of length <= size in S and the stabilizer
// generators of infinity.
GroupElement random_group_element(const FieldSpec& f, int size, unsigned long seed);

// "p/q" with elements in "a+b*sqrt(D)" syntax; "inf" for (1, 0).
std::string cusp_to_string(const Cusp& c);
Cusp parse_cusp(const FieldSpec& f, const std::string& text);

}  // namespace spinekit

#include "spinekit/cusp.hpp"

#include <cctype>
#include <random>
#include <set>
#include <utility>

#include "spinekit/errors.hpp"

namespace spinekit {

namespace {

void check_same_field(const QuadElem& x, const QuadElem& y) {
  if (&x.field() != &y.field())
    fail(ErrorCode::FieldMismatch, "operands from different fields");
}

// Least common multiple of the basis-coordinate denominators.
Int denominator_lcm(const QuadElem& x) {
  auto [m, n] = basis_coords(x);
  return boost::multiprecision::lcm(boost::multiprecision::denominator(m),
                                    boost::multiprecision::denominator(n));
}

}  // namespace

Cusp Cusp::infinity(const FieldSpec& f) {
  return Cusp(QuadElem(f, 1), QuadElem(f, 0));
}

Cusp Cusp::from_pair(const QuadElem& p, const QuadElem& q) {
  check_same_field(p, q);
  const FieldSpec& f = p.field();
  Int l = boost::multiprecision::lcm(denominator_lcm(p), denominator_lcm(q));
  QuadElem scale(f, Rat(l), Rat(0));
  return normalize_cusp(p * scale, q * scale);
}

Cusp Cusp::from_value(const QuadElem& value) {
  return from_pair(value, QuadElem(value.field(), 1));
}

QuadElem Cusp::value() const {
  if (is_infinity()) fail(ErrorCode::PreconditionViolated, "value() of inf");
  return p_ / q_;
}

bool Cusp::operator<(const Cusp& o) const {
  if (is_infinity() != o.is_infinity()) return is_infinity();
  if (q_ != o.q_) return q_ < o.q_;
  return p_ < o.p_;
}

Cusp normalize_cusp(const QuadElem& p, const QuadElem& q) {
  check_same_field(p, q);
  if (p.is_zero() && q.is_zero()) fail(ErrorCode::BothZero, "cusp (0, 0)");
  if (!is_integral(p) || !is_integral(q))
    fail(ErrorCode::NonIntegerInput, "cusp needs algebraic integers");
  const FieldSpec& f = p.field();
  if (q.is_zero()) return Cusp::infinity(f);
  QuadElem g = euclid_gcd(p, q);
  QuadElem pr = p / g;
  QuadElem qr = q / g;
  // qr's unit class has a unique canonical representative; p is then pinned.
  QuadElem qc = canonical_associate(qr);
  QuadElem u = qc / qr;
  if (!is_unit(u)) fail(ErrorCode::PreconditionViolated, "gcd reduction failed");
  return Cusp(pr * u, qc);
}

QuadElem cusp_delta(const Cusp& c1, const Cusp& c2) {
  check_same_field(c1.p(), c2.p());
  return c1.p() * c2.q() - c2.p() * c1.q();
}

GroupElement::GroupElement(QuadElem a_, QuadElem b_, QuadElem c_, QuadElem d_)
    : a(std::move(a_)), b(std::move(b_)), c(std::move(c_)), d(std::move(d_)) {
  check_same_field(a, b);
  check_same_field(a, c);
  check_same_field(a, d);
  if (a * d - b * c != QuadElem(a.field(), 1))
    fail(ErrorCode::PreconditionViolated, "determinant must be 1");
}

GroupElement GroupElement::identity(const FieldSpec& f) {
  return GroupElement(QuadElem(f, 1), QuadElem(f, 0), QuadElem(f, 0), QuadElem(f, 1));
}

GroupElement GroupElement::weyl(const FieldSpec& f) {
  return GroupElement(QuadElem(f, 0), QuadElem(f, -1), QuadElem(f, 1), QuadElem(f, 0));
}

GroupElement GroupElement::translation(const QuadElem& w) {
  const FieldSpec& f = w.field();
  return GroupElement(QuadElem(f, 1), w, QuadElem(f, 0), QuadElem(f, 1));
}

GroupElement GroupElement::unit_diag(const QuadElem& u) {
  const FieldSpec& f = u.field();
  return GroupElement(u, QuadElem(f, 0), QuadElem(f, 0), u.inverse());
}

GroupElement GroupElement::operator*(const GroupElement& o) const {
  return GroupElement(a * o.a + b * o.c, a * o.b + b * o.d,
                      c * o.a + d * o.c, c * o.b + d * o.d);
}

GroupElement GroupElement::inverse() const {
  return GroupElement(d, -b, -c, a);
}

bool GroupElement::operator==(const GroupElement& o) const {
  return a == o.a && b == o.b && c == o.c && d == o.d;
}

Cusp act_cusp(const GroupElement& g, const Cusp& c) {
  check_same_field(g.a, c.p());
  return Cusp::from_pair(g.a * c.p() + g.b * c.q(), g.c * c.p() + g.d * c.q());
}

BruhatFactors bruhat_decompose(const GroupElement& g) {
  const FieldSpec& f = g.field();
  BruhatFactors out{true, g, GroupElement::identity(f), GroupElement::identity(f)};
  if (g.c.is_zero()) return out;
  out.in_parabolic = false;
  out.u = GroupElement::translation(g.a / g.c);
  out.w = GroupElement::weyl(f);
  QuadElem cinv = g.c.inverse();
  out.p = GroupElement(g.c, g.d, QuadElem(f, 0), cinv);
  return out;
}

GroupElement bezout_to_cusp(const Cusp& c) {
  const FieldSpec& f = c.field();
  if (c.is_infinity()) return GroupElement::identity(f);
  ExtGcd e = euclid_gcd_ext(c.p(), c.q());
  if (!is_unit(e.g)) fail(ErrorCode::PreconditionViolated, "cusp pair not coprime");
  QuadElem ginv = e.g.inverse();
  // det = p·s·g⁻¹ + t·g⁻¹·q = g⁻¹(sp + tq) = 1.
  return GroupElement(c.p(), -e.t * ginv, c.q(), e.s * ginv);
}

std::vector<GroupElement> cusp_stabilizer_generators(const Cusp& c) {
  const FieldSpec& f = c.field();
  std::vector<GroupElement> gens;
  gens.push_back(GroupElement::translation(QuadElem(f, 1)));
  if (f.D != 0) gens.push_back(GroupElement::translation(from_basis_coords(f, 0, 1)));
  if (f.is_real) {
    gens.push_back(GroupElement::unit_diag(QuadElem(f, f.unit_a, f.unit_b)));
  }
  if (c.is_infinity()) return gens;
  GroupElement gamma = bezout_to_cusp(c);
  GroupElement gamma_inv = gamma.inverse();
  for (auto& g : gens) g = gamma * g * gamma_inv;
  return gens;
}

GroupElement random_group_element(const FieldSpec& f, int size, unsigned long seed) {
  if (size < 1) fail(ErrorCode::PreconditionViolated, "size must be >= 1");
  std::vector<GroupElement> gens = cusp_stabilizer_generators(Cusp::infinity(f));
  gens.push_back(GroupElement::weyl(f));
  std::mt19937_64 rng(seed);
  int len = 1 + static_cast<int>(rng() % static_cast<unsigned long>(size));
  GroupElement out = GroupElement::identity(f);
  for (int i = 0; i < len; ++i) {
    const GroupElement& g = gens[rng() % gens.size()];
    out = out * (rng() % 2 ? g : g.inverse());
  }
  return out;
}

std::string cusp_to_string(const Cusp& c) {
  if (c.is_infinity()) return "inf";
  return elem_to_string(c.p()) + "/" + elem_to_string(c.q());
}

Cusp parse_cusp(const FieldSpec& f, const std::string& text) {
  std::string s;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  if (s == "inf") return Cusp::infinity(f);
  // "p/q" where p and q may themselves contain '/' inside half-integer
  // coordinates: try every split point. The true split of a canonical string
  // is the unique one with both sides integral; otherwise all parseable
  // splits must agree on the normalized cusp.
  std::set<Cusp> found, integral_found;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '/') continue;
    QuadElem p(f), q(f);
    try {
      p = parse_elem(f, s.substr(0, i));
      q = parse_elem(f, s.substr(i + 1));
    } catch (const Error&) {
      continue;
    }
    if (q.is_zero()) continue;
    Cusp c = Cusp::from_pair(p, q);
    found.insert(c);
    if (is_integral(p) && is_integral(q)) integral_found.insert(c);
  }
  if (integral_found.size() == 1) return *integral_found.begin();
  if (found.empty()) {
    // No slash split works: accept a bare element value (e.g. "0", "1+i").
    try {
      return Cusp::from_value(parse_elem(f, s));
    } catch (const Error&) {
      fail(ErrorCode::ParseError, "not a cusp: '" + text + "'");
    }
  }
  if (found.size() > 1)
    fail(ErrorCode::ParseError, "ambiguous cusp string: '" + text + "'");
  return *found.begin();
}

}  // namespace spinekit

#include "spinekit/field.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

namespace spinekit {

namespace {

using BigFloat = boost::multiprecision::cpp_bin_float_50;

constexpr std::array<int, 8> kSupported = {0, -1, -2, -3, -7, -11, 2, 5};

bool squarefree(int D) {
  int n = std::abs(D);
  for (int k = 2; k * k <= n; ++k) {
    if (n % (k * k) == 0) return false;
  }
  return true;
}

// Positive-integer-coordinate search for the smallest unit > 1.
void find_fundamental_unit(FieldSpec& f) {
  QuadElem best(f);
  bool found = false;
  for (long n = 1; n <= 40 && !found; ++n) {
    for (long m = -80; m <= 80; ++m) {
      QuadElem u = from_basis_coords(f, Rat(m), Rat(n));
      Rat nm = norm(u);
      if (nm != 1 && nm != -1) continue;
      QuadElem cand = sign_embed1(u) > 0 ? u : -u;
      QuadElem shifted = cand - QuadElem(f, 1);
      if (sign_embed1(shifted) <= 0) continue;  // need > 1
      if (!found || sign_embed1(best - cand) > 0) {
        best = cand;
        found = true;
      }
    }
  }
  if (!found) fail(ErrorCode::UnsupportedField, "no fundamental unit found");
  f.unit_a = best.a();
  f.unit_b = best.b();
}

double big_to_double(const BigFloat& v) { return v.convert_to<double>(); }

BigFloat big_rat(const Rat& r) {
  return BigFloat(boost::multiprecision::numerator(r)) /
         BigFloat(boost::multiprecision::denominator(r));
}

}  // namespace

const FieldSpec& make_field(int D) {
  static std::map<int, FieldSpec> registry;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = registry.find(D);
  if (it != registry.end()) return it->second;

  if (!squarefree(D)) fail(ErrorCode::NotSquarefree, "D must be squarefree");
  if (std::find(kSupported.begin(), kSupported.end(), D) == kSupported.end())
    fail(ErrorCode::UnsupportedField, "unsupported field D=" + std::to_string(D));

  FieldSpec f;
  f.D = D;
  f.is_real = D > 0;
  // mod 4 in C++ keeps the sign of the dividend; normalize first.
  f.half_integer_basis = D != 0 && ((D % 4) + 4) % 4 == 1;
  f.euclidean = true;
  auto [pos, inserted] = registry.emplace(D, f);
  if (D > 0) find_fundamental_unit(pos->second);
  return pos->second;
}

QuadElem::QuadElem(const FieldSpec& f, Rat a, Rat b)
    : field_(&f), a_(std::move(a)), b_(std::move(b)) {
  if (f.D == 0) b_ = 0;  // sqrt(0) contributes nothing
}

static void check_same_field(const QuadElem& x, const QuadElem& y) {
  if (x.field().D != y.field().D)
    fail(ErrorCode::FieldMismatch, "elements of different fields");
}

QuadElem QuadElem::operator+(const QuadElem& o) const {
  check_same_field(*this, o);
  return QuadElem(*field_, a_ + o.a_, b_ + o.b_);
}

QuadElem QuadElem::operator-(const QuadElem& o) const {
  check_same_field(*this, o);
  return QuadElem(*field_, a_ - o.a_, b_ - o.b_);
}

QuadElem QuadElem::operator*(const QuadElem& o) const {
  check_same_field(*this, o);
  return QuadElem(*field_, a_ * o.a_ + Rat(field_->D) * b_ * o.b_,
                  a_ * o.b_ + b_ * o.a_);
}

QuadElem QuadElem::operator-() const { return QuadElem(*field_, -a_, -b_); }

QuadElem QuadElem::inverse() const {
  Rat n = norm(*this);
  if (n == 0) fail(ErrorCode::BothZero, "inverse of zero");
  return QuadElem(*field_, a_ / n, -b_ / n);
}

bool QuadElem::operator==(const QuadElem& o) const {
  check_same_field(*this, o);
  return a_ == o.a_ && b_ == o.b_;
}

bool QuadElem::operator<(const QuadElem& o) const {
  check_same_field(*this, o);
  if (a_ != o.a_) return a_ < o.a_;
  return b_ < o.b_;
}

Rat norm(const QuadElem& x) {
  return x.a() * x.a() - Rat(x.field().D) * x.b() * x.b();
}

Rat trace(const QuadElem& x) { return 2 * x.a(); }

QuadElem conj(const QuadElem& x) { return QuadElem(x.field(), x.a(), -x.b()); }

std::complex<double> embed(const QuadElem& x, int which) {
  if (which != 1 && which != 2)
    fail(ErrorCode::PreconditionViolated, "embedding index must be 1 or 2");
  int D = x.field().D;
  if (D >= 0) return {embed_real(x, which), 0.0};
  BigFloat s = sqrt(BigFloat(-D));
  double re = big_to_double(big_rat(x.a()));
  double im = big_to_double(big_rat(x.b()) * s);
  return {re, which == 1 ? im : -im};
}

double embed_real(const QuadElem& x, int which) {
  if (which != 1 && which != 2)
    fail(ErrorCode::PreconditionViolated, "embedding index must be 1 or 2");
  int D = x.field().D;
  if (D < 0) fail(ErrorCode::FieldMismatch, "complex embedding has no real value");
  if (D == 0) return big_to_double(big_rat(x.a()));
  BigFloat s = sqrt(BigFloat(D));
  if (which == 2) s = -s;
  return big_to_double(big_rat(x.a()) + big_rat(x.b()) * s);
}

int sign_embed1(const QuadElem& x) {
  int D = x.field().D;
  if (D < 0) fail(ErrorCode::FieldMismatch, "no real embedding for D < 0");
  const Rat& a = x.a();
  const Rat& b = x.b();
  auto sgn = [](const Rat& r) { return r > 0 ? 1 : (r < 0 ? -1 : 0); };
  if (b == 0) return sgn(a);
  if (a == 0) return sgn(b);
  if ((a > 0) == (b > 0)) return sgn(a);
  // Opposite signs: compare a^2 against D b^2 exactly.
  Rat lhs = a * a, rhs = Rat(D) * b * b;
  if (lhs > rhs) return sgn(a);
  if (lhs < rhs) return sgn(b);
  return 0;  // unreachable for nonzero x, sqrt(D) irrational
}

std::pair<Rat, Rat> basis_coords(const QuadElem& x) {
  if (!x.field().half_integer_basis) return {x.a(), x.b()};
  // omega = (1+sqrt(D))/2, so x = (a - b) + 2b*omega.
  return {x.a() - x.b(), 2 * x.b()};
}

QuadElem from_basis_coords(const FieldSpec& f, const Rat& m, const Rat& n) {
  if (!f.half_integer_basis) return QuadElem(f, m, n);
  return QuadElem(f, m + n / 2, n / 2);
}

bool is_integral(const QuadElem& x) {
  auto [m, n] = basis_coords(x);
  return boost::multiprecision::denominator(m) == 1 &&
         boost::multiprecision::denominator(n) == 1;
}

Int floor_rat(const Rat& r) {
  Int num = boost::multiprecision::numerator(r);
  Int den = boost::multiprecision::denominator(r);
  if (num >= 0) return num / den;
  return -((-num + den - 1) / den);
}

Rat abs_rat(const Rat& r) { return r < 0 ? Rat(-r) : r; }

static Int round_rat(const Rat& r) { return floor_rat(r + Rat(1, 2)); }

QuadElem round_to_integral(const QuadElem& x) {
  auto [m, n] = basis_coords(x);
  return from_basis_coords(x.field(), Rat(round_rat(m)), Rat(round_rat(n)));
}

bool is_unit(const QuadElem& x) {
  if (!is_integral(x)) return false;
  Rat n = norm(x);
  return n == 1 || n == -1;
}

std::vector<QuadElem> finite_units(const FieldSpec& f) {
  if (f.is_real) fail(ErrorCode::UnsupportedField, "infinite unit group");
  QuadElem one(f, 1);
  std::vector<QuadElem> out = {one, -one};
  if (f.D == -1) {
    QuadElem i(f, Rat(0), Rat(1));
    out.push_back(i);
    out.push_back(-i);
  } else if (f.D == -3) {
    QuadElem w = from_basis_coords(f, Rat(0), Rat(1));  // (1+sqrt(-3))/2
    QuadElem w2 = w * w;                                // w - 1
    out.insert(out.end(), {w, -w, w2, -w2});
  }
  return out;
}

QuadElem canonical_associate(const QuadElem& x) {
  if (x.is_zero()) return x;
  const FieldSpec& f = x.field();
  if (!f.is_real) {
    QuadElem best = x;
    bool first = true;
    for (const QuadElem& u : finite_units(f)) {
      QuadElem cand = x * u;
      auto [cm, cn] = basis_coords(cand);
      auto [bm, bn] = basis_coords(best);
      if (first || cm > bm || (cm == bm && cn > bn)) {
        best = cand;
        first = false;
      }
    }
    return best;
  }
  QuadElem eps(f, f.unit_a, f.unit_b);
  QuadElem eps_inv = eps.inverse();
  QuadElem u4 = eps * eps * eps * eps;
  QuadElem y = x;
  for (int guard = 0; guard < 4096; ++guard) {
    // |ratio| >= 1 iff a*b >= 0; |ratio| < eps^2 iff y^2 < eps^4 * conj(y^2)
    // in the first embedding.
    bool ge_one = y.a() * y.b() >= 0;
    if (!ge_one) {
      y = y * eps;
      continue;
    }
    QuadElem c = y * y;
    if (sign_embed1(c - u4 * conj(c)) >= 0) {
      y = y * eps_inv;
      continue;
    }
    break;
  }
  if (sign_embed1(y) < 0) y = -y;
  return y;
}

namespace {

// Quotient candidates around the exact quotient; the minimizer's remainder
// norm is < |norm(divisor)| in every supported field (covering radius < 1).
QuadElem best_quotient(const QuadElem& q_exact) {
  const FieldSpec& f = q_exact.field();
  auto [cm, cn] = basis_coords(q_exact);
  Int m0 = floor_rat(cm), n0 = floor_rat(cn);
  QuadElem best(f);
  Rat best_norm;
  bool first = true;
  for (Int dm = -1; dm <= 2; ++dm) {
    for (Int dn = -1; dn <= 2; ++dn) {
      QuadElem cand = from_basis_coords(f, Rat(m0 + dm), Rat(n0 + dn));
      Rat r = abs_rat(norm(q_exact - cand));
      if (first || r < best_norm) {
        best = cand;
        best_norm = r;
        first = false;
      }
      if (f.D == 0) break;  // single coordinate
    }
  }
  return best;
}

}  // namespace

QuadElem euclid_gcd(const QuadElem& x, const QuadElem& y) {
  return euclid_gcd_ext(x, y).g;
}

ExtGcd euclid_gcd_ext(const QuadElem& x, const QuadElem& y) {
  check_same_field(x, y);
  if (x.is_zero() && y.is_zero()) fail(ErrorCode::BothZero, "gcd(0, 0)");
  if (!is_integral(x) || !is_integral(y))
    fail(ErrorCode::NonIntegerInput, "gcd needs algebraic integers");
  const FieldSpec& f = x.field();
  QuadElem r0 = x, r1 = y;
  QuadElem s0(f, 1), s1(f, 0);
  QuadElem t0(f, 0), t1(f, 1);
  while (!r1.is_zero()) {
    QuadElem q = best_quotient(r0 / r1);
    QuadElem r2 = r0 - q * r1;
    if (!(abs_rat(norm(r2)) < abs_rat(norm(r1))))
      fail(ErrorCode::UnsupportedField, "euclidean step failed to reduce");
    r0 = r1;
    r1 = r2;
    QuadElem s2 = s0 - q * s1;
    s0 = s1;
    s1 = s2;
    QuadElem t2 = t0 - q * t1;
    t0 = t1;
    t1 = t2;
  }
  return {r0, s0, t0};
}

std::vector<QuadElem> enumerate_bounded_norm(
    const FieldSpec& f, const Rat& bound,
    std::optional<std::pair<double, double>> per_embedding_bounds) {
  if (bound <= 0) return {};
  const double B = big_to_double(big_rat(bound));
  std::set<QuadElem> out;
  auto push = [&](const QuadElem& x) {
    if (abs_rat(norm(x)) > bound) return;
    if (per_embedding_bounds) {
      auto [b1, b2] = *per_embedding_bounds;
      if (f.D < 0) {
        if (std::abs(embed(x, 1)) > b1 * (1 + 1e-12) + 1e-300) return;
      } else {
        if (std::abs(embed_real(x, 1)) > b1 * (1 + 1e-12) + 1e-300) return;
        if (std::abs(embed_real(x, 2)) > b2 * (1 + 1e-12) + 1e-300) return;
      }
      out.insert(x);
      return;
    }
    if (x.is_zero()) return;
    out.insert(canonical_associate(x));
  };

  if (f.D == 0) {
    long nmax = (long)std::floor(std::sqrt(B) + 1e-9);
    for (long v = -nmax; v <= nmax; ++v) push(QuadElem(f, v));
  } else if (f.D < 0) {
    // |m + n*omega|^2 <= B boxes the coordinates.
    double wi = f.half_integer_basis ? std::sqrt(-f.D) / 2 : std::sqrt(-f.D);
    double wr = f.half_integer_basis ? 0.5 : 0.0;
    long nmax = (long)std::floor(std::sqrt(B) / wi + 1);
    for (long n = -nmax; n <= nmax; ++n) {
      double rem = B - wi * wi * n * n;
      if (rem < -1e-9) continue;
      double r = std::sqrt(std::max(rem, 0.0));
      long mlo = (long)std::floor(-wr * n - r) - 1;
      long mhi = (long)std::ceil(-wr * n + r) + 1;
      for (long m = mlo; m <= mhi; ++m)
        push(from_basis_coords(f, Rat(m), Rat(n)));
    }
  } else {
    double eps1 = embed_real(QuadElem(f, f.unit_a, f.unit_b), 1);
    double B1, B2;
    if (per_embedding_bounds) {
      B1 = per_embedding_bounds->first;
      B2 = per_embedding_bounds->second;
    } else {
      // A canonical class representative satisfies |x1| < eps*sqrt(B),
      // |x2| <= sqrt(B).
      B1 = eps1 * std::sqrt(B) * (1 + 1e-9);
      B2 = std::sqrt(B) * (1 + 1e-9);
    }
    for (const QuadElem& x : integers_in_box(f, -B1, B1, -B2, B2)) push(x);
  }
  return {out.begin(), out.end()};
}

std::vector<QuadElem> integers_in_box(const FieldSpec& f, double lo1, double hi1,
                                      double lo2, double hi2) {
  if (!f.is_real) fail(ErrorCode::UnsupportedField, "box search needs a real field");
  double w1 = f.half_integer_basis ? (1 + std::sqrt(f.D)) / 2 : std::sqrt(f.D);
  double w2 = f.half_integer_basis ? (1 - std::sqrt(f.D)) / 2 : -std::sqrt(f.D);
  double dw = w1 - w2;  // sqrt(D) or 2*sqrt(D), positive
  const double slack = 1e-9;
  long nlo = (long)std::floor((lo1 - hi2) / dw) - 1;
  long nhi = (long)std::ceil((hi1 - lo2) / dw) + 1;
  std::vector<QuadElem> out;
  for (long n = nlo; n <= nhi; ++n) {
    double mlo = std::max(lo1 - n * w1, lo2 - n * w2) - slack;
    double mhi = std::min(hi1 - n * w1, hi2 - n * w2) + slack;
    for (long m = (long)std::ceil(mlo); m <= (long)std::floor(mhi); ++m) {
      QuadElem x = from_basis_coords(f, Rat(m), Rat(n));
      double x1 = embed_real(x, 1), x2 = embed_real(x, 2);
      if (x1 < lo1 - slack || x1 > hi1 + slack) continue;
      if (x2 < lo2 - slack || x2 > hi2 + slack) continue;
      out.push_back(x);
    }
  }
  return out;
}

std::string rat_to_string(const Rat& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

std::string elem_to_string(const QuadElem& x) {
  const Rat& a = x.a();
  const Rat& b = x.b();
  if (b == 0) return rat_to_string(a);
  std::string surd = "sqrt(" + std::to_string(x.field().D) + ")";
  std::string bpart;
  Rat babs = abs_rat(b);
  if (babs == 1)
    bpart = surd;
  else
    bpart = rat_to_string(babs) + "*" + surd;
  if (a == 0) return (b < 0 ? "-" : "") + bpart;
  return rat_to_string(a) + (b < 0 ? "-" : "+") + bpart;
}

namespace {

// Grammar: elem := term (('+'|'-') term)? ; term := rational | [rational'*']surd
// surd := "sqrt(" integer ")" | "i" (D = -1 only). Whitespace ignored.
struct ElemParser {
  const FieldSpec& f;
  std::string s;
  size_t pos = 0;

  explicit ElemParser(const FieldSpec& field, const std::string& text) : f(field) {
    for (char c : text)
      if (!std::isspace((unsigned char)c)) s.push_back(c);
  }

  bool eof() const { return pos >= s.size(); }
  char peek() const { return eof() ? '\0' : s[pos]; }

  std::optional<Rat> rational() {
    size_t start = pos;
    if (peek() == '+' || peek() == '-') ++pos;
    size_t digits = pos;
    while (!eof() && std::isdigit((unsigned char)s[pos])) ++pos;
    if (pos == digits) {
      pos = start;
      return std::nullopt;
    }
    Int num(s.substr(start, pos - start));
    Int den = 1;
    if (peek() == '/') {
      size_t save = pos;
      ++pos;
      size_t dstart = pos;
      while (!eof() && std::isdigit((unsigned char)s[pos])) ++pos;
      if (pos == dstart) {
        pos = save;  // the '/' belongs to an outer context
      } else {
        den = Int(s.substr(dstart, pos - dstart));
        if (den == 0) {
          pos = start;
          return std::nullopt;
        }
      }
    }
    return Rat(num, den);
  }

  bool surd() {
    if (f.D == -1 && peek() == 'i') {
      ++pos;
      return true;
    }
    const std::string kw = "sqrt(";
    if (s.compare(pos, kw.size(), kw) != 0) return false;
    size_t save = pos;
    pos += kw.size();
    size_t start = pos;
    if (peek() == '-') ++pos;
    while (!eof() && std::isdigit((unsigned char)s[pos])) ++pos;
    if (pos == start || peek() != ')') {
      pos = save;
      return false;
    }
    int d = std::stoi(s.substr(start, pos - start));
    ++pos;  // ')'
    if (d != f.D) fail(ErrorCode::ParseError, "sqrt argument does not match field");
    return true;
  }

  // Returns (rational part, surd coefficient) of one signed term.
  std::optional<std::pair<Rat, Rat>> term() {
    size_t start = pos;
    int sign = 1;
    if (peek() == '+' || peek() == '-') {
      if (peek() == '-') sign = -1;
      ++pos;
    }
    if (surd()) return std::make_pair(Rat(0), Rat(sign));
    auto r = rational();
    if (!r) {
      pos = start;
      return std::nullopt;
    }
    if (peek() == '*') {
      size_t save = pos;
      ++pos;
      if (surd()) return std::make_pair(Rat(0), Rat(sign) * *r);
      pos = save;
    }
    // Juxtaposed surd without '*', e.g. "2sqrt(2)": not accepted; a bare
    // rational term ends here.
    return std::make_pair(Rat(sign) * *r, Rat(0));
  }

  std::optional<QuadElem> parse() {
    auto t1 = term();
    if (!t1) return std::nullopt;
    Rat a = t1->first, b = t1->second;
    if (!eof() && (peek() == '+' || peek() == '-')) {
      if (t1->second != 0) return std::nullopt;  // rational part comes first
      auto t2 = term();
      if (!t2 || t2->first != 0) return std::nullopt;  // surd part second
      b = t2->second;
    }
    if (!eof()) return std::nullopt;
    if (f.D == 0 && b != 0) return std::nullopt;
    return QuadElem(f, a, b);
  }
};

}  // namespace

QuadElem parse_elem(const FieldSpec& f, const std::string& text) {
  ElemParser p(f, text);
  auto r = p.parse();
  if (!r) fail(ErrorCode::ParseError, "cannot parse element '" + text + "'");
  return *r;
}

}  // namespace spinekit

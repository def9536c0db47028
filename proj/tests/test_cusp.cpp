#include <functional>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "spinekit/cusp.hpp"
#include "spinekit/errors.hpp"

using namespace spinekit;

namespace {

const int kAllD[] = {0, -1, -2, -3, -7, -11, 2, 5};

QuadElem rand_elem(const FieldSpec& f, std::mt19937_64& rng, int span = 6) {
  auto pick = [&] { return Rat(static_cast<long>(rng() % (2 * span + 1)) - span); };
  return from_basis_coords(f, pick(), f.D == 0 ? Rat(0) : pick());
}

Cusp rand_cusp(const FieldSpec& f, std::mt19937_64& rng) {
  for (;;) {
    QuadElem p = rand_elem(f, rng), q = rand_elem(f, rng);
    if (p.is_zero() && q.is_zero()) continue;
    return Cusp::from_pair(p, q);
  }
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;  // sentinel: "did not throw"
}

}  // namespace

TEST_SUITE("cusp") {

TEST_CASE("normalization: scaling, gcd reduction, idempotence") {
  const FieldSpec& q0 = make_field(0);
  CHECK(normalize_cusp(QuadElem(q0, 2), QuadElem(q0, 0)) == Cusp::infinity(q0));
  CHECK(normalize_cusp(QuadElem(q0, 0), QuadElem(q0, 5)) ==
        normalize_cusp(QuadElem(q0, 0), QuadElem(q0, 1)));

  const FieldSpec& zi = make_field(-1);
  QuadElem one_i(zi, 1, 1);  // 1+i
  CHECK(normalize_cusp(QuadElem(zi, 2) * one_i, QuadElem(zi, 2)) ==
        normalize_cusp(one_i, QuadElem(zi, 1)));

  std::mt19937_64 rng(7001);
  for (int d : kAllD) {
    const FieldSpec& f = make_field(d);
    for (int it = 0; it < 50; ++it) {
      Cusp c = rand_cusp(f, rng);
      CHECK(normalize_cusp(c.p(), c.q()) == c);  // idempotent
      QuadElem s = rand_elem(f, rng, 4);
      if (s.is_zero()) continue;
      CHECK(Cusp::from_pair(c.p() * s, c.q() * s) == c);  // scalar invariance
    }
  }
}

TEST_CASE("normalization: canonical q is unit-class stable") {
  std::mt19937_64 rng(7002);
  for (int d : kAllD) {
    const FieldSpec& f = make_field(d);
    std::vector<QuadElem> units;
    if (f.is_real) {
      QuadElem eps(f, f.unit_a, f.unit_b);
      units = {QuadElem(f, 1), -QuadElem(f, 1), eps, -eps, eps * eps, eps.inverse()};
    } else {
      units = finite_units(f);
    }
    for (int it = 0; it < 30; ++it) {
      Cusp c = rand_cusp(f, rng);
      for (const QuadElem& u : units)
        CHECK(Cusp::from_pair(c.p() * u, c.q() * u) == c);
      if (!c.is_infinity()) CHECK(canonical_associate(c.q()) == c.q());
    }
  }
}

TEST_CASE("normalization errors") {
  const FieldSpec& f = make_field(0);
  CHECK(code_of([&] { normalize_cusp(QuadElem(f, 0), QuadElem(f, 0)); }) ==
        ErrorCode::BothZero);
  CHECK(code_of([&] { normalize_cusp(QuadElem(f, Rat(1, 2), Rat(0)), QuadElem(f, 1)); }) ==
        ErrorCode::NonIntegerInput);
  // from_pair clears denominators instead of rejecting.
  CHECK(Cusp::from_pair(QuadElem(f, Rat(1, 2), 0), QuadElem(f, 1)) ==
        Cusp::from_pair(QuadElem(f, 1), QuadElem(f, 2)));
}

TEST_CASE("cusp_delta basic values") {
  const FieldSpec& q0 = make_field(0);
  Cusp inf = Cusp::infinity(q0);
  Cusp zero = Cusp::from_pair(QuadElem(q0, 0), QuadElem(q0, 1));
  CHECK(cusp_delta(inf, zero) == QuadElem(q0, 1));
  CHECK(cusp_delta(zero, zero).is_zero());

  const FieldSpec& r2 = make_field(2);
  QuadElem sqrt2(r2, 0, 1);
  Cusp c1 = Cusp::from_pair(QuadElem(r2, 1), sqrt2);
  QuadElem d = cusp_delta(c1, Cusp::infinity(r2));
  CHECK(abs_rat(norm(d)) == 2);

  Cusp c01 = Cusp::from_pair(QuadElem(q0, 0), QuadElem(q0, 1));
  Cusp c11 = Cusp::from_pair(QuadElem(q0, 1), QuadElem(q0, 1));
  CHECK(cusp_delta(c01, c11) == QuadElem(q0, -1));
}

TEST_CASE("delta vanishes exactly on equal cusps") {
  std::mt19937_64 rng(7003);
  for (int d : kAllD) {
    const FieldSpec& f = make_field(d);
    for (int it = 0; it < 25; ++it) {
      Cusp c1 = rand_cusp(f, rng), c2 = rand_cusp(f, rng);
      CHECK(cusp_delta(c1, c2).is_zero() == (c1 == c2));
    }
  }
}

TEST_CASE("act_cusp basic moves") {
  const FieldSpec& f = make_field(0);
  Cusp inf = Cusp::infinity(f);
  Cusp zero = Cusp::from_pair(QuadElem(f, 0), QuadElem(f, 1));
  GroupElement s = GroupElement::weyl(f);
  GroupElement t = GroupElement::translation(QuadElem(f, 1));
  CHECK(act_cusp(s, inf) == zero);
  CHECK(act_cusp(s, zero) == inf);
  CHECK(act_cusp(t, zero) == Cusp::from_pair(QuadElem(f, 1), QuadElem(f, 1)));
  GroupElement g(QuadElem(f, 2), QuadElem(f, 1), QuadElem(f, 1), QuadElem(f, 1));
  CHECK(act_cusp(g, inf) == Cusp::from_pair(QuadElem(f, 2), QuadElem(f, 1)));
}

TEST_CASE("act_cusp is a group action (1000 random triples)") {
  std::mt19937_64 rng(7004);
  for (int d : kAllD) {
    const FieldSpec& f = make_field(d);
    for (int it = 0; it < 125; ++it) {
      GroupElement g = random_group_element(f, 6, rng());
      GroupElement h = random_group_element(f, 6, rng());
      Cusp c = rand_cusp(f, rng);
      CHECK(act_cusp(g * h, c) == act_cusp(g, act_cusp(h, c)));
      CHECK(act_cusp(GroupElement::identity(f), c) == c);
      CHECK(act_cusp(g.inverse(), act_cusp(g, c)) == c);
    }
  }
}

TEST_CASE("group element determinant is enforced") {
  const FieldSpec& f = make_field(0);
  CHECK(code_of([&] {
          GroupElement(QuadElem(f, 1), QuadElem(f, 0), QuadElem(f, 0), QuadElem(f, 2));
        }) == ErrorCode::PreconditionViolated);
}

TEST_CASE("bruhat factorization examples") {
  const FieldSpec& f = make_field(0);
  BruhatFactors bw = bruhat_decompose(GroupElement::weyl(f));
  CHECK(!bw.in_parabolic);
  CHECK(bw.u == GroupElement::identity(f));
  CHECK(bw.p == GroupElement::identity(f));

  GroupElement g1(QuadElem(f, 1), QuadElem(f, 0), QuadElem(f, 1), QuadElem(f, 1));
  BruhatFactors b1 = bruhat_decompose(g1);
  CHECK(b1.u == GroupElement::translation(QuadElem(f, 1)));
  CHECK(b1.p == GroupElement(QuadElem(f, 1), QuadElem(f, 1), QuadElem(f, 0), QuadElem(f, 1)));
  CHECK(b1.u * b1.w * b1.p == g1);

  GroupElement g2(QuadElem(f, 2), QuadElem(f, 1), QuadElem(f, 1), QuadElem(f, 1));
  BruhatFactors b2 = bruhat_decompose(g2);
  CHECK(b2.u == GroupElement::translation(QuadElem(f, 2)));
  CHECK(b2.u * b2.w * b2.p == g2);

  BruhatFactors bp = bruhat_decompose(GroupElement::translation(QuadElem(f, 3)));
  CHECK(bp.in_parabolic);
}

TEST_CASE("bruhat reassembly is exact (1000 random elements)") {
  std::mt19937_64 rng(7005);
  int done = 0;
  while (done < 1000) {
    const FieldSpec& f = make_field(kAllD[rng() % 8]);
    GroupElement g = random_group_element(f, 8, rng());
    if (g.c.is_zero()) continue;
    BruhatFactors b = bruhat_decompose(g);
    CHECK(!b.in_parabolic);
    CHECK(b.u * b.w * b.p == g);
    ++done;
  }
}

TEST_CASE("norm of delta is SL2(O)-invariant (1000 trials)") {
  std::mt19937_64 rng(7006);
  int done = 0;
  while (done < 1000) {
    const FieldSpec& f = make_field(kAllD[rng() % 8]);
    Cusp c1 = rand_cusp(f, rng), c2 = rand_cusp(f, rng);
    GroupElement g = random_group_element(f, 8, rng());
    CHECK(abs_rat(norm(cusp_delta(act_cusp(g, c1), act_cusp(g, c2)))) ==
          abs_rat(norm(cusp_delta(c1, c2))));
    ++done;
  }
}

TEST_CASE("stabilizer generators fix their cusp and are integral") {
  std::mt19937_64 rng(7007);
  for (int d : kAllD) {
    const FieldSpec& f = make_field(d);
    std::vector<Cusp> cusps = {Cusp::infinity(f),
                               Cusp::from_pair(QuadElem(f, 0), QuadElem(f, 1))};
    for (int it = 0; it < 10; ++it) cusps.push_back(rand_cusp(f, rng));
    for (const Cusp& c : cusps) {
      auto gens = cusp_stabilizer_generators(c);
      CHECK(!gens.empty());
      for (const GroupElement& g : gens) {
        CHECK(act_cusp(g, c) == c);
        CHECK(is_integral(g.a));
        CHECK(is_integral(g.b));
        CHECK(is_integral(g.c));
        CHECK(is_integral(g.d));
      }
    }
  }
}

TEST_CASE("stabilizer generator sets match the expected shapes") {
  const FieldSpec& q0 = make_field(0);
  auto gz = cusp_stabilizer_generators(Cusp::infinity(q0));
  REQUIRE(gz.size() == 1);
  CHECK(gz[0] == GroupElement::translation(QuadElem(q0, 1)));

  const FieldSpec& r2 = make_field(2);
  auto gr = cusp_stabilizer_generators(Cusp::infinity(r2));
  REQUIRE(gr.size() == 3);
  CHECK(gr[0] == GroupElement::translation(QuadElem(r2, 1)));
  CHECK(gr[1] == GroupElement::translation(QuadElem(r2, 0, 1)));
  QuadElem eps(r2, 1, 1);  // 1+sqrt(2)
  CHECK(gr[2] == GroupElement::unit_diag(eps));

  // Cusp 0 over Q: a unipotent lower-triangular translation conjugate.
  Cusp zero = Cusp::from_pair(QuadElem(q0, 0), QuadElem(q0, 1));
  auto g0 = cusp_stabilizer_generators(zero);
  REQUIRE(g0.size() == 1);
  CHECK(g0[0].b.is_zero());
  CHECK(g0[0].a == QuadElem(q0, 1));
  CHECK(g0[0].d == QuadElem(q0, 1));
  CHECK(abs_rat(norm(g0[0].c)) == 1);
}

TEST_CASE("bezout_to_cusp sends infinity to the cusp with integral det-1 matrix") {
  std::mt19937_64 rng(7008);
  for (int d : kAllD) {
    const FieldSpec& f = make_field(d);
    for (int it = 0; it < 25; ++it) {
      Cusp c = rand_cusp(f, rng);
      GroupElement g = bezout_to_cusp(c);
      CHECK(act_cusp(g, Cusp::infinity(f)) == c);
      CHECK(is_integral(g.a));
      CHECK(is_integral(g.b));
      CHECK(is_integral(g.c));
      CHECK(is_integral(g.d));
    }
  }
}

TEST_CASE("random_group_element is deterministic in the seed") {
  for (int d : kAllD) {
    const FieldSpec& f = make_field(d);
    GroupElement a = random_group_element(f, 7, 42);
    GroupElement b = random_group_element(f, 7, 42);
    CHECK(a == b);
    bool varied = false;
    for (unsigned long s = 0; s < 16 && !varied; ++s)
      varied = !(random_group_element(f, 7, s) == a);
    CHECK(varied);
  }
}

TEST_CASE("cusp strings round-trip") {
  const FieldSpec& q0 = make_field(0);
  CHECK(cusp_to_string(Cusp::infinity(q0)) == "inf");
  CHECK(parse_cusp(q0, "inf") == Cusp::infinity(q0));
  Cusp zero = Cusp::from_pair(QuadElem(q0, 0), QuadElem(q0, 1));
  CHECK(cusp_to_string(zero) == "0/1");
  CHECK(parse_cusp(q0, "0/1") == zero);
  CHECK(parse_cusp(q0, "0") == zero);  // bare value accepted

  const FieldSpec& r2 = make_field(2);
  Cusp c = parse_cusp(r2, "1/sqrt(2)");
  CHECK(c == Cusp::from_pair(QuadElem(r2, 1), QuadElem(r2, 0, 1)));

  std::mt19937_64 rng(7009);
  for (int d : kAllD) {
    const FieldSpec& f = make_field(d);
    for (int it = 0; it < 40; ++it) {
      Cusp x = rand_cusp(f, rng);
      CHECK(parse_cusp(f, cusp_to_string(x)) == x);
    }
  }
}

TEST_CASE("cusp strings with half-integer coordinates round-trip") {
  const FieldSpec& r5 = make_field(5);
  QuadElem omega = from_basis_coords(r5, 0, 1);  // (1+sqrt(5))/2
  Cusp c = Cusp::from_pair(omega, QuadElem(r5, 1));
  Cusp back = parse_cusp(r5, cusp_to_string(c));
  CHECK(back == c);
}

TEST_CASE("cusp parse errors") {
  const FieldSpec& q0 = make_field(0);
  CHECK(code_of([&] { parse_cusp(q0, "1/2/3"); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { parse_cusp(q0, "walnut"); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { parse_cusp(q0, ""); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { parse_cusp(q0, "1/0"); }) == ErrorCode::ParseError);
  const FieldSpec& zi = make_field(-1);
  CHECK(code_of([&] { parse_cusp(zi, "sqrt(2)/1"); }) == ErrorCode::ParseError);
}

TEST_CASE("cusp ordering puts infinity first and is strict-weak") {
  std::mt19937_64 rng(7010);
  for (int d : kAllD) {
    const FieldSpec& f = make_field(d);
    std::set<Cusp> s;
    s.insert(Cusp::infinity(f));
    for (int it = 0; it < 30; ++it) s.insert(rand_cusp(f, rng));
    CHECK(*s.begin() == Cusp::infinity(f));
    CHECK(s.count(Cusp::infinity(f)) == 1);
  }
}

}  // TEST_SUITE

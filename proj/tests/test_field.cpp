#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mumford/field.hpp>

#include <random>
#include <sstream>

using namespace mf;

static std::mt19937_64 rng(20260823u);

static Qp random_unit(const FieldContext& F) {
    // unit part: nonzero residue mod p
    while (true) {
        uint64_t a = rng() % F.ppow[F.W];
        uint64_t b = (F.mu == 2) ? rng() % F.ppow[F.W] : 0;
        if (a % F.p != 0 || b % F.p != 0) return Qp::unit_from_residues(a, b, F.W);
    }
}

TEST_CASE("ring identities at fixed precision") {
    ScopedField sf(5, 2, 12);
    Qp p = Qp(5);
    CHECK(((Qp(1) + p) * (Qp(1) - p)).eq(Qp(1) - p * p));
    for (int i = 0; i < 25; i++) {
        Qp x = random_unit(ctx());
        CHECK((x / x).eq(Qp(1)));
        CHECK((x * x.inv()).eq(Qp(1)));
    }
}

TEST_CASE("digit arithmetic oracle: 3 + 2 = 5 at O(5^8)") {
    ScopedField sf(5, 1, 8, 0);
    Qp x(3), y(2);
    Qp s = x + y;
    CHECK(s.v == 1);
    CHECK(s.N == 8);
    // unit part is exactly 1
    CHECK(s.a == 1);
    CHECK(s.serialize() == "5^1 * (1) + O(5^8)");
}

TEST_CASE("valuation laws") {
    ScopedField sf(7, 2, 10);
    for (int i = 0; i < 40; i++) {
        Qp x = random_unit(ctx()) * Qp::pow_p((int)(rng() % 5) - 2);
        Qp y = random_unit(ctx()) * Qp::pow_p((int)(rng() % 5) - 2);
        CHECK((x * y).v == x.v + y.v);
        Qp s = x + y;
        CHECK(s.v >= std::min(x.v, y.v));
        if (x.v != y.v) CHECK(s.v == std::min(x.v, y.v));
    }
}

TEST_CASE("frobenius is the order-mu automorphism fixing Q_p") {
    ScopedField sf(5, 2, 12);
    Qp c(17);          // prime-field element
    CHECK(frobenius(c).eq(c));
    for (int i = 0; i < 20; i++) {
        Qp x = random_unit(ctx());
        Qp y = random_unit(ctx());
        CHECK(frobenius(frobenius(x)).eq(x));
        CHECK(frobenius(x * y).eq(frobenius(x) * frobenius(y)));
        CHECK(frobenius(x + y).eq(frobenius(x) + frobenius(y)));
    }
    // Teichmueller generator: sigma(omega) = omega^p (Hensel-lift characterization:
    // omega is the unique (q-1)-st root of unity with the given reduction)
    Qp w = Qp::gen();                 // sqrt of the nonresidue
    Qp om = teichmuller(Qp(2) + w);   // some residue generator lift
    CHECK(frobenius(om).eq(om.pow(5)));
    CHECK(om.pow(24).eq(Qp(1)));      // q - 1 = 24 torsion
}

TEST_CASE("log/exp") {
    ScopedField sf(5, 2, 12);
    CHECK(plog(Qp(1)).is_zero());
    Qp om = teichmuller(Qp(2));
    CHECK(plog(om).is_zero());

    // exp(log(1+p)) = 1+p within the documented convergence bound
    Qp z = Qp(1) + Qp(5);
    Qp back = pexp(plog(z));
    CHECK(back.eq(z, 12 - 12 / 4));   // M - floor(M/(p-1)) digit bound

    // homomorphism on units, default (Iwasawa) branch: log(p) = 0
    CHECK(plog(Qp(5)).is_zero());
    for (int i = 0; i < 15; i++) {
        Qp x = random_unit(ctx());
        Qp y = random_unit(ctx());
        CHECK(plog(x * y).eq(plog(x) + plog(y), 10));
        CHECK(frobenius(plog(x)).eq(plog(frobenius(x)), 10));
    }
}

TEST_CASE("nonzero branch parameter shifts log by valuation") {
    ScopedField sf(5, 2, 12);
    ctx_mut().set_branch(Qp(3));
    CHECK(plog(Qp(5)).eq(Qp(3)));
    Qp x = Qp(25) * (Qp(1) + Qp(5));
    CHECK(plog(x).eq(Qp(6) + plog(Qp(1) + Qp(5)), 10));
}

TEST_CASE("square roots in the quadratic extension") {
    ScopedField sf(5, 2, 12);
    // -1 is a square mod 5 (2^2 = 4 = -1): sqrt in Q_5
    Qp r = psqrt(Qp(-1));
    CHECK((r * r).eq(Qp(-1)));
    // the nonresidue has the generator as root
    Qp w = Qp::gen();
    Qp nr = w * w;
    Qp s = psqrt(nr);
    CHECK((s * s).eq(nr));
    for (int i = 0; i < 10; i++) {
        Qp x = random_unit(ctx());
        Qp y = psqrt(x * x);
        CHECK((y * y).eq(x * x));
    }
}

TEST_CASE("serialization round-trips bit-exactly") {
    ScopedField sf(5, 2, 12);
    for (int i = 0; i < 30; i++) {
        Qp x = random_unit(ctx()) * Qp::pow_p((int)(rng() % 7) - 3);
        std::string s = x.serialize();
        Qp y = Qp::parse(s);
        CHECK(y.v == x.v);
        CHECK(y.N == x.N);
        CHECK(y.a == x.a);
        CHECK(y.b == x.b);
        CHECK(y.serialize() == s);
    }
    Qp z = Qp::zero_at(9);
    CHECK(Qp::parse(z.serialize()).serialize() == z.serialize());
}

TEST_CASE("precision ledger: declared output precision is a lower bound") {
    // run an expression on truncated inputs and on full-precision inputs;
    // the results must agree at the truncated run's declared precision
    ScopedField sf(5, 2, 16, 0);
    for (int i = 0; i < 10; i++) {
        Qp x = random_unit(ctx());
        Qp y = random_unit(ctx());
        auto expr = [](const Qp& u, const Qp& w) {
            return (u * w + u.inv()) / (w * w + Qp(5)) - frobenius(u) * Qp::pow_p(1);
        };
        Qp lo = expr(x.truncate(12), y.truncate(12));
        Qp hi = expr(x, y);
        CHECK(hi.eq(lo, lo.N));
        CHECK(lo.N >= 12 - 2);  // tame expression: small bounded loss
    }
}

TEST_CASE("division by zero-at-precision reports a precision error") {
    ScopedField sf(5, 1, 6);
    Qp z = Qp::zero_at(6);
    CHECK_THROWS_AS((void)(Qp(1) / z), PrecisionError);
}

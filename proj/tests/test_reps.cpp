#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mumford/reps.hpp>

#include <random>

using namespace mf;

static std::mt19937_64 rng(909090u);

static Qp rnd_unitish() {
    const FieldContext& F = ctx();
    return Qp::unit_from_residues(1 + rng() % (F.ppow[F.W] - 1), rng() % F.ppow[F.W], F.W);
}

static MatQ rnd_gl2() {
    while (true) {
        MatQ g(2, 2);
        for (int i = 0; i < 2; i++)
            for (int j = 0; j < 2; j++) g(i, j) = Qp((long)(rng() % 625));
        if (!det(g).is_zero()) return g;
    }
}

static VecQ rnd_poly(int n) {
    VecQ v(n + 1);
    for (int i = 0; i <= n; i++) v(i) = Qp((long)(rng() % 3125) - 1500);
    return v;
}

TEST_CASE("polynomial helpers") {
    ScopedField sf(5, 2, 12);
    // (1 + X)^2 = 1 + 2X + X^2
    VecQ a(2); a << Qp(1), Qp(1);
    VecQ sq = poly_pow(a, 2);
    REQUIRE(sq.size() == 3);
    CHECK(sq(0).eq(Qp(1)));
    CHECK(sq(1).eq(Qp(2)));
    CHECK(sq(2).eq(Qp(1)));
    Qp x(7);
    CHECK(poly_eval(sq, x).eq((Qp(1) + x) * (Qp(1) + x)));
}

TEST_CASE("substitution action: identity and anti-homomorphism") {
    ScopedField sf(5, 2, 12);
    for (int n : {2, 4}) {
        MatQ I = rho_n(MatQ::Identity(2, 2), n);
        CHECK(rank(MatQ(I - MatQ::Identity(n + 1, n + 1))) == 0);
        for (int t = 0; t < 6; t++) {
            MatQ g = rnd_gl2(), h = rnd_gl2();
            MatQ lhs = rho_n(g, n) * rho_n(h, n);
            MatQ rhs = rho_n(MatQ(h * g), n);
            for (int i = 0; i <= n; i++)
                for (int j = 0; j <= n; j++) CHECK(lhs(i, j).eq(rhs(i, j), 9));
        }
    }
}

TEST_CASE("substitution really substitutes") {
    ScopedField sf(5, 2, 12);
    int n = 4;
    for (int t = 0; t < 6; t++) {
        MatQ g = rnd_gl2();
        VecQ P = rnd_poly(n);
        VecQ Q = rho_n(g, n) * P;
        Qp z = rnd_unitish();
        Qp den = g(1, 0) * z + g(1, 1);
        Qp lhs = poly_eval(Q, z);
        Qp rhs = den.pow(n) * poly_eval(P, act_point(g, z));
        CHECK(lhs.eq(rhs, 8));
    }
}

TEST_CASE("invariant pairing: orthogonality pattern and equivariance") {
    ScopedField sf(5, 2, 12);
    for (int n : {2, 4}) {
        MatQ J = pairing_matrix(n);
        for (int i = 0; i <= n; i++)
            for (int j = 0; j <= n; j++)
                if (i + j != n) CHECK(J(i, j).is_zero());
        for (int t = 0; t < 6; t++) {
            MatQ g = rnd_gl2();
            VecQ P = rnd_poly(n), Q = rnd_poly(n);
            Qp lhs = rep_pair(VecQ(rho_n(g, n) * P), VecQ(rho_n(g, n) * Q));
            Qp rhs = det(g).pow(n) * rep_pair(P, Q);
            CHECK(lhs.eq(rhs, 8));
        }
    }
}

TEST_CASE("degree-two anchor: pairing of pure matrices is the trace form") {
    ScopedField sf(5, 2, 12);
    for (int t = 0; t < 8; t++) {
        MatQ U(2, 2), V(2, 2);
        U(0, 0) = Qp((long)(rng() % 625)); U(0, 1) = Qp((long)(rng() % 625));
        U(1, 0) = Qp((long)(rng() % 625)); U(1, 1) = -U(0, 0);
        V(0, 0) = Qp((long)(rng() % 625)); V(0, 1) = Qp((long)(rng() % 625));
        V(1, 0) = Qp((long)(rng() % 625)); V(1, 1) = -V(0, 0);
        Qp tr = (U * V)(0, 0) + (U * V)(1, 1);
        CHECK(rep_pair(pure_to_poly(U), pure_to_poly(V)).eq(tr, 10));
    }
}

TEST_CASE("the quadratic of a pure matrix vanishes at its fixed points") {
    ScopedField sf(5, 2, 12);
    for (int t = 0; t < 10; t++) {
        MatQ U(2, 2);
        U(0, 0) = Qp((long)(rng() % 625)); U(0, 1) = Qp((long)(rng() % 625));
        U(1, 0) = Qp((long)(1 + rng() % 624)); U(1, 1) = -U(0, 0);
        // fixed points of the Moebius action: c z^2 - 2a z - b = 0
        Qp disc = U(0, 0) * U(0, 0) + U(1, 0) * U(0, 1); // (2a)^2 + 4bc over 4
        if (disc.is_zero() || disc.v % 2 != 0) continue;
        Qp z = (U(0, 0) + psqrt(disc)) / U(1, 0);
        CHECK(act_point(U, z).eq(z, 8));
        CHECK(poly_eval(pure_to_poly(U), z).eq(Qp(0), 8));
    }
}

TEST_CASE("conjugation equivariance of the pure-matrix quadratic") {
    ScopedField sf(5, 2, 12);
    for (int t = 0; t < 8; t++) {
        MatQ U(2, 2);
        U(0, 0) = Qp((long)(rng() % 625)); U(0, 1) = Qp((long)(rng() % 625));
        U(1, 0) = Qp((long)(rng() % 625)); U(1, 1) = -U(0, 0);
        MatQ g = rnd_gl2();
        MatQ Uc = g * U * inverse(g);
        VecQ lhs = pure_to_poly(Uc);
        VecQ rhs = det(g) * (rho_n(inverse(g), 2) * pure_to_poly(U));
        for (int i = 0; i < 3; i++) CHECK(lhs(i).eq(rhs(i), 8));
    }
}

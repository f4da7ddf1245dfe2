#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mumford/cohom.hpp>

#include <iostream>
#include <random>
#include <set>

using namespace mf;

static std::mt19937_64 rng(314159u);

static Qp rnd_small() { return Qp((long)(rng() % 625) - 312); }

static MatQ rnd_invertible(int d) {
    while (true) {
        MatQ g(d, d);
        for (int i = 0; i < d; i++)
            for (int j = 0; j < d; j++) g(i, j) = rnd_small();
        if (!det(g).is_zero() && det(g).v == 0) return g;
    }
}

static bool vec_small(const VecQ& x, int k) {
    for (int i = 0; i < x.size(); i++)
        if (!x(i).eq(Qp(0), k)) return false;
    return true;
}

TEST_CASE("free quotient stars enumerate each vertex's outgoing edges") {
    ScopedField sf(5, 2, 12);
    ArithGroup G(5, 2, 1);
    FreeQuotient F = build_free_quotient(G);
    REQUIRE(F.stars.size() == F.verts.size());
    for (size_t i = 0; i < F.verts.size(); i++) {
        REQUIRE((long)F.stars[i].size() == G.p + 1);
        std::multiset<TreeEdge> got, want;
        for (const TreeVertex& w : neighbors(F.verts[i])) want.insert({F.verts[i], w});
        for (const auto& inc : F.stars[i]) {
            TreeEdge r = F.edges[(size_t)inc.orbit].rep;
            if (inc.rev) r = r.reversed();
            got.insert(act_edge(G.mat(inc.h), r));
        }
        CHECK(got == want);
    }
}

TEST_CASE("trivial-coefficient harmonic forms on the free quotient: cycle rank") {
    ScopedField sf(5, 2, 12);
    ArithGroup G(5, 2, 1);
    FreeQuotient F = build_free_quotient(G);
    auto basis = harmonic_space_free(G, F, 0, 0);
    int cyc = (int)F.edges.size() - (int)F.verts.size() + 1;
    CHECK(cyc == 5);
    CHECK((int)basis.size() == cyc);
}

TEST_CASE("harmonic forms at the full group: dimensions and local identities") {
    ScopedField sf(5, 2, 12);
    int M = ctx().M;
    ArithGroup G(5, 2, 1);
    QuotientGraph Q = build_quotient(G);

    CHECK(harmonic_space(G, Q, 0, 0).size() == 0);

    auto basis = harmonic_space(G, Q, 2, 1);
    REQUIRE(basis.size() == 1);
    const EdgeCochain& f = basis[0];

    // stabilizer invariance on the representative edge
    for (const Quat& s : Q.edges[0].estab) {
        VecQ d = weight_action(G.mat(s), 2, 1) * f.vals[0] - f.vals[0];
        CHECK(vec_small(d, M - 2));
    }

    // the vanishing-sum identity at vertices far from the representatives
    for (TreeVertex v : {TreeVertex(2, 7, 0), TreeVertex(-2, 0, 0), TreeVertex(3, 114, 0)}) {
        VecQ s = VecQ::Zero(3);
        for (const TreeVertex& w : neighbors(v)) s += eval_edge(G, Q, f, {v, w});
        CHECK(vec_small(s, M - 2));
    }

    // the value over an edge equals the sum over the edges refining it
    TreeEdge e{TreeVertex(1, 2, 0), TreeVertex(2, 7, 0)};
    VecQ s = VecQ::Zero(3);
    for (const TreeVertex& w : tree_children(e.t)) s += eval_edge(G, Q, f, {e.t, w});
    CHECK(vec_small(VecQ(s - eval_edge(G, Q, f, e)), M - 2));
}

TEST_CASE("the smaller configuration has the same one-dimensional space") {
    ScopedField sf(3, 2, 12);
    ArithGroup G(3, 2, 1);
    QuotientGraph Q = build_quotient(G);
    CHECK(harmonic_space(G, Q, 2, 1).size() == 1);
    CHECK(harmonic_space(G, Q, 0, 0).size() == 0);
    FreeQuotient F = build_free_quotient(G);
    auto b0 = harmonic_space_free(G, F, 0, 0);
    CHECK((int)b0.size() == (int)F.edges.size() - (int)F.verts.size() + 1);
}

TEST_CASE("group cohomology dimensions and the harmonic embedding") {
    ScopedField sf(5, 2, 12);
    ArithGroup G(5, 2, 1);
    QuotientGraph Q = build_quotient(G);

    // trivial coefficients: constants on both vertex classes, no classes
    H1Space H0 = group_h1(G, Q, 0, 0);
    CHECK(H0.basis.size() == 0);
    CHECK(H0.cob.cols() == 2);

    // weight two: no invariant vertex cochains, classes match harmonic forms
    H1Space H = group_h1(G, Q, 2, 1);
    auto har = harmonic_space(G, Q, 2, 1);
    CHECK(H.cob.cols() == 0);
    CHECK(H.basis.size() == har.size());

    // a harmonic form represents a nonzero class
    VecQ cls = h1_reduce(H, har[0]);
    bool nonzero = false;
    for (int i = 0; i < cls.size(); i++)
        if (!cls(i).eq(Qp(0), ctx().M - 3)) nonzero = true;
    CHECK(nonzero);
}

TEST_CASE("the connecting cocycle satisfies the cocycle relation") {
    ScopedField sf(5, 2, 12);
    int M = ctx().M;
    ArithGroup G(5, 2, 1);
    QuotientGraph Q = build_quotient(G);
    FreeQuotient F = build_free_quotient(G);
    H1Space H = group_h1(G, Q, 2, 1);

    std::vector<Quat> gens;
    for (const auto& fe : F.edges)
        if (!fe.in_tree) gens.push_back(fe.glue);
    REQUIRE(gens.size() == 5);

    for (const EdgeCochain& c : H.basis) {
        for (int t = 0; t < 4; t++) {
            const Quat& g1 = gens[rng() % gens.size()];
            const Quat& g2 = gens[rng() % gens.size()];
            VecQ lhs = connecting_cocycle(G, Q, c, G.mul(g1, g2));
            VecQ rhs = weight_action(G.mat(g1), 2, 1) * connecting_cocycle(G, Q, c, g2) +
                       connecting_cocycle(G, Q, c, g1);
            CHECK(vec_small(VecQ(lhs - rhs), M - 2));
        }
    }
}

TEST_CASE("the pairing kills coboundaries and is domain-independent") {
    ScopedField sf(5, 2, 12);
    int M = ctx().M;
    ArithGroup G(5, 2, 1);
    QuotientGraph Q = build_quotient(G);
    FreeQuotient F = build_free_quotient(G);
    H1Space H = group_h1(G, Q, 2, 1);
    auto har = harmonic_space(G, Q, 2, 1);
    const EdgeCochain& f = har[0];

    // the domain sum annihilates cocycles of coboundary shape (1 - gamma) xi
    for (int t = 0; t < 3; t++) {
        VecQ xi(3);
        xi << rnd_small(), rnd_small(), rnd_small();
        Qp s = Qp::zero_at(ctx().W);
        for (const auto& fe : F.edges) {
            if (fe.in_tree) continue;
            MatQ wa = weight_action(G.mat(G.canon_sign(G.B.conj(fe.glue))), 2, 1);
            VecQ z = xi - wa * xi;
            s += rep_pair(z, eval_edge(G, Q, f, fe.rep));
        }
        CHECK(s.eq(Qp(0), M - 3));
    }

    // not identically zero on classes
    bool nonzero = false;
    std::vector<Qp> vals;
    for (const EdgeCochain& z : H.basis) {
        Qp v = pairing_gamma(G, Q, F, z, f);
        vals.push_back(v);
        if (!v.eq(Qp(0), M - 3)) nonzero = true;
    }
    CHECK(nonzero);

    // a fundamental domain grown from a different base gives the same numbers
    FreeQuotient F2 = build_free_quotient(G, TreeVertex(1, 0, 0));
    CHECK(F2.index == F.index);
    for (size_t i = 0; i < H.basis.size(); i++)
        CHECK(pairing_gamma(G, Q, F2, H.basis[i], f).eq(vals[i], M - 3));
}

TEST_CASE("involutions and the squared shift operator") {
    ScopedField sf(5, 2, 12);
    int M = ctx().M;
    ArithGroup G(5, 2, 1);
    QuotientGraph Q = build_quotient(G);
    auto basis = harmonic_space(G, Q, 2, 1);
    int k = (int)basis.size();

    MatQ Wp = atkin_lehner_w(G, Q, basis, 5);
    MatQ W2 = atkin_lehner_w(G, Q, basis, 2);
    MatQ Up = hecke_up(G, Q, basis);
    MatQ I = MatQ::Identity(k, k);

    auto mat_eq = [&](const MatQ& X, const MatQ& Y) {
        for (int i = 0; i < k; i++)
            for (int j = 0; j < k; j++)
                if (!X(i, j).eq(Y(i, j), M - 2)) return false;
        return true;
    };
    CHECK(mat_eq(MatQ(Wp * Wp), I));
    CHECK(mat_eq(MatQ(W2 * W2), I));
    CHECK(mat_eq(MatQ(Up * Up), MatQ(Qp(25) * I)));
    CHECK(mat_eq(MatQ(Up * Wp), MatQ(Wp * Up)));
    CHECK(mat_eq(MatQ(Up * W2), MatQ(W2 * Up)));
    CHECK(mat_eq(Up, MatQ(Qp(-5) * Wp)));
}

TEST_CASE("eigenvalues of the reference eigenform") {
    ScopedField sf(5, 2, 12);
    int M = ctx().M;
    ArithGroup G(5, 2, 1);
    QuotientGraph Q = build_quotient(G);
    auto basis = harmonic_space(G, Q, 2, 1);
    MatQ Up = hecke_up(G, Q, basis);
    MatQ W2 = atkin_lehner_w(G, Q, basis, 2);
    auto blocks = eigen_split({Up, W2});
    REQUIRE(blocks.size() == 1);
    REQUIRE(blocks[0].basis.cols() == 1);
    Qp a5 = blocks[0].eigs[0];
    Qp w2 = blocks[0].eigs[1];
    CHECK((Qp(25) - a5 * a5).eq(Qp(0), M - 2));
    CHECK((Qp(1) - w2 * w2).eq(Qp(0), M - 2));
    // frozen eigendata of the unique eigenform at this level and weight
    CHECK(a5.eq(Qp(-5), M - 2));
    CHECK(w2.eq(Qp(1), M - 2));
    MatQ W5 = atkin_lehner_w(G, Q, basis, 5);
    CHECK(W5(0, 0).eq(Qp(1), M - 2));
}

TEST_CASE("root extraction over the working field") {
    ScopedField sf(5, 2, 12);
    int M = ctx().M;
    // (x - 3)(x - 5)(x - (1 + w))
    Qp g = Qp::gen() + Qp(1);
    Poly f;
    f.c = {Qp(-15) * g, Qp(15) + Qp(8) * g, -(Qp(8) + g), Qp(1)};
    auto roots = qp_roots(f);
    REQUIRE(roots.size() == 3);
    for (const Qp& want : {Qp(3), Qp(5), g}) {
        bool found = false;
        for (const Qp& r : roots)
            if (r.eq(want, M - 2)) found = true;
        CHECK(found);
    }
}

TEST_CASE("eigen splitting: distinct residues, joint refinement, irreducible blocks") {
    ScopedField sf(5, 2, 12);
    int M = ctx().M;
    MatQ g = rnd_invertible(3);
    MatQ gi = inverse(g);

    MatQ d1 = MatQ::Zero(3, 3), d2 = MatQ::Zero(3, 3);
    d1(0, 0) = Qp(1), d1(1, 1) = Qp(3), d1(2, 2) = Qp(5);
    auto blocks = eigen_split({MatQ(g * d1 * gi)});
    REQUIRE(blocks.size() == 3);
    for (long want : {1L, 3L, 5L}) {
        bool found = false;
        for (const auto& b : blocks)
            if (b.basis.cols() == 1 && b.eigs[0].eq(Qp(want), M - 2)) found = true;
        CHECK(found);
    }

    // a pair of commuting operators splitting only jointly
    d1.setZero(), d2.setZero();
    d1(0, 0) = Qp(1), d1(1, 1) = Qp(1), d1(2, 2) = Qp(2);
    d2(0, 0) = Qp(3), d2(1, 1) = Qp(4), d2(2, 2) = Qp(9);
    auto jb = eigen_split({MatQ(g * d1 * gi), MatQ(g * d2 * gi)});
    REQUIRE(jb.size() == 3);
    for (auto want : std::vector<std::pair<long, long>>{{1, 3}, {1, 4}, {2, 9}}) {
        bool found = false;
        for (const auto& b : jb)
            if (b.eigs[0].eq(Qp(want.first), M - 2) && b.eigs[1].eq(Qp(want.second), M - 2))
                found = true;
        CHECK(found);
    }

    // eigenvalues of non-integral slope stay glued
    MatQ r = MatQ::Zero(3, 3);
    r(0, 1) = Qp(5), r(1, 0) = Qp(1), r(2, 2) = Qp(2);
    auto ib = eigen_split({MatQ(g * r * gi)});
    std::multiset<long> sizes;
    for (const auto& b : ib) sizes.insert(b.basis.cols());
    CHECK(sizes == std::multiset<long>({1, 2}));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mumford/linalg.hpp>

#include <random>

using namespace mf;

static std::mt19937_64 rng(777u);

static Qp rnd_scalar(int max_val = 2) {
    const FieldContext& F = ctx();
    uint64_t a = rng() % F.ppow[F.W];
    uint64_t b = F.mu == 2 ? rng() % F.ppow[F.W] : 0;
    int v = (int)(rng() % (2 * max_val + 1)) - max_val;
    return Qp::from_parts(v, a, b, v + F.W);
}

static MatQ rnd_mat(int rows, int cols, int max_val = 1) {
    MatQ A(rows, cols);
    for (int i = 0; i < rows; i++)
        for (int j = 0; j < cols; j++) A(i, j) = rnd_scalar(max_val);
    return A;
}

static MatQ rnd_invertible(int n) {
    while (true) {
        MatQ A = rnd_mat(n, n, 0);
        if (rank(A) == n) return A;
    }
}

static bool mat_eq(const MatQ& A, const MatQ& B, int k) {
    if (A.rows() != B.rows() || A.cols() != B.cols()) return false;
    for (int i = 0; i < A.rows(); i++)
        for (int j = 0; j < A.cols(); j++)
            if (!A(i, j).eq(B(i, j), k)) return false;
    return true;
}

TEST_CASE("matrix algebra over the p-adic scalar plugs into Eigen") {
    ScopedField sf(5, 2, 12);
    MatQ A = rnd_mat(3, 3), B = rnd_mat(3, 3), C = rnd_mat(3, 3);
    MatQ I = MatQ::Identity(3, 3);
    CHECK(mat_eq((A * B) * C, A * (B * C), 8));
    CHECK(mat_eq(A * I, A, 14));
    CHECK(mat_eq(A + B, B + A, 14));
}

TEST_CASE("valuation-pivoted solve reproduces planted solutions") {
    ScopedField sf(5, 2, 12);
    for (int t = 0; t < 10; t++) {
        int n = 2 + (int)(rng() % 4);
        MatQ A = rnd_invertible(n);
        VecQ x = rnd_mat(n, 1, 1);
        VecQ b = A * x;
        VecQ y = solve(A, b);
        for (int i = 0; i < n; i++) CHECK(y(i).eq(x(i), 10));
    }
}

TEST_CASE("rank and kernel of a planted low-rank product") {
    ScopedField sf(5, 2, 12);
    for (int t = 0; t < 8; t++) {
        int m = 4 + (int)(rng() % 2), n = 4 + (int)(rng() % 2);
        int r = 1 + (int)(rng() % 3);
        MatQ A = rnd_mat(m, r, 0) * rnd_mat(r, n, 0);
        CHECK(rank(A) == r);
        MatQ K = kernel(A);
        CHECK(K.cols() == n - r);
        MatQ Z = A * K;
        for (int i = 0; i < Z.rows(); i++)
            for (int j = 0; j < Z.cols(); j++) CHECK(Z(i, j).eq(Qp(0), 9));
        CHECK(rank(K) == n - r);
    }
}

TEST_CASE("inverse") {
    ScopedField sf(5, 2, 12);
    for (int t = 0; t < 6; t++) {
        int n = 2 + (int)(rng() % 4);
        MatQ A = rnd_invertible(n);
        CHECK(mat_eq(A * inverse(A), MatQ::Identity(n, n), 10));
        CHECK(mat_eq(inverse(A) * A, MatQ::Identity(n, n), 10));
    }
}

TEST_CASE("determinant: triangular oracle and multiplicativity") {
    ScopedField sf(5, 1, 12);
    MatQ T = MatQ::Identity(3, 3);
    T(0, 0) = Qp(2); T(1, 1) = Qp(15); T(2, 2) = Qp(7);
    T(0, 1) = Qp(4); T(0, 2) = Qp(9); T(1, 2) = Qp(11);
    CHECK(det(T).eq(Qp(2 * 15 * 7), 10));
    for (int t = 0; t < 6; t++) {
        MatQ A = rnd_mat(3, 3, 1), B = rnd_mat(3, 3, 1);
        CHECK(det(A * B).eq(det(A) * det(B), 8));
    }
}

TEST_CASE("characteristic polynomial: companion-matrix oracle") {
    ScopedField sf(5, 2, 12);
    // x^3 - 2x^2 + 10x - 3 has companion matrix with known char poly
    std::vector<long> c = {-3, 10, -2};
    MatQ A = MatQ::Zero(3, 3);
    for (int i = 0; i < 2; i++) A(i + 1, i) = Qp(1);
    for (int i = 0; i < 3; i++) A(i, 2) = -Qp(c[i]);
    Poly f = charpoly(A);
    CHECK(f.deg() == 3);
    CHECK(f.c[3].eq(Qp(1), 12));
    CHECK(f.c[2].eq(Qp(-2), 12));
    CHECK(f.c[1].eq(Qp(10), 12));
    CHECK(f.c[0].eq(Qp(-3), 12));
    // 2x2: x^2 - tr x + det
    MatQ B = rnd_mat(2, 2, 1);
    Poly g = charpoly(B);
    CHECK(g.c[1].eq(-(B(0, 0) + B(1, 1)), 9));
    CHECK(g.c[0].eq(det(B), 9));
}

TEST_CASE("Cayley-Hamilton as a stress test of the char poly") {
    ScopedField sf(5, 2, 12);
    for (int t = 0; t < 4; t++) {
        int n = 2 + (int)(rng() % 3);
        MatQ A = rnd_mat(n, n, 1);
        Poly f = charpoly(A);
        MatQ Z = f.eval_matrix(A);
        for (int i = 0; i < n; i++)
            for (int j = 0; j < n; j++) CHECK(Z(i, j).eq(Qp(0), 7));
    }
}

TEST_CASE("newton slopes of an explicit polynomial") {
    ScopedField sf(5, 1, 12);
    // (x - 5)(x - 1) = x^2 - 6x + 5: root valuations 1 and 0
    Poly f{{Qp(5), Qp(-6), Qp(1)}};
    auto sl = newton_slopes(f);
    REQUIRE(sl.size() == 2);
    CHECK(sl[0].first == Frac{0, 1});
    CHECK(sl[0].second == 1);
    CHECK(sl[1].first == Frac{1, 1});
    CHECK(sl[1].second == 1);
    // x^2 - 5: two roots of valuation 1/2
    Poly g{{Qp(-5), Qp(0), Qp(1)}};
    auto sg = newton_slopes(g);
    REQUIRE(sg.size() == 1);
    CHECK(sg[0].first == Frac{1, 2});
    CHECK(sg[0].second == 2);
}

TEST_CASE("slope projectors split a conjugated block matrix") {
    ScopedField sf(5, 2, 12);
    // blocks of slopes 0, 1, 2 with sizes 2, 1, 2
    MatQ D = MatQ::Zero(5, 5);
    MatQ U1 = rnd_mat(2, 2, 0);
    while (rank(U1) < 2 || !det(U1).is_unit()) U1 = rnd_mat(2, 2, 0);
    MatQ U3 = rnd_mat(2, 2, 0);
    while (rank(U3) < 2 || !det(U3).is_unit()) U3 = rnd_mat(2, 2, 0);
    D.block(0, 0, 2, 2) = U1;
    D(2, 2) = Qp(5) * rnd_scalar(0);
    D.block(3, 3, 2, 2) = Qp(25) * U3;
    MatQ S = rnd_invertible(5);
    MatQ A = S * D * inverse(S);

    auto parts = slope_projectors(A);
    REQUIRE(parts.size() == 3);
    MatQ sum = MatQ::Zero(5, 5);
    std::vector<int> dims = {2, 1, 2};
    std::vector<Frac> slopes = {Frac{0, 1}, Frac{1, 1}, Frac{2, 1}};
    for (size_t i = 0; i < parts.size(); i++) {
        CHECK(parts[i].first == slopes[i]);
        const MatQ& P = parts[i].second;
        CHECK(rank(P) == dims[i]);
        CHECK(mat_eq(P * P, P, 7));
        CHECK(mat_eq(P * A, A * P, 7));
        sum += P;
    }
    CHECK(mat_eq(sum, MatQ::Identity(5, 5), 7));
}

TEST_CASE("fractional slope stays in one block") {
    ScopedField sf(5, 2, 12);
    MatQ A = MatQ::Zero(2, 2);
    A(0, 1) = Qp(5);
    A(1, 0) = Qp(1);
    auto parts = slope_projectors(A);   // char poly x^2 - 5: slope 1/2
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].first == Frac{1, 2});
    CHECK(mat_eq(parts[0].second, MatQ::Identity(2, 2), 10));
}

TEST_CASE("semilinear twist as a base-field linear map") {
    ScopedField sf(5, 2, 12);
    int n = 3;
    MatQ A = rnd_mat(n, n, 1);
    MatQ M = semilinear_restriction(A);   // matrix of x -> A sigma(x) over Q_p
    CHECK(M.rows() == 2 * n);
    for (int t = 0; t < 5; t++) {
        VecQ x = rnd_mat(n, 1, 1);
        VecQ lhs = A * frobenius_entries(x);
        VecQ packed = M * split_vector(x);
        VecQ rhs = merge_vector(packed);
        for (int i = 0; i < n; i++) CHECK(lhs(i).eq(rhs(i), 9));
    }
}

TEST_CASE("sigma-fixed vectors of a twisted identity have full base-field rank") {
    ScopedField sf(5, 2, 12);
    int n = 3;
    // A = S sigma(S)^{-1}: the map x -> A sigma(x) fixes the lattice S Q_p^n
    MatQ S = rnd_invertible(n);
    MatQ A = S * inverse(frobenius_entries(S));
    MatQ M = semilinear_restriction(A) - MatQ::Identity(2 * n, 2 * n);
    MatQ K = kernel(M);
    CHECK(K.cols() == n);
    // each kernel vector really is sigma-fixed under the twist
    for (int j = 0; j < K.cols(); j++) {
        VecQ x = merge_vector(K.col(j));
        VecQ y = A * frobenius_entries(x);
        for (int i = 0; i < n; i++) CHECK(y(i).eq(x(i), 8));
    }
}

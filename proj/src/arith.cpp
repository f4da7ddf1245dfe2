#include <mumford/arith.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>
#include <sstream>

namespace mf {

// ---- rationals and quaternion storage -------------------------------------

QRat::QRat(long long n, long long d) {
    if (d == 0) throw HypothesisError("rational with zero denominator");
    if (d < 0) { n = -n; d = -d; }
    long long g = std::gcd(n < 0 ? -n : n, d);
    if (g == 0) g = 1;
    num = n / g;
    den = d / g;
}

Quat::Quat(long long a0, long long a1, long long a2, long long a3, long long den) {
    if (den == 0) throw HypothesisError("quaternion with zero denominator");
    if (den < 0) { a0 = -a0; a1 = -a1; a2 = -a2; a3 = -a3; den = -den; }
    long long g = den;
    for (long long x : {a0, a1, a2, a3}) g = std::gcd(g, x < 0 ? -x : x);
    if (g == 0) g = 1;
    n = {a0 / g, a1 / g, a2 / g, a3 / g};
    d = den / g;
}

std::string Quat::serialize() const {
    std::ostringstream os;
    os << n[0] << "," << n[1] << "," << n[2] << "," << n[3] << "/" << d;
    return os.str();
}

Quat Quat::parse(const std::string& s) {
    long long a0, a1, a2, a3, dd;
    char c;
    std::istringstream is(s);
    if (!(is >> a0 >> c >> a1 >> c >> a2 >> c >> a3 >> c >> dd))
        throw HypothesisError("bad quaternion literal: " + s);
    return Quat(a0, a1, a2, a3, dd);
}

// ---- the algebra -----------------------------------------------------------

Quat QuatAlgebra::mul(const Quat& x, const Quat& y) const {
    __int128 A = a, B_ = b;
    __int128 x0 = x.n[0], x1 = x.n[1], x2 = x.n[2], x3 = x.n[3];
    __int128 y0 = y.n[0], y1 = y.n[1], y2 = y.n[2], y3 = y.n[3];
    __int128 z0 = x0 * y0 + A * x1 * y1 + B_ * x2 * y2 - A * B_ * x3 * y3;
    __int128 z1 = x0 * y1 + x1 * y0 - B_ * x2 * y3 + B_ * x3 * y2;
    __int128 z2 = x0 * y2 + x2 * y0 + A * x1 * y3 - A * x3 * y1;
    __int128 z3 = x0 * y3 + x3 * y0 + x1 * y2 - x2 * y1;
    return Quat((long long)z0, (long long)z1, (long long)z2, (long long)z3, x.d * y.d);
}

QRat QuatAlgebra::nrd(const Quat& x) const {
    __int128 A = a, B_ = b;
    __int128 s = (__int128)x.n[0] * x.n[0] - A * x.n[1] * x.n[1] - B_ * x.n[2] * x.n[2] +
                 A * B_ * x.n[3] * x.n[3];
    return QRat((long long)s, x.d * x.d);
}

Quat QuatAlgebra::inv(const Quat& x) const {
    QRat nr = nrd(x);
    if (nr.num == 0) throw HypothesisError("inverse of a zero-norm quaternion");
    Quat c = conj(x);
    // c / nrd(x) = c * den / num
    return Quat(c.n[0] * nr.den, c.n[1] * nr.den, c.n[2] * nr.den, c.n[3] * nr.den,
                c.d * nr.num);
}

long long QuatAlgebra::gram_det() const {
    long long T[4][4];
    for (int i = 0; i < 4; i++)
        for (int j = 0; j < 4; j++) {
            QRat t = trd(mul(basis[i], conj(basis[j])));
            if (t.den != 1) throw InvariantError("non-integral trace pairing on the order");
            T[i][j] = t.num;
        }
    // 4x4 determinant by cofactor expansion, exact
    auto det3 = [&](int r0, int r1, int r2, int c0, int c1, int c2) -> __int128 {
        return (__int128)T[r0][c0] * ((__int128)T[r1][c1] * T[r2][c2] - (__int128)T[r1][c2] * T[r2][c1]) -
               (__int128)T[r0][c1] * ((__int128)T[r1][c0] * T[r2][c2] - (__int128)T[r1][c2] * T[r2][c0]) +
               (__int128)T[r0][c2] * ((__int128)T[r1][c0] * T[r2][c1] - (__int128)T[r1][c1] * T[r2][c0]);
    };
    __int128 dd = (__int128)T[0][0] * det3(1, 2, 3, 1, 2, 3) - (__int128)T[0][1] * det3(1, 2, 3, 0, 2, 3) +
                  (__int128)T[0][2] * det3(1, 2, 3, 0, 1, 3) - (__int128)T[0][3] * det3(1, 2, 3, 0, 1, 2);
    return (long long)dd;
}

namespace {

// columns = coordinates of the basis, doubled so they are integers
void basis_matrix2(const QuatAlgebra& B, long long M[4][4]) {
    for (int a = 0; a < 4; a++) {
        if (2 % B.basis[a].d != 0) throw InvariantError("order basis denominator exceeds 2");
        for (int m = 0; m < 4; m++) M[m][a] = B.basis[a].n[m] * (2 / B.basis[a].d);
    }
}

__int128 det3_of(const long long M[4][4], int rows[3], int cols[3]) {
    __int128 s = 0;
    int perm[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {0, 2, 1}, {1, 0, 2}, {2, 1, 0}};
    for (int t = 0; t < 6; t++) {
        __int128 prod = (t < 3 ? 1 : -1);
        for (int i = 0; i < 3; i++) prod *= M[rows[i]][cols[perm[t][i]]];
        s += prod;
    }
    return s;
}

struct Adj4 {
    __int128 adj[4][4]; // adjugate: adj * M = det * I
    __int128 det;
};

Adj4 adjugate4(const long long M[4][4]) {
    Adj4 R;
    for (int i = 0; i < 4; i++)
        for (int j = 0; j < 4; j++) {
            int rows[3], cols[3], ri = 0, ci = 0;
            for (int k = 0; k < 4; k++) {
                if (k != j) rows[ri++] = k;
                if (k != i) cols[ci++] = k;
            }
            __int128 c = det3_of(M, rows, cols);
            R.adj[i][j] = ((i + j) % 2 == 0) ? c : -c;
        }
    R.det = 0;
    for (int k = 0; k < 4; k++) R.det += R.adj[0][k] * M[k][0];
    return R;
}

} // namespace

bool QuatAlgebra::in_order(const Quat& x) const {
    long long M[4][4];
    basis_matrix2(*this, M);
    Adj4 A = adjugate4(M);
    if (A.det == 0) throw InvariantError("degenerate order basis");
    for (int i = 0; i < 4; i++) {
        __int128 num = 0;
        for (int m = 0; m < 4; m++) num += A.adj[i][m] * (__int128)(2 * x.n[m]);
        __int128 q = A.det * x.d;
        if (num % q != 0) return false;
    }
    return true;
}

// ---- splittings ------------------------------------------------------------

namespace {

long powmod(long base, long e, long m) {
    long long r = 1, bb = ((base % m) + m) % m;
    while (e > 0) {
        if (e & 1) r = r * bb % m;
        bb = bb * bb % m;
        e >>= 1;
    }
    return (long)r;
}

bool is_square_modp(long long s, long p) {
    long r = (long)(((s % p) + p) % p);
    if (r == 0) return false; // we only care about unit squares
    return powmod(r, (p - 1) / 2, p) == 1;
}

// reduced norm of a pure integer quaternion w1 i + w2 j + w3 k
long long pure_nrd(long a, long b, long w1, long w2, long w3) {
    return -(long long)a * w1 * w1 - (long long)b * w2 * w2 +
           (long long)a * b * w3 * w3;
}

// bilinear form attached to the norm on pure quaternions; zero iff anticommuting
long long pure_bilin(long a, long b, const long u[3], const long w[3]) {
    return -(long long)a * u[0] * w[0] - (long long)b * u[1] * w[1] +
           (long long)a * b * u[2] * w[2];
}

} // namespace

Splitting make_splitting(const QuatAlgebra& B) {
    const FieldContext& F = ctx();
    long p = F.p;
    if (B.nminus % p == 0) throw HypothesisError("cannot split at a prime dividing the discriminant");

    // find a pure w with unit norm whose square is a prime-field square,
    // then a pure u anticommuting with w, also of unit norm
    for (int L = 1; L <= 6; L++) {
        for (long w1 = -L; w1 <= L; w1++)
            for (long w2 = -L; w2 <= L; w2++)
                for (long w3 = -L; w3 <= L; w3++) {
                    if (w1 == 0 && w2 == 0 && w3 == 0) continue;
                    if (std::max({std::abs(w1), std::abs(w2), std::abs(w3)}) != L) continue;
                    long long nw = pure_nrd(B.a, B.b, w1, w2, w3);
                    if (nw % p == 0) continue;
                    if (!is_square_modp(-nw, p)) continue; // w^2 = -Nrd(w)
                    long wv[3] = {w1, w2, w3};
                    for (int LU = 1; LU <= 6; LU++)
                        for (long u1 = -LU; u1 <= LU; u1++)
                            for (long u2 = -LU; u2 <= LU; u2++)
                                for (long u3 = -LU; u3 <= LU; u3++) {
                                    long uv[3] = {u1, u2, u3};
                                    if (std::max({std::abs(u1), std::abs(u2), std::abs(u3)}) != LU)
                                        continue;
                                    if (pure_bilin(B.a, B.b, uv, wv) != 0) continue;
                                    long long nu = pure_nrd(B.a, B.b, u1, u2, u3);
                                    if (nu == 0 || nu % p == 0) continue;
                                    Quat qw(0, w1, w2, w3, 1), qu(0, u1, u2, u3, 1);
                                    Quat qwu = B.mul(qw, qu);
                                    if (qwu.n[0] != 0 || qwu.d != 1)
                                        continue; // not anticommuting after all
                                    // transition matrix (i,j,k) -> (w,u,wu)
                                    long long P[4][4] = {{1, 0, 0, 0},
                                                         {0, w1, u1, qwu.n[1]},
                                                         {0, w2, u2, qwu.n[2]},
                                                         {0, w3, u3, qwu.n[3]}};
                                    Adj4 A = adjugate4(P);
                                    if (A.det == 0 || A.det % p == 0) continue;
                                    Qp t = psqrt(Qp((long)-nw));
                                    MatQ Mw(2, 2), Mu(2, 2);
                                    Mw << t, Qp(0), Qp(0), -t;
                                    Mu << Qp(0), Qp((long)-nu), Qp(1), Qp(0);
                                    MatQ Mwu = Mw * Mu;
                                    std::array<MatQ, 3> base = {Mw, Mu, Mwu};
                                    Splitting S;
                                    S.img[0] = MatQ::Identity(2, 2);
                                    for (int m = 1; m < 4; m++) {
                                        MatQ R = MatQ::Zero(2, 2);
                                        for (int c = 1; c < 4; c++) {
                                            long long num = (long long)A.adj[c][m];
                                            if (num == 0) continue;
                                            R += base[c - 1] * Qp::rational((long)num, (long)(long long)A.det);
                                        }
                                        S.img[m] = R;
                                    }
                                    // structural sanity: the images satisfy the defining relations
                                    int dg = std::min(6, F.M);
                                    MatQ i2 = S.img[1] * S.img[1], j2 = S.img[2] * S.img[2];
                                    MatQ ij = S.img[1] * S.img[2];
                                    for (int r = 0; r < 2; r++)
                                        for (int c = 0; c < 2; c++) {
                                            Qp da = r == c ? Qp((long)B.a) : Qp(0);
                                            Qp db = r == c ? Qp((long)B.b) : Qp(0);
                                            if (!i2(r, c).eq(da, dg) || !j2(r, c).eq(db, dg) ||
                                                !ij(r, c).eq(S.img[3](r, c), dg))
                                                throw InvariantError("splitting fails the algebra relations");
                                        }
                                    return S;
                                }
                }
    }
    throw InvariantError("no splitting found at the working prime");
}

MatQ Splitting::map(const Quat& x) const {
    MatQ r = MatQ::Zero(2, 2);
    for (int m = 0; m < 4; m++) {
        if (x.n[m] == 0) continue;
        r += img[m] * Qp::rational((long)x.n[m], (long)x.d);
    }
    return r;
}

// ---- order construction ----------------------------------------------------

namespace {

std::vector<long> prime_factors(long n) {
    std::vector<long> fs;
    for (long q = 2; q * q <= n; q++)
        while (n % q == 0) {
            fs.push_back(q);
            n /= q;
        }
    if (n > 1) fs.push_back(n);
    return fs;
}

// scale a quaternion by an integer
Quat qscale(const Quat& x, long long s) {
    return Quat(x.n[0] * s, x.n[1] * s, x.n[2] * s, x.n[3] * s, x.d);
}

Quat qadd(const Quat& x, const Quat& y) {
    long long l = std::lcm(x.d, y.d);
    long long fx = l / x.d, fy = l / y.d;
    return Quat(x.n[0] * fx + y.n[0] * fy, x.n[1] * fx + y.n[1] * fy,
                x.n[2] * fx + y.n[2] * fy, x.n[3] * fx + y.n[3] * fy, l);
}

long residue_mod(const Qp& e, long q) {
    if (e.is_zero() || e.v > 0) return 0;
    if (e.v < 0) throw InvariantError("non-integral entry in a local splitting");
    return (long)(e.a % (uint64_t)q);
}

} // namespace

QuatAlgebra make_algebra(long nminus, long nplus) {
    QuatAlgebra B;
    B.nminus = nminus;
    B.nplus = nplus;
    if (nminus == 2) {
        B.a = -1;
        B.b = -1;
        B.basis = {Quat::one(), Quat(0, 1, 0, 0), Quat(0, 0, 1, 0), Quat(1, 1, 1, 1, 2)};
    } else if (nminus > 2 && nminus % 4 == 3 && prime_factors(nminus).size() == 1) {
        B.a = -1;
        B.b = -nminus;
        B.basis = {Quat::one(), Quat(0, 1, 0, 0), Quat(1, 0, 1, 0, 2), Quat(0, 1, 0, 1, 2)};
    } else {
        throw HypothesisError("unsupported discriminant: need 2 or a prime = 3 mod 4");
    }
    if (nplus < 1) throw HypothesisError("level must be positive");
    auto fs = prime_factors(nplus);
    for (size_t i = 0; i + 1 < fs.size(); i++)
        if (fs[i] == fs[i + 1]) throw HypothesisError("level must be squarefree");
    for (long q : fs) {
        if (q == 2 || nminus % q == 0)
            throw HypothesisError("level must be odd and coprime to the discriminant");
        // intersect with the preimage of the upper-triangular matrices mod q
        ScopedField sf(q, 1, 8);
        Splitting S = make_splitting(B);
        long c[4];
        for (int a4 = 0; a4 < 4; a4++) {
            MatQ mb = S.map(B.basis[a4]);
            c[a4] = residue_mod(mb(1, 0), q);
        }
        int piv = -1;
        for (int a4 = 0; a4 < 4 && piv < 0; a4++)
            if (c[a4] != 0) piv = a4;
        if (piv < 0) throw InvariantError("level condition is vacuous at a level prime");
        long cinv = powmod(c[piv], q - 2, q);
        std::array<Quat, 4> nb = B.basis;
        for (int a4 = 0; a4 < 4; a4++) {
            if (a4 == piv) continue;
            long m = (long)((long long)c[a4] * cinv % q);
            nb[a4] = qadd(B.basis[a4], qscale(B.basis[piv], -m));
        }
        nb[piv] = qscale(B.basis[piv], q);
        B.basis = nb;
    }
    return B;
}

// ---- norm-form enumeration --------------------------------------------------

std::vector<Quat> enumerate_norm(const QuatAlgebra& B, long long t) {
    if (t <= 0) throw HypothesisError("enumerate_norm wants a positive norm");
    // Q(n) = Nrd(sum n_a e_a) as a positive definite form on Z^4
    long double A[4][4];
    for (int i = 0; i < 4; i++)
        for (int j = 0; j < 4; j++) {
            QRat tr = B.trd(B.mul(B.basis[i], B.conj(B.basis[j])));
            A[i][j] = (long double)tr.num / (long double)tr.den / 2.0L;
        }
    // decompose Q(x) = sum_i D[i] (x_i + sum_{j>i} U[i][j] x_j)^2
    long double D[4], U[4][4];
    for (int i = 0; i < 4; i++) {
        D[i] = A[i][i];
        if (D[i] <= 0) throw InvariantError("norm form is not positive definite");
        for (int j = i + 1; j < 4; j++) U[i][j] = A[i][j] / D[i];
        for (int k = i + 1; k < 4; k++)
            for (int l = i + 1; l < 4; l++) A[k][l] -= A[k][i] * A[i][l] / D[i];
    }
    // doubled integer coordinates of the basis for the exact check
    long long M2[4][4];
    basis_matrix2(B, M2);
    __int128 a128 = B.a, b128 = B.b, target = (__int128)4 * t;
    auto exact_norm_ok = [&](const long long n[4], long long c[4]) {
        for (int m = 0; m < 4; m++) {
            c[m] = 0;
            for (int a4 = 0; a4 < 4; a4++) c[m] += M2[m][a4] * n[a4];
        }
        __int128 s = (__int128)c[0] * c[0] - a128 * c[1] * c[1] - b128 * c[2] * c[2] +
                     a128 * b128 * c[3] * c[3];
        return s == target;
    };
    std::set<Quat> out;
    long long n[4];
    // levels 3,2,1 scan their ellipsoid intervals; level 0 is solved exactly
    std::function<void(int, long double)> rec = [&](int lvl, long double budget) {
        long double ctr = 0;
        for (int j = lvl + 1; j < 4; j++) ctr += U[lvl][j] * (long double)n[j];
        if (budget < -0.5L) return;
        long double rad = std::sqrt((double)(std::max(budget, 0.0L) / D[lvl]));
        if (lvl > 0) {
            long long lo = (long long)std::ceil((double)(-ctr - rad - 1e-9L));
            long long hi = (long long)std::floor((double)(-ctr + rad + 1e-9L));
            for (long long x = lo; x <= hi; x++) {
                n[lvl] = x;
                long double y = (long double)x + ctr;
                rec(lvl - 1, budget - D[lvl] * y * y);
            }
            return;
        }
        // Q contribution at the last level must equal the remaining budget
        for (int sgn = -1; sgn <= 1; sgn += 2) {
            long long c0 = (long long)std::llround((double)(-ctr + sgn * rad));
            for (long long x = c0 - 1; x <= c0 + 1; x++) {
                n[0] = x;
                long long cc[4];
                if (exact_norm_ok(n, cc)) {
                    Quat q(cc[0], cc[1], cc[2], cc[3], 2);
                    int first = 0;
                    while (first < 4 && q.n[first] == 0) first++;
                    if (first < 4 && q.n[first] < 0)
                        q = Quat(-q.n[0], -q.n[1], -q.n[2], -q.n[3], q.d);
                    out.insert(q);
                }
            }
        }
    };
    rec(3, (long double)t);
    return std::vector<Quat>(out.begin(), out.end());
}

std::vector<Quat> enumerate_pure_norm(const QuatAlgebra& B, long long t) {
    std::vector<Quat> res;
    for (const Quat& q : enumerate_norm(B, t))
        if (q.n[0] == 0) res.push_back(q);
    return res;
}

// ---- the arithmetic group ---------------------------------------------------

ArithGroup::ArithGroup(long p_, long nminus, long nplus) : p(p_) {
    if (ctx().p != p) throw HypothesisError("active field context is at a different prime");
    if (nminus % p == 0 || nplus % p == 0)
        throw HypothesisError("the working prime must be coprime to the levels");
    B = make_algebra(nminus, nplus);
    split = make_splitting(B);
    for (long ell = 3;; ell += 2) {
        if (prime_factors(ell).size() != 1) continue;
        if (p % ell == 0 || nminus % ell == 0 || nplus % ell == 0) continue;
        aux_ell = ell;
        break;
    }
    {
        ScopedField sf(aux_ell, 1, 8);
        Splitting S = make_splitting(B);
        for (int m = 0; m < 4; m++)
            for (int r = 0; r < 2; r++)
                for (int c = 0; c < 2; c++)
                    aux_img[m][r * 2 + c] = residue_mod(S.img[m](r, c), aux_ell);
    }
}

const std::vector<Quat>& ArithGroup::norms(long long t) {
    auto it = norm_cache.find(t);
    if (it == norm_cache.end()) it = norm_cache.emplace(t, enumerate_norm(B, t)).first;
    return it->second;
}

const std::vector<MatQ>& ArithGroup::norm_mats(long long t) {
    auto it = mat_cache_.find(t);
    if (it == mat_cache_.end()) {
        std::vector<MatQ> ms;
        for (const Quat& q : norms(t)) ms.push_back(split.map(q));
        it = mat_cache_.emplace(t, std::move(ms)).first;
    }
    return it->second;
}

MatQ ArithGroup::mat(const Quat& g) {
    auto it = elt_mats_.find(g);
    if (it == elt_mats_.end()) it = elt_mats_.emplace(g, split.map(g)).first;
    return it->second;
}

Quat ArithGroup::canon_sign(const Quat& q) const {
    for (int m = 0; m < 4; m++) {
        if (q.n[m] > 0) return q;
        if (q.n[m] < 0) return Quat(-q.n[0], -q.n[1], -q.n[2], -q.n[3], q.d);
    }
    return q;
}

std::optional<Quat> ArithGroup::transport(const TreeVertex& v, const TreeVertex& w, int margin) {
    int d = tree_distance(v, w);
    if (d % 2 != 0) return std::nullopt; // norm-one elements preserve the bipartition
    long long pw = 1;
    for (int K = 0; K <= d / 2 + margin; K++) {
        if (K >= d / 2) {
            const std::vector<Quat>& ns = norms(pw);
            const std::vector<MatQ>& ms = norm_mats(pw);
            for (size_t i = 0; i < ns.size(); i++)
                if (act_vertex(ms[i], v) == w) {
                    const Quat& x = ns[i];
                    long long pk = 1;
                    for (int s = 0; s < K; s++) pk *= p;
                    return canon_sign(Quat(x.n[0], x.n[1], x.n[2], x.n[3], x.d * pk));
                }
        }
        pw *= (long long)p * p;
    }
    return std::nullopt;
}

const std::vector<Quat>& ArithGroup::stabilizer(const TreeVertex& v) {
    auto it = stab_cache.find(v);
    if (it != stab_cache.end()) return it->second;
    int d0 = tree_distance(TreeVertex::standard(), v);
    std::set<Quat> got;
    long long pw = 1, pk = 1;
    for (int k = 0; k <= d0; k++) {
        const std::vector<Quat>& ns = norms(pw);
        const std::vector<MatQ>& ms = norm_mats(pw);
        for (size_t i = 0; i < ns.size(); i++)
            if (act_vertex(ms[i], v) == v) {
                const Quat& x = ns[i];
                got.insert(canon_sign(Quat(x.n[0], x.n[1], x.n[2], x.n[3], x.d * pk)));
            }
        pw *= (long long)p * p;
        pk *= p;
    }
    return stab_cache.emplace(v, std::vector<Quat>(got.begin(), got.end())).first->second;
}

std::vector<Quat> ArithGroup::edge_stabilizer(const TreeEdge& e) {
    std::vector<Quat> res;
    for (const Quat& s : stabilizer(e.o))
        if (act_vertex(mat(s), e.t) == e.t) res.push_back(s);
    return res;
}

std::optional<Quat> ArithGroup::transport_edge(const TreeEdge& a, const TreeEdge& b, int margin) {
    int d1 = tree_distance(a.o, b.o), d2 = tree_distance(a.t, b.t);
    if (d1 % 2 != 0 || d2 % 2 != 0) return std::nullopt;
    int dmax = std::max(d1, d2);
    long long pw = 1;
    for (int K = 0; K <= dmax / 2 + margin; K++) {
        if (K >= dmax / 2) {
            const std::vector<Quat>& ns = norms(pw);
            const std::vector<MatQ>& ms = norm_mats(pw);
            for (size_t i = 0; i < ns.size(); i++)
                if (act_vertex(ms[i], a.o) == b.o && act_vertex(ms[i], a.t) == b.t) {
                    const Quat& x = ns[i];
                    long long pk = 1;
                    for (int s = 0; s < K; s++) pk *= p;
                    return canon_sign(Quat(x.n[0], x.n[1], x.n[2], x.n[3], x.d * pk));
                }
        }
        pw *= (long long)p * p;
    }
    return std::nullopt;
}

std::array<long, 4> ArithGroup::aux_image(const Quat& g) const {
    long ell = aux_ell;
    if (g.d % ell == 0) throw InvariantError("denominator not coprime to the auxiliary prime");
    long dinv = powmod((long)(g.d % ell), ell - 2, ell);
    std::array<long, 4> M{0, 0, 0, 0};
    for (int m = 0; m < 4; m++) {
        long nm = (long)(((g.n[m] % ell) + ell) % ell);
        for (int e = 0; e < 4; e++) M[e] = (M[e] + nm * aux_img[m][e]) % ell;
    }
    for (int e = 0; e < 4; e++) M[e] = M[e] * dinv % ell;
    // projective normal form: first nonzero entry becomes 1
    int first = 0;
    while (first < 4 && M[first] == 0) first++;
    if (first == 4) throw InvariantError("quaternion maps to zero in the auxiliary reduction");
    long inv = powmod(M[first], ell - 2, ell);
    for (int e = 0; e < 4; e++) M[e] = M[e] * inv % ell;
    return M;
}

bool ArithGroup::in_kernel(const Quat& g) const {
    std::array<long, 4> M = aux_image(g);
    return M[0] == 1 && M[1] == 0 && M[2] == 0 && M[3] == 1;
}

std::optional<Quat> ArithGroup::transport_free(const TreeVertex& v, const TreeVertex& w) {
    std::optional<Quat> g0 = transport(v, w);
    if (!g0) return std::nullopt;
    for (const Quat& s : stabilizer(v)) {
        Quat g = B.mul(*g0, s);
        if (in_kernel(g)) return canon_sign(g);
    }
    return std::nullopt;
}

std::optional<Quat> ArithGroup::transport_edge_free(const TreeEdge& a, const TreeEdge& b) {
    std::optional<Quat> g0 = transport_edge(a, b);
    if (!g0) return std::nullopt;
    for (const Quat& s : edge_stabilizer(a)) {
        Quat g = B.mul(*g0, s);
        if (in_kernel(g)) return canon_sign(g);
    }
    return std::nullopt;
}

// ---- quotient graphs ---------------------------------------------------------

QuotientGraph build_quotient(ArithGroup& G) {
    QuotientGraph Q;
    Q.p = G.p;
    Q.nminus = G.B.nminus;
    Q.nplus = G.B.nplus;
    Q.precision = ctx().M;
    std::queue<int> todo;
    Q.verts.push_back(TreeVertex::standard());
    todo.push(0);
    while (!todo.empty()) {
        TreeVertex v = Q.verts[(size_t)todo.front()];
        todo.pop();
        for (const TreeVertex& w : neighbors(v)) {
            bool known = false;
            for (const TreeVertex& u : Q.verts)
                if (G.transport(w, u)) {
                    known = true;
                    break;
                }
            if (!known) {
                Q.verts.push_back(w);
                todo.push((int)Q.verts.size() - 1);
            }
        }
    }
    for (const TreeVertex& v : Q.verts) Q.vstabs.push_back(G.stabilizer(v));

    Q.stars.resize(Q.verts.size());
    for (size_t i = 0; i < Q.verts.size(); i++) {
        for (const TreeVertex& w : neighbors(Q.verts[i])) {
            TreeEdge e{Q.verts[i], w};
            bool placed = false;
            for (size_t j = 0; j < Q.edges.size() && !placed; j++) {
                if (auto h = G.transport_edge(Q.edges[j].rep, e)) {
                    Q.stars[i].push_back({(int)j, *h, false});
                    placed = true;
                } else if (auto hr = G.transport_edge(Q.edges[j].rep.reversed(), e)) {
                    Q.stars[i].push_back({(int)j, *hr, true});
                    placed = true;
                }
            }
            if (placed) continue;
            QuotientGraph::QEdge qe;
            qe.rep = e;
            qe.from = (int)i;
            qe.to = -1;
            for (size_t t = 0; t < Q.verts.size(); t++)
                if (G.transport(w, Q.verts[t])) {
                    qe.to = (int)t;
                    break;
                }
            if (qe.to < 0) throw InvariantError("edge endpoint not covered by vertex classes");
            qe.estab = G.edge_stabilizer(e);
            qe.flip = G.transport_edge(e, e.reversed());
            Q.edges.push_back(qe);
            Q.stars[i].push_back({(int)Q.edges.size() - 1, Quat::one(), false});
        }
    }
    return Q;
}

void check_masses(ArithGroup& G, const QuotientGraph& Q) {
    QRat vm(0, 1), em(0, 1);
    for (const auto& st : Q.vstabs) vm = vm + QRat(1, (long long)st.size());
    for (const auto& e : Q.edges)
        em = em + QRat(1, (long long)e.estab.size() * (e.flip ? 2 : 1));
    QRat vexp(2, 12), eexp(1, 12);
    for (long q : prime_factors(G.B.nminus)) {
        vexp = vexp * QRat(q - 1, 1);
        eexp = eexp * QRat(q - 1, 1);
    }
    for (long q : prime_factors(G.B.nplus)) {
        vexp = vexp * QRat(q + 1, 1);
        eexp = eexp * QRat(q + 1, 1);
    }
    eexp = eexp * QRat(G.p + 1, 1);
    if (!(vm == vexp)) throw InvariantError("vertex masses disagree with the class-number formula");
    if (!(em == eexp)) throw InvariantError("edge masses disagree with the class-number formula");
    for (const auto& st : Q.stars)
        if ((long)st.size() != G.p + 1)
            throw InvariantError("a vertex star misses incident edges");
}

int aux_index(ArithGroup& G, const QuotientGraph& Q) {
    std::vector<std::array<long, 4>> gens;
    auto add = [&](const Quat& q) { gens.push_back(G.aux_image(q)); };
    for (const auto& st : Q.vstabs)
        for (const Quat& s : st) add(s);
    for (const auto& e : Q.edges) {
        for (const Quat& s : e.estab) add(s);
        if (e.flip) add(*e.flip);
    }
    for (const auto& st : Q.stars)
        for (const auto& inc : st) add(inc.h);
    long ell = G.aux_ell;
    auto canon = [&](std::array<long, 4> m) {
        int first = 0;
        while (first < 4 && m[first] == 0) first++;
        if (first == 4) throw InvariantError("singular matrix in the auxiliary image");
        long inv = powmod(m[first], ell - 2, ell);
        for (int e = 0; e < 4; e++) m[e] = m[e] * inv % ell;
        return m;
    };
    auto mulm2 = [&](const std::array<long, 4>& x, const std::array<long, 4>& y) {
        std::array<long, 4> z;
        z[0] = (x[0] * y[0] + x[1] * y[2]) % ell;
        z[1] = (x[0] * y[1] + x[1] * y[3]) % ell;
        z[2] = (x[2] * y[0] + x[3] * y[2]) % ell;
        z[3] = (x[2] * y[1] + x[3] * y[3]) % ell;
        return canon(z);
    };
    std::set<std::array<long, 4>> seen;
    std::queue<std::array<long, 4>> todo;
    std::array<long, 4> id{1, 0, 0, 1};
    seen.insert(id);
    todo.push(id);
    while (!todo.empty()) {
        auto x = todo.front();
        todo.pop();
        for (const auto& g : gens) {
            auto y = mulm2(x, g);
            if (seen.insert(y).second) todo.push(y);
        }
    }
    return (int)seen.size();
}

FreeQuotient build_free_quotient(ArithGroup& G, const TreeVertex& base) {
    FreeQuotient F;
    F.verts.push_back(base);
    F.stars.emplace_back();
    std::queue<int> todo;
    todo.push(0);
    while (!todo.empty()) {
        int i = todo.front();
        todo.pop();
        TreeVertex v = F.verts[(size_t)i];
        for (const TreeVertex& w : neighbors(v)) {
            TreeEdge e{v, w};
            bool covered = false;
            for (size_t k = 0; k < F.edges.size(); k++) {
                const auto& f = F.edges[k];
                if (auto g = G.transport_edge_free(f.rep, e)) {
                    F.stars[(size_t)i].push_back({(int)k, *g, false});
                    covered = true;
                    break;
                }
                if (auto g = G.transport_edge_free(f.rep.reversed(), e)) {
                    F.stars[(size_t)i].push_back({(int)k, *g, true});
                    covered = true;
                    break;
                }
            }
            if (covered) continue;
            int to = -1;
            Quat glue = Quat::one();
            for (size_t t = 0; t < F.verts.size(); t++)
                if (auto g = G.transport_free(w, F.verts[t])) {
                    to = (int)t;
                    glue = *g;
                    break;
                }
            if (to < 0) {
                to = (int)F.verts.size();
                F.verts.push_back(w);
                F.stars.emplace_back();
                todo.push(to);
                F.edges.push_back({e, i, to, Quat::one(), true});
            } else {
                F.edges.push_back({e, i, to, glue, false});
            }
            F.stars[(size_t)i].push_back({(int)F.edges.size() - 1, Quat::one(), false});
        }
    }
    QuotientGraph Q = build_quotient(G);
    F.index = aux_index(G, Q);
    // Euler-characteristic consistency between the two quotients
    QRat vm(0, 1), em(0, 1);
    for (const auto& st : Q.vstabs) vm = vm + QRat(1, (long long)st.size());
    for (const auto& e : Q.edges)
        em = em + QRat(1, (long long)e.estab.size() * (e.flip ? 2 : 1));
    QRat chi = (vm - em) * QRat(F.index, 1);
    if (!(chi == QRat((long long)F.verts.size() - (long long)F.edges.size(), 1)))
        throw InvariantError("quotient Euler characteristics are inconsistent");
    return F;
}

std::pair<int, Quat> locate_vertex(ArithGroup& G, const QuotientGraph& Q, const TreeVertex& v) {
    for (size_t i = 0; i < Q.verts.size(); i++)
        if (auto g = G.transport(Q.verts[i], v)) return {(int)i, *g};
    throw InvariantError("vertex not covered by the quotient classes");
}

// ---- cache serialization -----------------------------------------------------

namespace {

void put_quats(std::ostringstream& os, const std::vector<Quat>& qs) {
    os << qs.size();
    for (const Quat& q : qs) os << " " << q.serialize();
}

std::vector<Quat> get_quats(std::istringstream& is) {
    size_t n;
    is >> n;
    std::vector<Quat> qs;
    std::string tok;
    for (size_t i = 0; i < n; i++) {
        is >> tok;
        qs.push_back(Quat::parse(tok));
    }
    return qs;
}

} // namespace

std::string QuotientGraph::serialize() const {
    std::ostringstream os;
    os << "quotient-graph 1\n";
    os << p << " " << nminus << " " << nplus << " " << precision << "\n";
    os << "V " << verts.size() << "\n";
    for (size_t i = 0; i < verts.size(); i++) {
        os << verts[i].serialize() << " ";
        put_quats(os, vstabs[i]);
        os << "\n";
    }
    os << "E " << edges.size() << "\n";
    for (const QEdge& e : edges) {
        os << e.rep.o.serialize() << " " << e.rep.t.serialize() << " " << e.from << " " << e.to
           << " ";
        put_quats(os, e.estab);
        os << " " << (e.flip ? e.flip->serialize() : std::string("-")) << "\n";
    }
    os << "S " << stars.size() << "\n";
    for (const auto& st : stars) {
        os << st.size();
        for (const Incid& inc : st)
            os << " " << inc.orbit << " " << (inc.rev ? 1 : 0) << " " << inc.h.serialize();
        os << "\n";
    }
    return os.str();
}

QuotientGraph QuotientGraph::parse(const std::string& s) {
    std::istringstream is(s);
    std::string tag;
    int ver;
    is >> tag >> ver;
    if (tag != "quotient-graph" || ver != 1) throw HypothesisError("unrecognized cache format");
    QuotientGraph Q;
    is >> Q.p >> Q.nminus >> Q.nplus >> Q.precision;
    size_t nv, ne, ns;
    is >> tag >> nv;
    if (tag != "V") throw HypothesisError("corrupt cache: vertex section");
    for (size_t i = 0; i < nv; i++) {
        std::string vt;
        is >> vt;
        Q.verts.push_back(TreeVertex::parse(vt));
        std::string rest;
        std::getline(is, rest);
        std::istringstream ris(rest);
        Q.vstabs.push_back(get_quats(ris));
    }
    is >> tag >> ne;
    if (tag != "E") throw HypothesisError("corrupt cache: edge section");
    for (size_t i = 0; i < ne; i++) {
        QEdge e;
        std::string ot, tt;
        is >> ot >> tt >> e.from >> e.to;
        e.rep = TreeEdge{TreeVertex::parse(ot), TreeVertex::parse(tt)};
        std::string rest;
        std::getline(is, rest);
        std::istringstream ris(rest);
        e.estab = get_quats(ris);
        std::string ft;
        ris >> ft;
        if (ft != "-") e.flip = Quat::parse(ft);
        Q.edges.push_back(e);
    }
    is >> tag >> ns;
    if (tag != "S") throw HypothesisError("corrupt cache: star section");
    Q.stars.resize(ns);
    for (size_t i = 0; i < ns; i++) {
        size_t k;
        is >> k;
        for (size_t j = 0; j < k; j++) {
            Incid inc;
            int rv;
            std::string qt;
            is >> inc.orbit >> rv >> qt;
            inc.rev = rv != 0;
            inc.h = Quat::parse(qt);
            Q.stars[i].push_back(inc);
        }
    }
    return Q;
}

} // namespace mf

#pragma once

// Dense linear algebra over the finite-precision p-adic scalar. Eigen supplies
// the container and expression machinery; everything a non-archimedean field
// needs beyond that (valuation pivoting, Newton slopes, slope projectors,
// semilinear restriction of scalars) lives here as free functions.

#include <mumford/field.hpp>

#include <Eigen/Core>

#include <numeric>
#include <utility>
#include <vector>

namespace Eigen {
template <>
struct NumTraits<mf::Qp> : GenericNumTraits<mf::Qp> {
    typedef mf::Qp Real;
    typedef mf::Qp NonInteger;
    typedef mf::Qp Nested;
    typedef mf::Qp Literal;
    enum {
        IsComplex = 0,
        IsInteger = 0,
        IsSigned = 1,
        RequireInitialization = 1,
        ReadCost = 2,
        AddCost = 8,
        MulCost = 16,
    };
    static inline int digits10() { return 0; }
};
} // namespace Eigen

namespace mf {

using MatQ = Eigen::Matrix<Qp, Eigen::Dynamic, Eigen::Dynamic>;
using VecQ = Eigen::Matrix<Qp, Eigen::Dynamic, 1>;

// exact rational, used for Newton-polygon slopes
struct Frac {
    long num = 0;
    long den = 1;
    friend bool operator==(const Frac& x, const Frac& y) {
        return (long long)x.num * y.den == (long long)y.num * x.den;
    }
    friend bool operator<(const Frac& x, const Frac& y) {
        return (long long)x.num * y.den < (long long)y.num * x.den;
    }
};

inline Frac make_frac(long n, long d) {
    if (d < 0) { n = -n; d = -d; }
    long g = std::gcd(n < 0 ? -n : n, d);
    if (g > 1) { n /= g; d /= g; }
    return Frac{n, d};
}

// ---- row reduction with valuation pivoting -------------------------------

struct RowEchelon {
    MatQ R;                  // reduced row-echelon form (of the augmented input)
    std::vector<int> pivots; // pivot column of each pivot row
    int rank = 0;
    int swaps = 0;
    std::vector<Qp> pivot_values; // pre-normalization pivots (for determinants)
};

// Reduce A in place; only the first `lead_cols` columns are eligible as
// pivots (the rest ride along, e.g. an augmented right-hand side).
inline RowEchelon row_echelon(MatQ A, int lead_cols = -1) {
    const int m = (int)A.rows(), n = (int)A.cols();
    if (lead_cols < 0) lead_cols = n;
    RowEchelon E;
    int r = 0;
    for (int c = 0; c < lead_cols && r < m; c++) {
        int best = -1;
        for (int i = r; i < m; i++) {
            if (A(i, c).is_zero()) continue;
            if (best < 0 || A(i, c).v < A(best, c).v ||
                (A(i, c).v == A(best, c).v && A(i, c).N > A(best, c).N))
                best = i;
        }
        if (best < 0) continue;
        if (best != r) { A.row(best).swap(A.row(r)); E.swaps++; }
        Qp piv = A(r, c);
        E.pivot_values.push_back(piv);
        Qp pi = piv.inv();
        for (int j = c; j < n; j++) A(r, j) = A(r, j) * pi;
        for (int i = 0; i < m; i++) {
            if (i == r || A(i, c).is_zero()) continue;
            Qp f = A(i, c);
            for (int j = c; j < n; j++) A(i, j) = A(i, j) - f * A(r, j);
        }
        E.pivots.push_back(c);
        r++;
    }
    E.rank = r;
    E.R = std::move(A);
    return E;
}

template <typename D>
int rank(const Eigen::MatrixBase<D>& a) {
    return row_echelon(MatQ(a.derived())).rank;
}

// columns span the (numerical) null space
template <typename D>
MatQ kernel(const Eigen::MatrixBase<D>& a) {
    MatQ A = a.derived();
    const int n = (int)A.cols();
    RowEchelon E = row_echelon(std::move(A));
    std::vector<char> is_piv(n, 0);
    for (int c : E.pivots) is_piv[c] = 1;
    MatQ K = MatQ::Zero(n, n - E.rank);
    int k = 0;
    for (int c = 0; c < n; c++) {
        if (is_piv[c]) continue;
        K(c, k) = Qp(1);
        for (int r = 0; r < E.rank; r++) K(E.pivots[r], k) = -E.R(r, c);
        k++;
    }
    return K;
}

// one solution of A X = B (free variables set to 0); throws if inconsistent
template <typename D1, typename D2>
MatQ solve(const Eigen::MatrixBase<D1>& a, const Eigen::MatrixBase<D2>& b) {
    MatQ A = a.derived();
    MatQ B = b.derived();
    const int n = (int)A.cols(), w = (int)B.cols();
    MatQ Aug(A.rows(), n + w);
    Aug << A, B;
    RowEchelon E = row_echelon(std::move(Aug), n);
    for (int i = E.rank; i < E.R.rows(); i++)
        for (int j = n; j < n + w; j++)
            if (!E.R(i, j).is_zero())
                throw HypothesisError("inconsistent linear system");
    MatQ X = MatQ::Zero(n, w);
    for (int r = 0; r < E.rank; r++) X.row(E.pivots[r]) = E.R.block(r, n, 1, w);
    return X;
}

template <typename D>
MatQ inverse(const Eigen::MatrixBase<D>& a) {
    MatQ A = a.derived();
    if (A.rows() != A.cols()) throw HypothesisError("inverse of a non-square matrix");
    const int n = (int)A.rows();
    if (rank(A) != n) throw HypothesisError("inverse of a singular matrix");
    return solve(A, MatQ::Identity(n, n));
}

template <typename D>
Qp det(const Eigen::MatrixBase<D>& a) {
    MatQ A = a.derived();
    if (A.rows() != A.cols()) throw HypothesisError("determinant of a non-square matrix");
    const int n = (int)A.rows();
    RowEchelon E = row_echelon(std::move(A));
    if (E.rank < n) return Qp::zero_at(ctx().W);
    Qp d(E.swaps % 2 ? -1 : 1);
    for (const Qp& piv : E.pivot_values) d = d * piv;
    return d;
}

// ---- polynomials over the scalar ------------------------------------------

struct Poly {
    std::vector<Qp> c; // c[i] is the coefficient of x^i

    int deg() const { return (int)c.size() - 1; }

    Qp eval(const Qp& x) const {
        Qp s = Qp::zero_at(ctx().W + (x.is_zero() ? 0 : 4 * std::abs(x.v)));
        for (int i = deg(); i >= 0; i--) s = s * x + c[i];
        return s;
    }

    MatQ eval_matrix(const MatQ& A) const {
        const int n = (int)A.rows();
        MatQ S = MatQ::Zero(n, n);
        for (int i = deg(); i >= 0; i--) {
            S = S * A;
            for (int d = 0; d < n; d++) S(d, d) += c[i];
        }
        return S;
    }

    Poly operator*(const Poly& o) const {
        Poly r;
        r.c.assign(c.size() + o.c.size() - 1, Qp(0));
        for (size_t i = 0; i < c.size(); i++)
            for (size_t j = 0; j < o.c.size(); j++) r.c[i + j] += c[i] * o.c[j];
        return r;
    }

    Poly operator+(const Poly& o) const {
        Poly r;
        r.c.assign(std::max(c.size(), o.c.size()), Qp(0));
        for (size_t i = 0; i < c.size(); i++) r.c[i] += c[i];
        for (size_t i = 0; i < o.c.size(); i++) r.c[i] += o.c[i];
        return r;
    }

    Poly derivative() const {
        Poly r;
        if (c.size() <= 1) { r.c = {Qp(0)}; return r; }
        r.c.resize(c.size() - 1);
        for (size_t i = 1; i < c.size(); i++) r.c[i - 1] = Qp((long)i) * c[i];
        return r;
    }
};

// division-free characteristic polynomial (Berkowitz); avoids the exact
// small-integer divisions of trace-based schemes, which destroy precision here
template <typename D>
Poly charpoly(const Eigen::MatrixBase<D>& a) {
    MatQ A = a.derived();
    const int n = (int)A.rows();
    if (n != A.cols()) throw HypothesisError("char poly of a non-square matrix");
    if (n == 0) return Poly{{Qp(1)}};
    // pv holds coefficients of det(xI - leading block), highest degree first
    std::vector<Qp> pv = {Qp(1), -A(0, 0)};
    for (int r = 1; r < n; r++) {
        MatQ B = A.topLeftCorner(r, r);
        MatQ R = A.block(r, 0, 1, r);
        MatQ C = A.block(0, r, r, 1);
        std::vector<Qp> s(r + 2);
        s[0] = Qp(1);
        s[1] = -A(r, r);
        MatQ w = C;
        for (int j = 0; j + 2 <= r + 1; j++) {
            s[j + 2] = -(R * w)(0, 0);
            w = B * w;
        }
        std::vector<Qp> nv(r + 2, Qp(0));
        for (int i = 0; i < r + 2; i++)
            for (int j = 0; j <= std::min(i, r); j++) nv[i] += s[i - j] * pv[j];
        pv = std::move(nv);
    }
    Poly f;
    f.c.resize(n + 1);
    for (int i = 0; i <= n; i++) f.c[i] = pv[n - i];
    return f;
}

// root valuations with multiplicities, ascending (lower Newton polygon)
inline std::vector<std::pair<Frac, int>> newton_slopes(const Poly& f) {
    std::vector<std::pair<long, long>> pts; // (index, valuation)
    for (int i = 0; i <= f.deg(); i++)
        if (!f.c[i].is_zero()) pts.push_back({i, f.c[i].v});
    if (pts.size() < 2) throw HypothesisError("newton polygon of a (near-)zero polynomial");
    // lower convex hull, left to right
    std::vector<std::pair<long, long>> hull;
    for (auto& pt : pts) {
        while (hull.size() >= 2) {
            auto& a = hull[hull.size() - 2];
            auto& b = hull[hull.size() - 1];
            // keep b only if it lies strictly below segment a->pt
            if ((long long)(b.second - a.second) * (pt.first - a.first) <
                (long long)(pt.second - a.second) * (b.first - a.first))
                break;
            hull.pop_back();
        }
        hull.push_back(pt);
    }
    std::vector<std::pair<Frac, int>> out;
    for (size_t i = 0; i + 1 < hull.size(); i++) {
        long di = hull[i + 1].first - hull[i].first;
        long dv = hull[i].second - hull[i + 1].second; // root valuation numerator
        out.push_back({make_frac(dv, di), (int)di});
    }
    std::sort(out.begin(), out.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    return out;
}

inline MatQ mat_pow(MatQ A, unsigned long e) {
    const int n = (int)A.rows();
    MatQ R = MatQ::Identity(n, n);
    while (e) {
        if (e & 1) R = R * A;
        e >>= 1;
        if (e) A = A * A;
    }
    return R;
}

namespace detail {

inline bool mat_agree(const MatQ& A, const MatQ& B, int k) {
    for (int i = 0; i < A.rows(); i++)
        for (int j = 0; j < A.cols(); j++)
            if (!A(i, j).eq(B(i, j), k)) return false;
    return true;
}

// limit of B^(E p^j): the projector onto the generalized eigenspace of the
// unit eigenvalues, assuming no eigenvalue of negative valuation
inline MatQ unit_root_projector(const MatQ& B) {
    const FieldContext& F = ctx();
    const int n = (int)B.rows();
    long q = F.mu == 2 ? F.p * F.p : F.p;
    MatQ C = B;
    unsigned long qk = 1;
    for (int k = 1; k <= n; k++) {
        qk *= (unsigned long)q;
        C = mat_pow(C, qk - 1);
    }
    for (int j = 0; j < 6 * F.W + 24; j++) {
        MatQ Cn = mat_pow(C, (unsigned long)F.p);
        if (mat_agree(Cn, C, F.W)) return Cn;
        C = std::move(Cn);
    }
    throw PrecisionError("slope projector iteration did not stabilize");
}

} // namespace detail

// Decompose the space into generalized eigenspaces grouped by eigenvalue
// valuation. Returns (valuation, projector) pairs, ascending, summing to 1.
template <typename D>
std::vector<std::pair<Frac, MatQ>> slope_projectors(const Eigen::MatrixBase<D>& a) {
    MatQ A = a.derived();
    const FieldContext& F = ctx();
    const int n = (int)A.rows();
    auto slopes = newton_slopes(charpoly(A));
    std::vector<std::pair<Frac, MatQ>> out;
    if (slopes.size() == 1) {
        out.push_back({slopes[0].first, MatQ::Identity(n, n)});
        return out;
    }
    MatQ R = A;
    MatQ total = MatQ::Zero(n, n);
    for (size_t s = 0; s < slopes.size(); s++) {
        MatQ pi;
        if (s + 1 == slopes.size()) {
            pi = MatQ::Identity(n, n) - total;
        } else {
            Frac sl = slopes[s].first;
            MatQ B = mat_pow(R, (unsigned long)sl.den) * Qp::pow_p(1).pow(-sl.num);
            pi = detail::unit_root_projector(B);
        }
        out.push_back({slopes[s].first, pi});
        total += pi;
        MatQ co = MatQ::Identity(n, n) - total;
        R = co * A * co;
    }
    for (size_t s = 0; s < out.size(); s++)
        if (rank(out[s].second) != slopes[s].second)
            throw InvariantError("slope projector rank disagrees with the Newton polygon");
    if (!detail::mat_agree(total, MatQ::Identity(n, n), F.W - 4))
        throw InvariantError("slope projectors do not sum to the identity");
    return out;
}

// ---- semilinear maps via restriction of scalars ---------------------------

template <typename D>
typename D::PlainObject frobenius_entries(const Eigen::MatrixBase<D>& a) {
    typename D::PlainObject A = a.derived();
    for (int i = 0; i < A.rows(); i++)
        for (int j = 0; j < A.cols(); j++) A(i, j) = frobenius(A(i, j));
    return A;
}

// components x = x1 + w x2 with x1, x2 over the prime field
inline std::pair<Qp, Qp> split_scalar(const Qp& z) {
    if (z.is_zero()) return {z, z};
    return {Qp::from_parts(z.v, z.a, 0, z.N), Qp::from_parts(z.v, z.b, 0, z.N)};
}

inline VecQ split_vector(const VecQ& x) {
    const int n = (int)x.size();
    VecQ y(2 * n);
    for (int i = 0; i < n; i++) {
        auto [u, w] = split_scalar(x(i));
        y(i) = u;
        y(n + i) = w;
    }
    return y;
}

inline VecQ merge_vector(const VecQ& y) {
    const int n = (int)y.size() / 2;
    Qp w = Qp::gen();
    VecQ x(n);
    for (int i = 0; i < n; i++) x(i) = y(i) + w * y(n + i);
    return x;
}

// the prime-field-linear matrix of x -> A sigma(x) in the components above
template <typename D>
MatQ semilinear_restriction(const Eigen::MatrixBase<D>& a) {
    MatQ A = a.derived();
    const int m = (int)A.rows(), n = (int)A.cols();
    MatQ A1(m, n), A2(m, n);
    for (int i = 0; i < m; i++)
        for (int j = 0; j < n; j++) {
            auto [u, w] = split_scalar(A(i, j));
            A1(i, j) = u;
            A2(i, j) = w;
        }
    Qp r((long)ctx().r);
    MatQ M(2 * m, 2 * n);
    M << A1, -(r * A2).eval(), A2, -A1;
    return M;
}

} // namespace mf

#include <mumford/btree.hpp>

#include <sstream>

namespace mf {

long long ipow(long p, int k) {
    long long r = 1;
    for (int i = 0; i < k; i++) {
        if (r > (long long)2e18 / p) throw PrecisionError("tree coordinate overflow");
        r *= p;
    }
    return r;
}

TreeVertex::TreeVertex(int a_, long long c_, int e_) : a(a_), c(c_), e(e_) {
    long p = ctx().p;
    if (e < 0) throw HypothesisError("negative denominator exponent");
    if (a + e <= 0 || c == 0) {
        c = 0;
        e = 0;
        return;
    }
    long long m = ipow(p, a + e);
    c %= m;
    if (c < 0) c += m;
    while (e > 0 && c % p == 0) {
        c /= p;
        e--;
    }
    if (c == 0) e = 0;
}

Qp TreeVertex::u() const { return Qp::rational(c, ipow(ctx().p, e)); }

std::string TreeVertex::serialize() const {
    std::ostringstream os;
    os << a << ":" << c << ":" << e;
    return os.str();
}

TreeVertex TreeVertex::parse(const std::string& s) {
    std::istringstream is(s);
    int a, e;
    long long c;
    char sep1, sep2;
    if (!(is >> a >> sep1 >> c >> sep2 >> e) || sep1 != ':' || sep2 != ':')
        throw HypothesisError("unparseable tree vertex: " + s);
    return TreeVertex(a, c, e);
}

TreeVertex tree_parent(const TreeVertex& v) { return TreeVertex(v.a - 1, v.c, v.e); }

std::vector<TreeVertex> tree_children(const TreeVertex& v) {
    long p = ctx().p;
    std::vector<TreeVertex> out;
    long long step = ipow(p, v.a + v.e < 0 ? 0 : v.a + v.e);
    for (long j = 0; j < p; j++) {
        if (v.a + v.e < 0) {
            // all classes mod p^(a+1) through u = 0: c' = j / p^(-a)  (e = -a)
            out.push_back(TreeVertex(v.a + 1, j, -v.a));
        } else {
            out.push_back(TreeVertex(v.a + 1, v.c + j * step, v.e));
        }
    }
    return out;
}

std::vector<TreeVertex> neighbors(const TreeVertex& v) {
    std::vector<TreeVertex> out = tree_children(v);
    out.push_back(tree_parent(v));
    return out;
}

int tree_distance(const TreeVertex& v, const TreeVertex& w) {
    long p = ctx().p;
    // m = val(u_v - u_w)
    __int128 num = (__int128)v.c * ipow(p, w.e) - (__int128)w.c * ipow(p, v.e);
    int m;
    if (num == 0) {
        m = 1 << 20;
    } else {
        if (num < 0) num = -num;
        int vn = 0;
        while (num % p == 0) {
            num /= p;
            vn++;
        }
        m = vn - v.e - w.e;
    }
    int c = std::min({m, v.a, w.a});
    return (v.a - c) + (w.a - c);
}

std::pair<long long, int> rational_approx(const Qp& q, int k) {
    long p = ctx().p;
    if (q.is_zero()) {
        if (q.N < k) throw PrecisionError("not enough digits for an exact tree coordinate", q.N);
        return {0, 0};
    }
    if (q.N < k) throw PrecisionError("not enough digits for an exact tree coordinate", q.N);
    int e = q.v < 0 ? -q.v : 0;
    if (k + e <= 0) return {0, 0};
    // q * p^e = p^(v+e) * unit; b-part must vanish to the needed depth
    int shift = q.v + e;
    if (shift >= k + e) return {0, 0};
    int digits = k + e - shift;
    if (digits > q.rel()) throw PrecisionError("not enough digits for an exact tree coordinate", q.N);
    uint64_t mod = ctx().ppow[digits];
    if (q.b % mod != 0) throw HypothesisError("tree coordinate is not in the prime field");
    long long cc = (long long)(q.a % mod) * ipow(p, shift);
    return {cc % ipow(p, k + e), e};
}

static void require_prime_field(const MatQ& g) {
    for (int i = 0; i < g.rows(); i++)
        for (int j = 0; j < g.cols(); j++)
            if (!g(i, j).is_zero() && g(i, j).b != 0)
                throw HypothesisError("tree action needs prime-field matrix entries");
}

TreeVertex act_vertex(const MatQ& g, const TreeVertex& v) {
    require_prime_field(g);
    MatQ V(2, 2);
    V(0, 0) = Qp::pow_p(v.a);
    V(0, 1) = v.u();
    V(1, 0) = Qp(0);
    V(1, 1) = Qp(1);
    MatQ M = g * V;
    // column Hermite reduction to [[p^a', u'], [0, 1]]
    Qp m10 = M(1, 0), m11 = M(1, 1);
    if (m10.is_zero() && m11.is_zero())
        throw PrecisionError("tree action lost the bottom row to precision");
    bool swap = m11.is_zero() || (!m10.is_zero() && m10.v < m11.v);
    if (swap) M.col(0).swap(M.col(1));
    Qp f = M(1, 0) / M(1, 1);
    M.col(0) -= (M.col(1) * f).eval();
    Qp d = M(1, 1);
    Qp x = M(0, 0) / d;
    Qp y = M(0, 1) / d;
    if (x.is_zero()) throw PrecisionError("tree action lost a pivot to precision");
    int a2 = x.v;
    auto [cc, ee] = rational_approx(y, a2);
    return TreeVertex(a2, cc, ee);
}

TreeEdge act_edge(const MatQ& g, const TreeEdge& e) {
    return TreeEdge{act_vertex(g, e.o), act_vertex(g, e.t)};
}

Qp act_point(const MatQ& g, const Qp& z) {
    Qp den = g(1, 0) * z + g(1, 1);
    if (den.is_zero()) throw PrecisionError("Moebius image at infinity or below precision");
    return (g(0, 0) * z + g(0, 1)) / den;
}

TreeVertex reduction(const Qp& z) {
    auto [x, y] = split_scalar(z);
    if (y.is_zero()) throw HypothesisError("reduction needs a point outside the prime field");
    int a = y.v;
    auto [cc, ee] = rational_approx(x, a);
    return TreeVertex(a, cc, ee);
}

Ball edge_ball(const TreeEdge& ed) {
    const TreeVertex &v = ed.o, &w = ed.t;
    if (w.a == v.a + 1 && tree_parent(w) == v) return Ball{false, w.c, w.e, w.a};
    if (v.a == w.a + 1 && tree_parent(v) == w) return Ball{true, v.c, v.e, v.a};
    throw HypothesisError("edge_ball: the pair is not an edge in normal form");
}

Qp ball_center(const Ball& B) { return Qp::rational(B.c, ipow(ctx().p, B.e)); }

Qp ball_sample(const Ball& B) {
    if (!B.complement) return ball_center(B);
    return ball_center(B) + Qp::pow_p(B.k - 1);
}

std::vector<TreeEdge> tree_geodesic(const TreeVertex& a, const TreeVertex& b) {
    std::vector<TreeEdge> path;
    TreeVertex cur = a;
    for (int d = tree_distance(a, b); d > 0; d--)
        for (const TreeVertex& w : neighbors(cur))
            if (tree_distance(w, b) == d - 1) {
                path.push_back({cur, w});
                cur = w;
                break;
            }
    return path;
}

bool ball_contains(const Ball& B, const Qp& z) {
    Qp d = z - ball_center(B);
    bool inside;
    if (d.is_zero()) {
        if (d.N < B.k) throw PrecisionError("ball membership undecidable at this precision", d.N);
        inside = true;
    } else {
        inside = d.v >= B.k;
    }
    return B.complement ? !inside : inside;
}

} // namespace mf

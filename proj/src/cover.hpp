#pragma once

// Internal machinery shared by the boundary integrators: polynomial frame
// changes, the deterministic level-by-level enumeration of the ball cover of
// the boundary line, ball moments in the representative frame, and the
// per-ball mass bound of a distribution. Not part of the public interface.

#include <mumford/coleman.hpp>

#include <map>
#include <vector>

namespace mf {
namespace cover {

inline int vp_int(long long i, long p) {
    int v = 0;
    while (i % p == 0) {
        i /= p;
        v++;
    }
    return v;
}

// valuation lower bound usable for a coefficient that may be a precision zero
inline long long val_floor(const Qp& x) { return x.is_zero() ? x.N : x.v; }

inline VecQ pad(const VecQ& a, int n) {
    VecQ r = VecQ::Zero(n + 1);
    for (int i = 0; i < a.size(); i++) {
        if (i > n) {
            if (!a(i).is_zero()) throw HypothesisError("kernel polynomial degree too large");
            continue;
        }
        r(i) = a(i);
    }
    return r;
}

// coefficients of A(c + x) in x
inline VecQ shift_poly(const VecQ& a, const Qp& c) {
    int n = (int)a.size() - 1;
    VecQ out = VecQ::Zero(n + 1);
    for (int i = 0; i <= n; i++) {
        Qp pw = Qp(1);
        for (int k = i; k >= 0; k--) {
            out(k) += a(i) * Qp(binom(i, k)) * pw;
            pw = pw * c;
        }
    }
    return out;
}

// global coefficients of (t - c)^i, padded to degree n
inline VecQ local_monomial(const Qp& c, int i, int n) {
    VecQ P = VecQ::Zero(n + 1);
    Qp pw = Qp(1);
    for (int k = i; k >= 0; k--) {
        P(k) = Qp(binom(i, k)) * pw;
        pw = pw * (-c);
    }
    return P;
}

inline bool is_zero_vec(const VecQ& a) {
    for (int i = 0; i < a.size(); i++)
        if (!a(i).is_zero()) return false;
    return true;
}

struct Node {
    TreeEdge e;
    int orbit;
    Quat g; // e = g * (orbit rep, possibly reversed)
    bool rev;
};

// deterministic level-by-level enumeration of the cover, extending each edge
// through the star of its terminal vertex class with exact transporters
struct Walker {
    ArithGroup& G;
    const QuotientGraph& Q;
    std::map<std::pair<int, int>, std::pair<int, Quat>> ends;
    Walker(ArithGroup& G_, const QuotientGraph& Q_) : G(G_), Q(Q_) {}

    TreeEdge rep_edge(int orbit, bool rev) const {
        TreeEdge r = Q.edges[(size_t)orbit].rep;
        return rev ? r.reversed() : r;
    }

    std::vector<Node> initial() {
        std::vector<Node> out;
        for (const auto& inc : Q.stars[0]) {
            TreeEdge e = act_edge(G.mat(inc.h), rep_edge(inc.orbit, inc.rev));
            out.push_back({e, inc.orbit, inc.h, inc.rev});
        }
        return out;
    }

    std::vector<Node> expand(const Node& nd) {
        auto key = std::make_pair(nd.orbit, (int)nd.rev);
        auto it = ends.find(key);
        if (it == ends.end())
            it = ends.emplace(key, locate_vertex(G, Q, rep_edge(nd.orbit, nd.rev).t)).first;
        Quat base = G.mul(nd.g, it->second.second);
        std::vector<Node> out;
        for (const auto& inc : Q.stars[(size_t)it->second.first]) {
            Quat q = G.mul(base, inc.h);
            TreeEdge ec = act_edge(G.mat(q), rep_edge(inc.orbit, inc.rev));
            if (!(ec.o == nd.e.t)) throw InvariantError("cover expansion left the star");
            if (ec.t == nd.e.o) continue;
            out.push_back({ec, inc.orbit, q, inc.rev});
        }
        if ((long)out.size() != ctx().p) throw InvariantError("cover expansion count");
        return out;
    }
};

// the splitting is an algebra map, so det(mat(g)) equals the reduced norm
// exactly; computing it from the matrix entries loses all digits once the
// norm valuation approaches the working precision
inline Qp exact_det(ArithGroup& G, const Quat& g) {
    QRat nr = G.B.nrd(g);
    return Qp::rational((long)nr.num, (long)nr.den);
}

inline Qp node_moment(ArithGroup& G, const EdgeCochain& f, const Node& nd, const VecQ& P) {
    // pull the polynomial back to the representative's frame; the pairing is
    // invariant under the weight action of the norm-one group; for M = mat(g)
    // the inverse weight action is rho_n(M) det(M)^(m-n)
    VecQ Pt = VecQ(rho_n(G.mat(nd.g), f.n) * P) * exact_det(G, nd.g).pow(f.m - f.n);
    Qp s = rep_pair(f.vals[(size_t)nd.orbit], Pt);
    return nd.rev ? Qp(Qp(0) - s) : s;
}

// per-ball mass bound: the distribution applied to any function of sup-norm
// one on the ball (in the ball's own coordinate) has valuation at least
// min_i [val(moment of (t-c)^i) - grade(i) * j]; the slope-graded growth law
// from the shift-operator structure extends this to all refinements, so the
// discarded kernel tail integrates to at least tail_val plus this bound
inline long long mass_bound(ArithGroup& G, const EdgeCochain& f, const Node& nd) {
    Ball B = edge_ball(nd.e);
    long long j = B.complement ? 1 - B.k : B.k;
    Qp c = ball_center(B);
    long long m = LLONG_MAX;
    for (int i = 0; i <= f.n; i++) {
        Qp mi = node_moment(G, f, nd, local_monomial(c, i, f.n));
        // on the outer ball (t - c)^i is the (-i)-th power of the ball
        // coordinate u = 1/(t - c), so the graded anchor changes sign
        long long grade = B.complement ? -(long long)i : (long long)i;
        m = std::min(m, val_floor(mi) - grade * j);
    }
    return m;
}

} // namespace cover
} // namespace mf

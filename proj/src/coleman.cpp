#include <mumford/coleman.hpp>

#include "cover.hpp"

#include <json.hpp>

#include <algorithm>
#include <climits>
#include <map>
#include <optional>
#include <utility>

namespace mf {

using namespace cover;

namespace {

// nullopt means the log series does not converge on this ball and the caller
// must refine; any other problem throws
std::optional<BallSeries> try_expand(const LogKernel& k, const TreeEdge& e, int n) {
    VecQ Qc = pad(k.Q, n), Hc = pad(k.H, n);
    if (is_zero_vec(Qc) || (k.z2 - k.z1).is_zero()) return BallSeries{Hc, INT32_MAX};

    Ball B = edge_ball(e);
    Qp c = ball_center(B);
    Qp d1 = c - k.z1, d2 = c - k.z2;
    if (d1.is_zero() || d2.is_zero())
        throw PrecisionError("kernel endpoint indistinguishable from a ball center", d1.N);
    long p = ctx().p;
    const int SCAN = 200;

    VecQ qs = shift_poly(Qc, c);
    VecQ h = shift_poly(Hc, c);
    long long tail = INT32_MAX;
    // d1^b - d2^b = (d1 - d2) * sum d1^i d2^(b-1-i) lifts every difference
    // bound by val(z2 - z1) - min(w1, w2); on balls far from both endpoints
    // this gain grows with the distance and is what keeps the certificate
    // increasing with the depth
    long long boost = val_floor(k.z2 - k.z1) - std::min(d1.v, d2.v);

    // the first EXACT tail coefficients carry cancellations (the polynomial
    // factor evaluated near the endpoints) that no valuation floor can see;
    // beyond the window the analytic floors take over
    const int EXACT = 16;

    if (!B.complement) {
        int j = B.k;
        int wmax = std::max(d1.v, d2.v);
        if (j - wmax < 1) return std::nullopt;
        // log((t-z2)/(t-z1)) = log(d2/d1) + sum_{i>=1} (-1)^(i+1)/i (d2^-i - d1^-i) x^i
        VecQ l(n + EXACT + 1);
        l(0) = plog(d2 / d1);
        Qp i1 = Qp(1) / d1, i2 = Qp(1) / d2;
        Qp p1 = Qp(1), p2 = Qp(1);
        for (int i = 1; i <= n + EXACT; i++) {
            p1 = p1 * i1;
            p2 = p2 * i2;
            l(i) = Qp::rational(i % 2 ? 1 : -1, i) * (p2 - p1);
        }
        for (int a = 0; a <= n; a++)
            for (int b = 0; a + b <= n; b++) h(a + b) += qs(a) * l(b);
        for (int nu = n + 1; nu <= n + EXACT; nu++) {
            Qp cnu = Qp::zero_at(ctx().W);
            for (int a = 0; a <= n; a++) cnu += qs(a) * l(nu - a);
            tail = std::min(tail, val_floor(cnu) + (long long)nu * j);
        }
        for (int nu = n + EXACT + 1; nu <= n + EXACT + SCAN; nu++) {
            long long best = INT32_MAX;
            for (int a = 0; a <= n; a++) {
                int b = nu - a;
                if (b < 1) continue;
                best = std::min(best,
                                val_floor(qs(a)) + boost - (long long)b * wmax - vp_int(b, p));
            }
            tail = std::min(tail, best + (long long)nu * j);
        }
    } else {
        // u = 1/(t - c) has valuation >= 1 - k on the outer ball;
        // log((t-z2)/(t-z1)) = sum_{i>=1} (-1)^(i+1)/i (d2^i - d1^i) u^i
        int j = 1 - B.k;
        int wmin = std::min(d1.v, d2.v);
        if (j + wmin < 1) return std::nullopt;
        VecQ l = VecQ::Zero(n + EXACT + 1);
        Qp p1 = Qp(1), p2 = Qp(1);
        for (int i = 1; i <= n + EXACT; i++) {
            p1 = p1 * d1;
            p2 = p2 * d2;
            l(i) = Qp::rational(i % 2 ? 1 : -1, i) * (p2 - p1);
        }
        // Q(c + 1/u) = sum_a qs(a) u^(-a); the i <= a part of the product is
        // polynomial in x = t - c, the rest decays like u^nu
        for (int a = 0; a <= n; a++)
            for (int i = 1; i <= a; i++) h(a - i) += qs(a) * l(i);
        for (int nu = 1; nu <= EXACT; nu++) {
            Qp cnu = Qp::zero_at(ctx().W);
            for (int a = 0; a <= n; a++) cnu += qs(a) * l(nu + a);
            tail = std::min(tail, val_floor(cnu) + (long long)nu * j);
        }
        for (int nu = EXACT + 1; nu <= EXACT + SCAN; nu++) {
            long long best = INT32_MAX;
            for (int a = 0; a <= n; a++)
                best = std::min(best, val_floor(qs(a)) + boost + (long long)(nu + a) * wmin -
                                          vp_int(nu + a, p));
            tail = std::min(tail, best + (long long)nu * j);
        }
    }
    BallSeries out;
    out.head = shift_poly(h, -c);
    out.tail_val = (int)std::min<long long>(tail, INT32_MAX);
    return out;
}

// pull the kernel back through the transporter: the weight action on
// sections sends K to det^(m-n) (c s + d)^n K(M s), which is again a log
// kernel with Moebius-moved endpoints and a constant absorbed into H
LogKernel pullback(const MatQ& M, const Qp& detM, const LogKernel& k, int n, int m) {
    MatQ R = rho_n(M, n);
    Qp s = detM.pow(m - n);
    LogKernel r;
    VecQ Qt = R * pad(k.Q, n);
    r.H = VecQ(R * pad(k.H, n)) * s;
    if (is_zero_vec(Qt) || (k.z2 - k.z1).is_zero()) {
        r.Q = VecQ::Zero(n + 1);
        r.z1 = Qp(0);
        r.z2 = Qp(0);
        return r;
    }
    // the adjugate acts projectively like the inverse and needs no division
    MatQ Mi(2, 2);
    Mi << M(1, 1), Qp(0) - M(0, 1), Qp(0) - M(1, 0), M(0, 0);
    r.z1 = act_point(Mi, k.z1);
    r.z2 = act_point(Mi, k.z2);
    Qp C = plog((M(0, 0) - k.z2 * M(1, 0)) / (M(0, 0) - k.z1 * M(1, 0)));
    r.Q = Qt * s;
    r.H += VecQ(Qt * (C * s));
    return r;
}

Qp ball_sum(Walker& W, const Node& nd, const LogKernel& k, const EdgeCochain& f, long long& cert,
            long long goal, std::map<std::pair<int, int>, long long>& mass, int budget) {
    // two valid frames for the same contribution: the ball's own coordinate,
    // and the representative's frame reached through the transporter (where
    // the cochain value is held directly); their error bounds are
    // complementary -- the pullback moves far balls away from the kernel's
    // polynomial growth but can move its singular points closer -- so take
    // whichever certificate is stronger
    TreeEdge re = W.rep_edge(nd.orbit, nd.rev);
    std::optional<BallSeries> bs_rep;
    try {
        LogKernel kp = pullback(W.G.mat(nd.g), exact_det(W.G, nd.g), k, f.n, f.m);
        bs_rep = try_expand(kp, re, f.n);
    } catch (const PrecisionError&) {
        // an endpoint lands at (or indistinguishably close to) infinity in
        // the representative's chart; the ball's own frame still applies
    }
    auto bs_org = try_expand(k, nd.e, f.n);
    long long cand = LLONG_MIN;
    bool exact = false;
    if (bs_rep || bs_org) {
        exact = (bs_rep && bs_rep->tail_val == INT32_MAX) ||
                (bs_org && bs_org->tail_val == INT32_MAX);
        if (!exact) {
            if (bs_rep) {
                auto key = std::make_pair(nd.orbit, (int)nd.rev);
                auto it = mass.find(key);
                if (it == mass.end()) {
                    Node rn{re, nd.orbit, Quat::one(), nd.rev};
                    it = mass.emplace(key, mass_bound(W.G, f, rn)).first;
                }
                cand = std::max(cand, (long long)bs_rep->tail_val + it->second);
            }
            if (bs_org)
                cand = std::max(cand, (long long)bs_org->tail_val + mass_bound(W.G, f, nd));
        }
    } else if (budget == 0) {
        throw PrecisionError("kernel series diverges on a cover ball; an endpoint lies on "
                             "the boundary line or the refinement bound is too small");
    }
    // refine adaptively: below the certificate goal every extra level tightens
    // both the truncation tail and the moment floor of the subdivided balls
    if (!exact && cand < goal && budget > 0) {
        if (bs_rep || bs_org) {
            // this ball already has a valid (if weak) bound; keep it should
            // the refinement run out of working precision
            try {
                Qp s = Qp::zero_at(ctx().W);
                for (const Node& ch : W.expand(nd))
                    s += ball_sum(W, ch, k, f, cert, goal, mass, budget - 1);
                return s;
            } catch (const PrecisionError&) {
            }
        } else {
            Qp s = Qp::zero_at(ctx().W);
            for (const Node& ch : W.expand(nd))
                s += ball_sum(W, ch, k, f, cert, goal, mass, budget - 1);
            return s;
        }
    }
    if (!exact) cert = std::min(cert, cand);
    if (bs_rep) {
        Qp s = rep_pair(f.vals[(size_t)nd.orbit], bs_rep->head);
        return nd.rev ? Qp(Qp(0) - s) : s;
    }
    return node_moment(W.G, f, nd, bs_org->head);
}

} // namespace

Qp moment(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f, const TreeEdge& e,
          const VecQ& P) {
    EdgeClass L = locate_edge(G, Q, e);
    Node nd{e, L.orbit, L.g, L.rev};
    return node_moment(G, f, nd, pad(P, f.n));
}

BallSeries kernel_on_ball(const LogKernel& k, const TreeEdge& e, int n) {
    if (auto bs = try_expand(k, e, n)) return *bs;
    throw PrecisionError("kernel series diverges on this ball; refine the cover");
}

std::string IntegrationReport::serialize_json() const {
    nlohmann::json j;
    j["value"] = value.serialize();
    j["depth"] = depth;
    if (cert_val == INT32_MAX)
        j["certified_error_valuation"] = "inf";
    else
        j["certified_error_valuation"] = cert_val;
    j["partials"] = nlohmann::json::array();
    for (const Qp& s : partials) j["partials"].push_back(s.serialize());
    return j.dump();
}

IntegrationReport integrate(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                            const LogKernel& k, int depth) {
    if (depth < 1) throw HypothesisError("integration depth must be at least 1");
    Walker W(G, Q);
    IntegrationReport rep;
    rep.depth = depth;
    std::vector<Node> level = W.initial();
    std::map<std::pair<int, int>, long long> mass;
    long long cert = LLONG_MAX;
    for (int d = 1; d <= depth; d++) {
        Qp s = Qp::zero_at(ctx().W);
        long long lc = LLONG_MAX;
        long long goal = 2LL * d - 3;
        for (const Node& nd : level) s += ball_sum(W, nd, k, f, lc, goal, mass, 24);
        rep.partials.push_back(s);
        if (d == depth) {
            cert = lc;
        } else {
            std::vector<Node> next;
            for (const Node& nd : level)
                for (Node& ch : W.expand(nd)) next.push_back(std::move(ch));
            level = std::move(next);
        }
    }
    rep.value = rep.partials.back();
    rep.cert_val = cert >= INT32_MAX ? INT32_MAX : (int)cert;
    if (rep.cert_val != INT32_MAX && rep.cert_val <= 0)
        throw PrecisionError("no digits certified at this depth", rep.cert_val);
    return rep;
}

// polynomial-in-t antiderivative in z of (Q(z) - Q(t)) / (z - t), at z
static VecQ correction_poly(const VecQ& Qc, const Qp& z) {
    int n = (int)Qc.size() - 1;
    VecQ H = VecQ::Zero(n + 1);
    for (int k = 1; k <= n; k++)
        for (int v = 0; v <= k - 1; v++) {
            int u = k - 1 - v;
            H(v) += Qc(k) * z.pow(u + 1) * Qp::rational(1, u + 1);
        }
    return H;
}

IntegrationReport coleman_integral(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                                   const Qp& za, const Qp& zb, const VecQ& P, int depth) {
    LogKernel k;
    k.Q = pad(P, f.n);
    k.z1 = za;
    k.z2 = zb;
    k.H = correction_poly(k.Q, zb) - correction_poly(k.Q, za);
    return integrate(G, Q, f, k, depth);
}

VecQ coleman_cocycle(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                     const Quat& gamma, const Qp& zeta, int depth) {
    int n = f.n;
    Qp gz = act_point(G.mat(gamma), zeta);
    MatQ rhs(n + 1, 1);
    for (int i = 0; i <= n; i++) {
        VecQ P = VecQ::Zero(n + 1);
        P(i) = Qp(1);
        rhs(i, 0) = coleman_integral(G, Q, f, zeta, gz, P, depth).value;
    }
    // the value is the coefficient vector dual to the integrals under the
    // invariant pairing: <z, t^i> = integral against t^i
    return solve(MatQ(pairing_matrix(n).transpose()), rhs).col(0);
}

} // namespace mf

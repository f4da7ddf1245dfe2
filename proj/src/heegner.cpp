#include <mumford/heegner.hpp>

#include "cover.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <climits>
#include <optional>

namespace mf {

using namespace cover;

std::pair<Qp, Qp> fixed_points(const MatQ& T) {
    Qp a = T(0, 0), b = T(0, 1), c = T(1, 0), d = T(1, 1);
    if (c.is_zero()) throw HypothesisError("a fixed point lies at infinity");
    Qp disc = (a - d) * (a - d) + Qp(4) * b * c;
    if (disc.is_zero())
        throw PrecisionError("the fixed points are indistinguishable at this precision", disc.N);
    Qp r = psqrt(disc);
    Qp den = (Qp(2) * c).inv();
    return {(a - d + r) * den, (a - d - r) * den};
}

Qp log_g(const Qp& x) {
    if (x.is_zero()) throw PrecisionError("logarithm of zero-at-precision", x.N);
    return plog(x / frobenius(x));
}

HeegnerDatum heegner_datum(ArithGroup& G, const Quat& psi) {
    if (G.B.trd(psi).num != 0)
        throw HypothesisError("the embedding element must be trace free");
    QRat nr = G.B.nrd(psi);
    if (nr.den != 1 || nr.num <= 0)
        throw HypothesisError("the embedding element must have positive integral norm");
    if (nr.num % G.p == 0)
        throw HypothesisError("the torus must be unramified at the working prime");

    HeegnerDatum H;
    H.psi = psi;
    H.D = nr.num;
    MatQ Mm = G.mat(psi);
    auto [w0, w1] = fixed_points(Mm);
    if (!frobenius(w0).eq(w1, ctx().M - 2))
        throw HypothesisError("the fixed points are rational; the torus is split at the prime");
    H.z0 = w0;
    H.z0bar = w1;
    H.P = pure_to_poly(Mm);
    const std::vector<Quat>& ws = G.norms(G.p);
    if (ws.empty()) throw HypothesisError("the order has no element of reduced norm p");
    H.wp = ws.front();
    return H;
}

namespace {

// exp((s - m - 1) * (log_g(t - z0) - lstar)) * Pm(t) on the boundary
struct ExpKernel {
    Qp sigma; // s - m - 1
    Qp z0, z0bar;
    Qp lstar; // log_g(star - z0)
    VecQ Pm;  // padded to degree n
};

// floor of nu * delta - (nu - 1)/(p - 1): the valuation gained by the
// nu-th power of the ball coordinate in the exponential series, where every
// term of the torus logarithm gains at least delta per degree and the
// factorials of the exponential lose at most 1/(p - 1) per degree
long long exp_gain(long long nu, long long delta, long p) {
    return nu * delta - (nu + p - 3) / (p - 1);
}

// truncation of the kernel on one ball; nullopt when the logarithm series
// does not converge there and the caller must refine
std::optional<BallSeries> exp_expand(const ExpKernel& k, const TreeEdge& e, int n) {
    if (k.sigma.is_zero()) return BallSeries{k.Pm, INT32_MAX};

    Ball B = edge_ball(e);
    Qp c = ball_center(B);
    Qp d1 = c - k.z0, d2 = c - k.z0bar;
    if (d1.is_zero() || d2.is_zero())
        throw PrecisionError("torus fixed point indistinguishable from a ball center", d1.N);
    long p = ctx().p;
    const int NEX = 16;

    long long j, delta;
    Qp lam0;
    std::vector<Qp> eps((size_t)NEX + 1, Qp(0));
    if (!B.complement) {
        // x = c + w, val(w) >= j: log_g(x - z0) = plog(d1/d2)
        //   + sum_{i>=1} (-1)^(i+1)/i (d1^-i - d2^-i) w^i
        j = B.k;
        delta = j - std::max(d1.v, d2.v);
        if (delta < 1) return std::nullopt;
        lam0 = plog(d1 / d2) - k.lstar;
        Qp i1 = Qp(1) / d1, i2 = Qp(1) / d2;
        Qp p1 = Qp(1), p2 = Qp(1);
        for (int i = 1; i <= NEX; i++) {
            p1 = p1 * i1;
            p2 = p2 * i2;
            eps[(size_t)i] = k.sigma * Qp::rational(i % 2 ? 1 : -1, i) * (p1 - p2);
        }
    } else {
        // u = 1/(x - c), val(u) >= j: log_g(x - z0) = -log of the conjugate
        // ratio at infinity plus sum_{i>=1} (-1)^(i+1)/i (d1^i - d2^i) u^i;
        // the constant term of log_g vanishes since u -> 0 sends the ratio
        // to 1
        j = 1 - B.k;
        delta = j + std::min(d1.v, d2.v);
        if (delta < 1) return std::nullopt;
        lam0 = Qp(0) - k.lstar;
        Qp p1 = Qp(1), p2 = Qp(1);
        for (int i = 1; i <= NEX; i++) {
            p1 = p1 * d1;
            p2 = p2 * d2;
            eps[(size_t)i] = k.sigma * Qp::rational(i % 2 ? 1 : -1, i) * (p1 - p2);
        }
    }

    // exp(sum eps_i y^i) = sum u_nu y^nu via the logarithmic-derivative
    // recursion; exact within working precision up to the window
    std::vector<Qp> u((size_t)NEX + 1, Qp(0));
    u[0] = Qp(1);
    for (int nu = 1; nu <= NEX; nu++) {
        Qp s = Qp::zero_at(ctx().W);
        for (int i = 1; i <= nu; i++) s += Qp(i) * eps[(size_t)i] * u[(size_t)(nu - i)];
        u[(size_t)nu] = s * Qp::rational(1, nu);
    }

    VecQ qs = shift_poly(k.Pm, c);
    VecQ h = VecQ::Zero(n + 1);
    long long tail = INT32_MAX;
    long long qmin = LLONG_MAX;
    if (!B.complement) {
        for (int a = 0; a <= n; a++) {
            for (int nu = 0; nu <= NEX; nu++) {
                int d = a + nu;
                if (d <= n)
                    h(d) += qs(a) * u[(size_t)nu];
                else
                    tail = std::min(tail, val_floor(Qp(qs(a) * u[(size_t)nu])) + (long long)d * j);
            }
            qmin = std::min(qmin, val_floor(qs(a)) + (long long)a * j);
        }
    } else {
        // Pm(c + 1/u) = sum_a qs(a) u^-a; the nu <= a part of the product is
        // polynomial in x - c, the rest decays with positive powers of u
        for (int a = 0; a <= n; a++) {
            for (int nu = 0; nu <= NEX; nu++) {
                if (nu <= a)
                    h(a - nu) += qs(a) * u[(size_t)nu];
                else
                    tail = std::min(tail, val_floor(Qp(qs(a) * u[(size_t)nu])) +
                                              (long long)(nu - a) * j);
            }
            qmin = std::min(qmin, val_floor(qs(a)) - (long long)a * j);
        }
    }
    tail = std::min(tail, exp_gain(NEX + 1, delta, p) + qmin);

    // the constant factor is a one-unit, so it does not move the tail bound
    Qp E = pexp(k.sigma * lam0);
    BallSeries out;
    out.head = VecQ(shift_poly(h, Qp(0) - c) * E);
    out.tail_val = (int)std::min<long long>(tail, INT32_MAX);
    return out;
}

Qp exp_ball_sum(Walker& W, const Node& nd, const ExpKernel& k, const EdgeCochain& f,
                long long& cert, long long goal, int budget) {
    auto bs = exp_expand(k, nd.e, f.n);
    bool exact = bs && bs->tail_val == INT32_MAX;
    long long cand = LLONG_MIN;
    if (bs && !exact) cand = (long long)bs->tail_val + mass_bound(W.G, f, nd);
    if (!bs && budget == 0)
        throw PrecisionError("torus kernel series diverges on a cover ball; the refinement "
                             "bound is too small");
    if (!exact && cand < goal && budget > 0) {
        if (bs) {
            // keep the weak bound should the refinement starve for digits
            try {
                Qp s = Qp::zero_at(ctx().W);
                for (const Node& ch : W.expand(nd))
                    s += exp_ball_sum(W, ch, k, f, cert, goal, budget - 1);
                return s;
            } catch (const PrecisionError&) {
            }
        } else {
            Qp s = Qp::zero_at(ctx().W);
            for (const Node& ch : W.expand(nd))
                s += exp_ball_sum(W, ch, k, f, cert, goal, budget - 1);
            return s;
        }
    }
    if (!exact) cert = std::min(cert, cand);
    return node_moment(W.G, f, nd, bs->head);
}

void check_balanced(const EdgeCochain& f) {
    if (f.n != 2 * f.m)
        throw HypothesisError("the torus L-function needs a balanced weight (n = 2m)");
}

void accumulate(IntegrationReport& tot, const IntegrationReport& r, bool first) {
    if (first) {
        tot = r;
        return;
    }
    tot.value += r.value;
    tot.cert_val = std::min(tot.cert_val, r.cert_val);
    for (size_t i = 0; i < tot.partials.size() && i < r.partials.size(); i++)
        tot.partials[i] += r.partials[i];
}

int agreement(const Qp& x, const Qp& y) {
    Qp d = x - y;
    return d.is_zero() ? INT32_MAX : (int)d.v;
}

} // namespace

IntegrationReport lp_partial(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                             const HeegnerDatum& H, const Qp& star, const Qp& s, int depth) {
    if (depth < 1) throw HypothesisError("integration depth must be at least 1");
    check_balanced(f);
    ExpKernel k;
    k.sigma = s - Qp(f.m + 1);
    if (!k.sigma.is_zero() && k.sigma.v < 0)
        throw HypothesisError("the evaluation point must be integral over the prime field");
    k.z0 = H.z0;
    k.z0bar = H.z0bar;
    k.lstar = log_g(star - H.z0);
    k.Pm = pad(poly_pow(H.P, f.m), f.n);

    Walker W(G, Q);
    IntegrationReport rep;
    rep.depth = depth;
    std::vector<Node> level = W.initial();
    long long cert = LLONG_MAX;
    for (int d = 1; d <= depth; d++) {
        Qp sum = Qp::zero_at(ctx().W);
        long long lc = LLONG_MAX;
        long long goal = 2LL * d - 3;
        for (const Node& nd : level) sum += exp_ball_sum(W, nd, k, f, lc, goal, 24);
        rep.partials.push_back(sum);
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

IntegrationReport lp_partial_derivative(ArithGroup& G, const QuotientGraph& Q,
                                        const EdgeCochain& f, const HeegnerDatum& H,
                                        const Qp& star, int depth) {
    check_balanced(f);
    VecQ Pm = pad(poly_pow(H.P, f.m), f.n);
    LogKernel k;
    k.Q = Pm;
    k.z1 = H.z0bar;
    k.z2 = H.z0;
    k.H = VecQ(Pm * (Qp(0) - log_g(star - H.z0)));
    return integrate(G, Q, f, k, depth);
}

IntegrationReport lp_anticyclotomic(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                                    const std::vector<HeegnerDatum>& data,
                                    const std::vector<Qp>& stars, const Qp& s, int depth) {
    if (data.empty()) throw HypothesisError("the class-group orbit is empty");
    if (data.size() != stars.size())
        throw HypothesisError("each embedding needs its own base point");
    IntegrationReport tot;
    for (size_t i = 0; i < data.size(); i++)
        accumulate(tot, lp_partial(G, Q, f, data[i], stars[i], s, depth), i == 0);
    return tot;
}

IntegrationReport lp_derivative(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                                const std::vector<HeegnerDatum>& data,
                                const std::vector<Qp>& stars, int depth) {
    if (data.empty()) throw HypothesisError("the class-group orbit is empty");
    if (data.size() != stars.size())
        throw HypothesisError("each embedding needs its own base point");
    IntegrationReport tot;
    for (size_t i = 0; i < data.size(); i++)
        accumulate(tot, lp_partial_derivative(G, Q, f, data[i], stars[i], depth), i == 0);
    return tot;
}

std::string MainCheckReport::serialize_json() const {
    nlohmann::json j;
    j["lp_derivative"] = lp.serialize();
    j["direct_integral"] = direct.serialize();
    j["extension_class"] = aj.serialize();
    auto put = [&j](const char* key, int v) {
        if (v == INT32_MAX)
            j[key] = "inf";
        else
            j[key] = v;
    };
    put("cert_lp", cert_lp);
    put("cert_direct", cert_direct);
    put("agree_lp_direct", agree_lp_direct);
    put("agree_lp_aj", agree_lp_aj);
    put("agree_direct_aj", agree_direct_aj);
    j["depth"] = depth;
    j["seconds_lp"] = secs_lp;
    j["seconds_direct"] = secs_direct;
    j["seconds_aj"] = secs_aj;
    return j.dump();
}

MainCheckReport main_theorem_check(ArithGroup& G, const QuotientGraph& Q, const FreeQuotient& F,
                                   const DeRhamSpace& D, int j, const HeegnerDatum& H,
                                   const Qp& star, int depth) {
    const EdgeCochain& f = D.har.at((size_t)j);
    VecQ Pm = pad(poly_pow(H.P, D.m), D.n);
    MainCheckReport rep;
    rep.depth = depth;
    using clock = std::chrono::steady_clock;

    auto t0 = clock::now();
    IntegrationReport lp = lp_derivative(G, Q, f, {H}, {star}, depth);
    auto t1 = clock::now();
    IntegrationReport di = coleman_integral(G, Q, f, H.z0bar, H.z0, Pm, depth);
    auto t2 = clock::now();
    OpenClass oc = open_h1dr(G, Q, D.n, D.m, {{H.z0, Pm}, {H.z0bar, VecQ(-Pm)}});
    rep.aj = aj_extension_class(G, Q, F, D, j, oc, depth);
    auto t3 = clock::now();

    rep.lp = lp.value;
    rep.direct = di.value;
    rep.cert_lp = lp.cert_val;
    rep.cert_direct = di.cert_val;
    rep.agree_lp_direct = agreement(rep.lp, rep.direct);
    rep.agree_lp_aj = agreement(rep.lp, rep.aj);
    rep.agree_direct_aj = agreement(rep.direct, rep.aj);
    rep.secs_lp = std::chrono::duration<double>(t1 - t0).count();
    rep.secs_direct = std::chrono::duration<double>(t2 - t1).count();
    rep.secs_aj = std::chrono::duration<double>(t3 - t2).count();
    return rep;
}

} // namespace mf

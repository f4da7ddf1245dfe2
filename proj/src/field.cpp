#include <mumford/field.hpp>

#include <algorithm>
#include <cassert>
#include <sstream>

namespace mf {

static thread_local FieldContext* g_ctx = nullptr;

const FieldContext& ctx() {
    if (!g_ctx) throw std::logic_error("no active FieldContext");
    return *g_ctx;
}
FieldContext& ctx_mut() {
    if (!g_ctx) throw std::logic_error("no active FieldContext");
    return *g_ctx;
}

static bool is_prime(long n) {
    if (n < 2) return false;
    for (long d = 2; d * d <= n; d++)
        if (n % d == 0) return false;
    return true;
}

FieldContext::FieldContext(long p_, int mu_, int M_, int guard) : p(p_), mu(mu_), M(M_) {
    if (p == 2) throw HypothesisError("p = 2 is unsupported");
    if (!is_prime(p)) throw HypothesisError("p must be prime");
    if (mu != 1 && mu != 2) throw HypothesisError("extension degree must be 1 or 2");
    if (M < 1) throw HypothesisError("precision must be positive");
    W = M + guard;
    ppow.assign(W + 1, 1);
    for (int i = 1; i <= W; i++) {
        if (ppow[i - 1] > (uint64_t(1) << 62) / (uint64_t)p)
            throw HypothesisError("p^(M+guard) exceeds the 62-bit working range");
        ppow[i] = ppow[i - 1] * (uint64_t)p;
    }
    if (mu == 2) {
        for (long c = 2; c < p; c++) {
            // Euler criterion
            long e = (p - 1) / 2, acc = 1, base = c;
            while (e) {
                if (e & 1) acc = acc * base % p;
                base = base * base % p;
                e >>= 1;
            }
            if (acc == p - 1) { r = (uint64_t)c; break; }
        }
    }
}

void FieldContext::set_branch(const Qp& val) {
    branch_zero = val.is_zero();
    branch_v = val.v;
    branch_a = val.a;
    branch_b = val.b;
}

Qp FieldContext::branch() const {
    if (branch_zero) return Qp::zero_at(W);
    return Qp::from_parts(branch_v, branch_a, branch_b, branch_v + W);
}

ScopedField::ScopedField(long p, int mu, int M, int guard) : fc(p, mu, M, guard), prev(g_ctx) {
    g_ctx = &fc;
}
ScopedField::~ScopedField() { g_ctx = prev; }

namespace detail {
uint64_t inv_mod_ppow(uint64_t a, int k) {
    const FieldContext& F = ctx();
    uint64_t m = F.ppow[k];
    a %= m;
    if (a % (uint64_t)F.p == 0) throw PrecisionError("inverse of a non-unit residue");
    // extended Euclid (m odd since p odd, all fits in int64)
    int64_t r0 = (int64_t)m, r1 = (int64_t)a, s0 = 0, s1 = 1;
    while (r1 != 0) {
        int64_t q = r0 / r1;
        int64_t t = r0 - q * r1; r0 = r1; r1 = t;
        t = s0 - q * s1; s0 = s1; s1 = t;
    }
    int64_t res = s0 % (int64_t)m;
    if (res < 0) res += (int64_t)m;
    return (uint64_t)res;
}
} // namespace detail

using detail::addm;
using detail::mulm;
using detail::subm;

Qp Qp::zero_at(int prec) {
    Qp z{raw_t{}};
    z.v = z.N = prec;
    z.a = z.b = 0;
    return z;
}

Qp Qp::from_parts(int v, uint64_t a, uint64_t b, int N) {
    const FieldContext& F = ctx();
    if (v >= N) return zero_at(N);
    int rel = N - v;
    if (rel > F.W) { // cap relative precision at the working window
        rel = F.W;
        N = v + rel;
    }
    uint64_t m = F.ppow[rel];
    a %= m;
    b %= m;
    while (v < N && a % (uint64_t)F.p == 0 && b % (uint64_t)F.p == 0) {
        if (a == 0 && b == 0) return zero_at(N);
        a /= (uint64_t)F.p;
        b /= (uint64_t)F.p;
        v++;
    }
    if (v >= N) return zero_at(N);
    Qp x{Qp::raw_t{}};
    x.v = v;
    x.N = N;
    x.a = a % F.ppow[N - v];
    x.b = b % F.ppow[N - v];
    return x;
}

Qp::Qp(long n, int prec) {
    const FieldContext& F = ctx();
    if (prec < 0) prec = F.W;
    if (n == 0) { *this = zero_at(prec); return; }
    int v = 0;
    while (n % F.p == 0) { n /= F.p; v++; }
    uint64_t m = F.ppow[std::min(prec > v ? prec - v : 0, F.W)];
    if (m == 1) { *this = zero_at(prec); return; }
    long red = n % (long)m;
    if (red < 0) red += (long)m;
    *this = from_parts(v, (uint64_t)red, 0, prec);
}

Qp Qp::rational(long num, long den, int prec) {
    if (den == 0) throw HypothesisError("zero denominator");
    Qp x(num, prec < 0 ? -1 : prec + 62), y(den, prec < 0 ? -1 : prec + 62);
    Qp q = x / y;
    return prec < 0 ? q : q.truncate(q.v + std::min(q.rel(), prec));
}

Qp Qp::pow_p(int k, int rel) {
    const FieldContext& F = ctx();
    if (rel < 0) rel = F.W;
    Qp x{Qp::raw_t{}};
    x.v = k;
    x.N = k + rel;
    x.a = 1;
    x.b = 0;
    return x;
}

Qp Qp::gen(int prec) {
    const FieldContext& F = ctx();
    if (F.mu != 2) throw HypothesisError("generator requested in a degree-1 context");
    if (prec < 0) prec = F.W;
    return from_parts(0, 0, 1, prec);
}

Qp Qp::unit_from_residues(uint64_t a, uint64_t b, int prec) { return from_parts(0, a, b, prec); }

Qp Qp::operator-() const {
    if (is_zero()) return *this;
    const FieldContext& F = ctx();
    uint64_t m = F.ppow[rel()];
    Qp x = *this;
    x.a = a ? m - a : 0;
    x.b = b ? m - b : 0;
    return x;
}

Qp Qp::operator+(const Qp& o) const {
    const FieldContext& F = ctx();
    if (is_zero() && o.is_zero()) return zero_at(std::min(N, o.N));
    if (is_zero()) return o.truncate(std::min((int)N, (int)o.N));
    if (o.is_zero()) return truncate(std::min((int)N, (int)o.N));
    int n = std::min(N, o.N);
    int v0 = std::min(v, o.v);
    if (v0 >= n) return zero_at(n);
    int relr = std::min(n - v0, F.W);
    n = v0 + relr;
    uint64_t m = F.ppow[relr];
    int s1 = v - v0, s2 = o.v - v0;
    uint64_t a1 = s1 >= relr ? 0 : mulm(a % m, F.ppow[s1], m);
    uint64_t b1 = s1 >= relr ? 0 : mulm(b % m, F.ppow[s1], m);
    uint64_t a2 = s2 >= relr ? 0 : mulm(o.a % m, F.ppow[s2], m);
    uint64_t b2 = s2 >= relr ? 0 : mulm(o.b % m, F.ppow[s2], m);
    return from_parts(v0, addm(a1, a2, m), addm(b1, b2, m), n);
}

Qp Qp::operator*(const Qp& o) const {
    const FieldContext& F = ctx();
    if (is_zero() || o.is_zero()) {
        long n1 = is_zero() ? N + (o.is_zero() ? o.N : o.v) : v + o.N;
        return zero_at((int)std::min<long>(n1, 1 << 28));
    }
    int relr = std::min(rel(), o.rel());
    uint64_t m = F.ppow[relr];
    uint64_t ra = mulm(a % m, o.a % m, m);
    uint64_t rb = mulm(a % m, o.b % m, m);
    if (F.mu == 2) {
        ra = addm(ra, mulm(F.r % m, mulm(b % m, o.b % m, m), m), m);
        rb = addm(rb, mulm(b % m, o.a % m, m), m);
    }
    Qp x{Qp::raw_t{}};
    x.v = v + o.v;
    x.N = x.v + relr;
    x.a = ra;
    x.b = rb;
    return x; // unit * unit is a unit: no renormalization needed
}

Qp Qp::inv() const {
    const FieldContext& F = ctx();
    if (is_zero()) throw PrecisionError("division by zero-at-precision", N);
    int k = rel();
    uint64_t m = F.ppow[k];
    Qp x{Qp::raw_t{}};
    x.v = -v;
    x.N = x.v + k;
    if (F.mu == 1 || b == 0) {
        x.a = detail::inv_mod_ppow(a, k);
        x.b = 0;
    } else {
        uint64_t nrm = subm(mulm(a, a, m), mulm(F.r % m, mulm(b, b, m), m), m);
        uint64_t ni = detail::inv_mod_ppow(nrm, k);
        x.a = mulm(a, ni, m);
        x.b = mulm(b ? m - b : 0, ni, m);
    }
    return x;
}

Qp Qp::pow(long e) const {
    if (e == 0) return Qp(1, is_zero() ? N : N - v); // relative window of this
    if (e < 0) return inv().pow(-e);
    Qp base = *this, acc = Qp(1, is_zero() ? N : rel());
    // keep accumulator's relative window matched to base
    bool started = false;
    Qp result = acc;
    while (e) {
        if (e & 1) {
            result = started ? result * base : base;
            started = true;
        }
        e >>= 1;
        if (e) base = base * base;
    }
    return started ? result : acc;
}

Qp Qp::truncate(int prec) const {
    if (prec >= N) return *this;
    if (is_zero() || v >= prec) return zero_at(prec);
    const FieldContext& F = ctx();
    Qp x = *this;
    x.N = prec;
    x.a = a % F.ppow[prec - v];
    x.b = b % F.ppow[prec - v];
    return x;
}

Qp Qp::lift_noise_free(int prec) const {
    if (prec <= N) return truncate(prec);
    Qp x = *this;
    if (is_zero()) return zero_at(prec);
    x.N = std::min(prec, v + ctx().W);
    return x;
}

bool Qp::eq(const Qp& o, int k) const {
    Qp d = *this - o;
    int cap = std::min((int)d.N, k);
    return d.is_zero() || d.v >= cap;
}

int dist_val(const Qp& x, const Qp& y) {
    Qp d = x - y;
    return d.v;
}

Qp frobenius(const Qp& x) {
    const FieldContext& F = ctx();
    if (F.mu == 1 || x.b == 0 || x.is_zero()) return x;
    Qp y = x;
    y.b = F.ppow[x.rel()] - x.b;
    return y;
}

Qp teichmuller(const Qp& x) {
    const FieldContext& F = ctx();
    if (!x.is_unit()) throw HypothesisError("teichmuller of a non-unit");
    long q = F.p;
    if (F.mu == 2) q *= F.p;
    Qp z = x;
    for (int i = 0; i <= x.rel() + 1; i++) z = z.pow(q);
    return z;
}

Qp plog(const Qp& x) {
    const FieldContext& F = ctx();
    if (x.is_zero()) throw PrecisionError("log of zero-at-precision", x.N);
    Qp u = Qp::from_parts(0, x.a, x.b, x.rel());
    Qp t = teichmuller(u);
    Qp y = u / t - Qp(1, u.rel());
    Qp s = Qp::zero_at(y.N);
    if (!y.is_zero()) {
        Qp term = y;
        for (long k = 1; !term.is_zero() && k < 8L * F.W + 16; k++) {
            Qp c = term / Qp(k, term.rel() + 8);
            s = (k % 2 == 1) ? s + c : s - c;
            term = term * y;
        }
    }
    if (x.v != 0 && !F.branch_zero) s = s + Qp((long)x.v) * F.branch();
    return s;
}

Qp pexp(const Qp& x) {
    const FieldContext& F = ctx();
    if (x.is_zero()) return Qp(1, x.N);
    if (x.v < 1) throw HypothesisError("exp outside the convergence domain (need val >= 1)");
    Qp s = Qp(1, x.N) + x;
    Qp term = x;
    for (long k = 2; k < 16L * F.W + 16; k++) {
        term = term * x / Qp(k, term.rel() + 16);
        if (term.is_zero()) break;
        s = s + term;
    }
    return s;
}

bool residue_is_square(const Qp& x) {
    const FieldContext& F = ctx();
    if (!x.is_unit()) throw HypothesisError("residue_is_square wants a unit");
    long q1 = F.mu == 2 ? F.p * F.p - 1 : F.p - 1;
    Qp t = Qp::from_parts(0, x.a % (uint64_t)F.p, x.b % (uint64_t)F.p, 1);
    Qp y = t.pow(q1 / 2);
    return y.a % (uint64_t)F.p == 1 && y.b % (uint64_t)F.p == 0;
}

Qp psqrt(const Qp& x) {
    const FieldContext& F = ctx();
    if (x.is_zero()) return Qp::zero_at((x.N + 1) / 2);
    if (x.v % 2 != 0) throw HypothesisError("odd valuation: no square root in an unramified field");
    Qp u = Qp::from_parts(0, x.a, x.b, x.rel());
    // root in the residue field by brute force
    uint64_t p = (uint64_t)F.p;
    uint64_t ta = x.a % p, tb = F.mu == 2 ? x.b % p : 0;
    uint64_t ca = 0, cb = 0;
    bool found = false;
    uint64_t blim = F.mu == 2 ? p : 1;
    for (uint64_t i = 0; i < p && !found; i++)
        for (uint64_t j = 0; j < blim && !found; j++) {
            uint64_t sa = (i * i + (F.mu == 2 ? F.r % p * j % p * j : 0)) % p;
            uint64_t sb = 2 * i * j % p;
            if (sa == ta && sb == tb) { ca = i; cb = j; found = true; }
        }
    if (!found) throw HypothesisError("element is not a square");
    Qp z = Qp::from_parts(0, ca, cb, u.N);
    Qp half = Qp::rational(1, 2, u.N);
    for (int it = 0; it < 64; it++) {
        Qp nz = (z + u / z) * half;
        if (nz.eq(z)) { z = nz; break; }
        z = nz;
    }
    return z * Qp::pow_p(x.v / 2, u.rel());
}

// ---- serialization -------------------------------------------------------

std::string Qp::serialize() const {
    const FieldContext& F = ctx();
    std::ostringstream os;
    if (is_zero()) {
        os << "0 + O(" << F.p << "^" << N << ")";
        return os.str();
    }
    os << F.p << "^" << v << " * (";
    uint64_t ra = a, rb = b;
    bool first = true;
    for (int i = 0; i < rel(); i++) {
        uint64_t da = ra % (uint64_t)F.p, db = rb % (uint64_t)F.p;
        ra /= (uint64_t)F.p;
        rb /= (uint64_t)F.p;
        if ((da || db || i == 0)) {
            if (!first) os << " + ";
            if (F.mu == 2)
                os << "(" << da << "," << db << ")";
            else
                os << da;
            if (i == 1) os << "*" << F.p;
            if (i > 1) os << "*" << F.p << "^" << i;
            first = false;
        }
    }
    os << ") + O(" << F.p << "^" << N << ")";
    return os.str();
}

Qp Qp::parse(const std::string& s) {
    const FieldContext& F = ctx();
    auto fail = [&]() { throw HypothesisError("unparseable p-adic literal: " + s); };
    size_t opos = s.rfind("+ O(");
    if (opos == std::string::npos) fail();
    size_t caret = s.find('^', opos);
    if (caret == std::string::npos) fail();
    long pp = std::stol(s.substr(opos + 4, caret - opos - 4));
    if (pp != F.p) throw HypothesisError("prime mismatch in p-adic literal");
    int Nn = (int)std::stol(s.substr(caret + 1));
    std::string head = s.substr(0, opos);
    // zero?
    if (head.find('(') == std::string::npos || head.substr(0, 2) == "0 ") return zero_at(Nn);
    size_t c1 = s.find('^');
    size_t star = s.find(" * (");
    int vv = (int)std::stol(s.substr(c1 + 1, star - c1 - 1));
    size_t body0 = star + 4;
    size_t body1 = s.find(") + O(", body0);
    // mu == 2 digits themselves contain parens: find the last ") + O("
    body1 = s.rfind(") + O(");
    std::string body = s.substr(body0, body1 - body0);
    uint64_t aa = 0, bb = 0;
    size_t pos = 0;
    while (pos < body.size()) {
        size_t nxt = body.find(" + ", pos);
        std::string term = body.substr(pos, nxt == std::string::npos ? std::string::npos : nxt - pos);
        pos = nxt == std::string::npos ? body.size() : nxt + 3;
        uint64_t da = 0, db = 0;
        int k = 0;
        size_t mul = term.find('*');
        std::string dig = mul == std::string::npos ? term : term.substr(0, mul);
        if (mul != std::string::npos) {
            std::string pk = term.substr(mul + 1);
            size_t ct = pk.find('^');
            k = ct == std::string::npos ? 1 : (int)std::stol(pk.substr(ct + 1));
        }
        if (F.mu == 2) {
            if (dig.front() != '(' || dig.back() != ')') fail();
            size_t comma = dig.find(',');
            da = (uint64_t)std::stoul(dig.substr(1, comma - 1));
            db = (uint64_t)std::stoul(dig.substr(comma + 1, dig.size() - comma - 2));
        } else {
            da = (uint64_t)std::stoul(dig);
        }
        aa += da * F.ppow[k];
        bb += db * F.ppow[k];
    }
    return from_parts(vv, aa, bb, Nn);
}

} // namespace mf

#pragma once

// Exact finite-precision arithmetic in Q_p and its quadratic unramified
// extension. Elements are capped-relative: p^v * (a + b*w) with the unit part
// kept modulo p^(N-v), N the absolute precision. w generates the degree-2
// extension, w^2 = the smallest positive quadratic non-residue mod p.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mf {

struct PrecisionError : std::runtime_error {
    int starving_valuation;
    explicit PrecisionError(const std::string& what, int val = 0)
        : std::runtime_error(what), starving_valuation(val) {}
};

struct HypothesisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// a structural identity that must hold by construction failed to verify
struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Qp;

struct FieldContext {
    long p = 0;
    int mu = 1;
    int M = 0;      // contract precision
    int W = 0;      // working precision (M + guard)
    uint64_t r = 0; // w^2 for mu == 2
    std::vector<uint64_t> ppow;
    // branch parameter: the chosen value of log_p(p); default 0 (Iwasawa)
    int branch_v = 0;
    uint64_t branch_a = 0, branch_b = 0;
    bool branch_zero = true;

    FieldContext(long p_, int mu_, int M_, int guard = 6);
    void set_branch(const Qp& val);
    Qp branch() const;
};

const FieldContext& ctx();
FieldContext& ctx_mut();

// RAII activation of a field context (global per computation, per spec).
struct ScopedField {
    FieldContext fc;
    FieldContext* prev;
    ScopedField(long p, int mu, int M, int guard = 6);
    ~ScopedField();
    ScopedField(const ScopedField&) = delete;
};

namespace detail {
inline uint64_t addm(uint64_t x, uint64_t y, uint64_t m) {
    uint64_t s = x + y;
    return s >= m ? s - m : s;
}
inline uint64_t subm(uint64_t x, uint64_t y, uint64_t m) { return x >= y ? x - y : x + m - y; }
inline uint64_t mulm(uint64_t x, uint64_t y, uint64_t m) {
    return (uint64_t)((unsigned __int128)x * y % m);
}
uint64_t inv_mod_ppow(uint64_t a, int k); // a unit mod p
} // namespace detail

struct Qp {
    int32_t v = 0; // valuation; equals N for zero-at-precision
    int32_t N = 0; // absolute precision
    uint64_t a = 0, b = 0; // unit part mod p^(N-v)

    struct raw_t {};
    explicit Qp(raw_t) {} // uninitialized-fields constructor for internal use

    Qp() : Qp((long)0) {}
    explicit Qp(long n, int prec = -1);
    static Qp rational(long num, long den, int prec = -1);
    static Qp zero_at(int prec);
    static Qp pow_p(int k, int rel = -1);     // p^k as an exact-as-possible unit
    static Qp gen(int prec = -1);             // the generator w (mu == 2)
    static Qp unit_from_residues(uint64_t a, uint64_t b, int prec);
    static Qp from_parts(int v, uint64_t a, uint64_t b, int N); // normalizes

    bool is_zero() const { return v >= N; }
    int rel() const { return N - v; }
    int valuation() const {
        if (is_zero()) throw PrecisionError("valuation of zero-at-precision", N);
        return v;
    }
    bool is_unit() const { return !is_zero() && v == 0; }

    Qp operator-() const;
    Qp operator+(const Qp& o) const;
    Qp operator-(const Qp& o) const { return *this + (-o); }
    Qp operator*(const Qp& o) const;
    Qp inv() const;
    Qp operator/(const Qp& o) const { return *this * o.inv(); }
    Qp& operator+=(const Qp& o) { return *this = *this + o; }
    Qp& operator-=(const Qp& o) { return *this = *this - o; }
    Qp& operator*=(const Qp& o) { return *this = *this * o; }
    Qp& operator/=(const Qp& o) { return *this = *this / o; }

    Qp pow(long e) const;
    Qp truncate(int prec) const;    // lower absolute precision to prec
    Qp lift_noise_free(int prec) const; // reinterpret digits at higher precision

    // equality modulo p^k (default: the shared precision)
    bool eq(const Qp& o, int k = INT32_MAX) const;
    bool operator==(const Qp& o) const { return eq(o); }

    std::string serialize() const;
    static Qp parse(const std::string& s);

    // exact identity of the representation (for hashing / cache files)
    bool same_bits(const Qp& o) const { return v == o.v && N == o.N && a == o.a && b == o.b; }
};

inline Qp operator*(long n, const Qp& x) { return Qp(n) * x; }

Qp frobenius(const Qp& x);
Qp teichmuller(const Qp& x);             // unit input; the (q-1)-st root of unity
Qp plog(const Qp& x);                    // branch-parameterized logarithm
Qp pexp(const Qp& x);                    // requires val >= 1, p odd
Qp psqrt(const Qp& x);                   // square root in Q_{p^2} (even valuation)
bool residue_is_square(const Qp& x);     // unit x: is the residue a square in F_q

// valuation of x - y (convenience; >= min precision cap)
int dist_val(const Qp& x, const Qp& y);

} // namespace mf

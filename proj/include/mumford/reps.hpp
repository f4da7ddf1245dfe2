#pragma once

// Finite-dimensional coefficient modules: polynomials of bounded degree with
// the substitution action of 2x2 matrices, the invariant bilinear pairing,
// and the degree-two quadratic attached to a traceless matrix (whose roots
// are the fixed points of its Moebius action).

#include <mumford/btree.hpp>
#include <mumford/linalg.hpp>

namespace mf {

inline VecQ poly_mul(const VecQ& a, const VecQ& b) {
    VecQ r = VecQ::Zero(a.size() + b.size() - 1);
    for (int i = 0; i < a.size(); i++)
        for (int j = 0; j < b.size(); j++) r(i + j) += a(i) * b(j);
    return r;
}

inline VecQ poly_pow(const VecQ& a, int k) {
    VecQ r(1);
    r(0) = Qp(1);
    for (int i = 0; i < k; i++) r = poly_mul(r, a);
    return r;
}

inline Qp poly_eval(const VecQ& a, const Qp& x) {
    Qp s = Qp::zero_at(ctx().W + (x.is_zero() ? 0 : 4 * std::abs(x.v)));
    for (int i = (int)a.size() - 1; i >= 0; i--) s = s * x + a(i);
    return s;
}

inline long binom(int n, int k) {
    long r = 1;
    for (int i = 1; i <= k; i++) r = r * (n - k + i) / i;
    return r;
}

// matrix of P(X) -> (cX+d)^n P((aX+b)/(cX+d)) on coefficients of 1..X^n;
// note rho_n(g) rho_n(h) = rho_n(h g) (substitution composes contravariantly)
inline MatQ rho_n(const MatQ& g, int n) {
    VecQ num(2), den(2);
    num << g(0, 1), g(0, 0); // b + aX
    den << g(1, 1), g(1, 0); // d + cX
    MatQ R(n + 1, n + 1);
    for (int j = 0; j <= n; j++) {
        VecQ col = poly_mul(poly_pow(num, j), poly_pow(den, n - j));
        for (int i = 0; i <= n; i++) R(i, j) = col(i);
    }
    return R;
}

// <X^i, X^j> = 0 unless i+j = n; <X^i, X^(n-i)> = (-1)^(i+1) / binom(n,i)
inline MatQ pairing_matrix(int n) {
    MatQ J = MatQ::Zero(n + 1, n + 1);
    for (int i = 0; i <= n; i++)
        J(i, n - i) = Qp::rational(i % 2 == 0 ? -1 : 1, binom(n, i));
    return J;
}

inline Qp rep_pair(const VecQ& P, const VecQ& Q) {
    if (P.size() != Q.size()) throw HypothesisError("pairing of different-degree vectors");
    int n = (int)P.size() - 1;
    Qp s = Qp::zero_at(ctx().W);
    for (int i = 0; i <= n; i++)
        s += Qp::rational(i % 2 == 0 ? -1 : 1, binom(n, i)) * P(i) * Q(n - i);
    return s;
}

// traceless U = [[a, b], [c, -a]]  ->  b + 2aX - cX^2
inline VecQ pure_to_poly(const MatQ& U) {
    if (!(U(0, 0) + U(1, 1)).eq(Qp(0), ctx().M))
        throw HypothesisError("pure_to_poly needs a traceless matrix");
    VecQ P(3);
    P << U(0, 1), Qp(2) * U(0, 0), -U(1, 0);
    return P;
}

} // namespace mf

#pragma once

// Embeddings of the inert quadratic torus into the arithmetic group: the pair
// of conjugate fixed points on the boundary, the invariant binary quadratic,
// and the norm-p partner element. On top of them, the boundary L-function of
// a harmonic cochain twisted by characters of the torus: certified values at
// integral points, the derivative at the central point, the class-group
// assembly, and the three-route consistency check of the central derivative
// against the direct primitive and the extension-class pairing.

#include <mumford/drham.hpp>

#include <string>
#include <utility>
#include <vector>

namespace mf {

struct HeegnerDatum {
    Quat psi;       // trace-free order element, psi^2 = -D
    long long D = 0;
    Qp z0, z0bar;   // conjugate fixed points of psi on the boundary
    VecQ P;         // invariant quadratic, vanishing at the fixed points
    Quat wp;        // order element of reduced norm p
};

// the two fixed points of a non-scalar 2x2 matrix acting on the boundary;
// throws HypothesisError when a fixed point escapes to infinity and
// PrecisionError (from the square root) when the discriminant is not a
// square of the quadratic extension
std::pair<Qp, Qp> fixed_points(const MatQ& T);

// validate psi (pure, positive integral norm prime to p, non-split torus)
// and package the fixed points, the quadratic, and the norm-p partner
HeegnerDatum heegner_datum(ArithGroup& G, const Quat& psi);

// logarithm of x against its conjugate: plog(x / frobenius(x)); kills the
// prime field, is frobenius-antisymmetric, and is branch-independent on
// elements whose conjugate ratio is a unit (always, since valuations agree)
Qp log_g(const Qp& x);

// value at s of the partial L-function of f attached to one embedding: the
// integral of exp((s - m - 1) * (log_g(x - z0) - log_g(star - z0))) * P^m
// against the boundary distribution of f, as a certified Riemann sum
IntegrationReport lp_partial(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                             const HeegnerDatum& H, const Qp& star, const Qp& s, int depth);

// derivative at the central point s = m + 1: the integral of the log kernel
// P^m * (log_g(x - z0) - log_g(star - z0))
IntegrationReport lp_partial_derivative(ArithGroup& G, const QuotientGraph& Q,
                                        const EdgeCochain& f, const HeegnerDatum& H,
                                        const Qp& star, int depth);

// sums of partials over a class-group orbit of embeddings with matched base
// points; throws HypothesisError on empty or mismatched inputs
IntegrationReport lp_anticyclotomic(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                                    const std::vector<HeegnerDatum>& data,
                                    const std::vector<Qp>& stars, const Qp& s, int depth);
IntegrationReport lp_derivative(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                                const std::vector<HeegnerDatum>& data,
                                const std::vector<Qp>& stars, int depth);

struct MainCheckReport {
    Qp lp;     // central derivative of the L-function
    Qp direct; // primitive of P^m * f between the fixed points
    Qp aj;     // extension-class pairing against the punctured class
    int cert_lp = 0, cert_direct = 0;
    int agree_lp_direct = 0, agree_lp_aj = 0, agree_direct_aj = 0;
    int depth = 0;
    double secs_lp = 0, secs_direct = 0, secs_aj = 0;
    std::string serialize_json() const;
};

// compute the central derivative along three independent routes and record
// the pairwise agreement valuations
MainCheckReport main_theorem_check(ArithGroup& G, const QuotientGraph& Q, const FreeQuotient& F,
                                   const DeRhamSpace& D, int j, const HeegnerDatum& H,
                                   const Qp& star, int depth);

} // namespace mf

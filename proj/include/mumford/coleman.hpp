#pragma once

// The boundary distribution attached to a harmonic cochain: ball moments,
// certified Riemann-sum integration of locally analytic log kernels over the
// boundary line, primitives between points of the non-trivial quadratic
// extension, and the associated group cocycle.

#include <mumford/cohom.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace mf {

// mass of the polynomial P (coefficients of 1..t^n, boundary coordinates)
// against the distribution of f on the ball of ends through e.t
Qp moment(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f, const TreeEdge& e,
          const VecQ& P);

// K(t) = Q(t) * log((t - z2)/(t - z1)) + H(t); the points z1, z2 lie outside
// the boundary line, so K is locally analytic with a pole of order <= deg Q
// at infinity; Q == 0 degenerates to the polynomial H
struct LogKernel {
    VecQ Q;
    Qp z1, z2;
    VecQ H;
};

// truncation of a kernel on one ball: a degree <= n polynomial in boundary
// coordinates plus a valuation bound for everything discarded (INT32_MAX
// when the truncation is exact)
struct BallSeries {
    VecQ head;
    int tail_val = INT32_MAX;
};
BallSeries kernel_on_ball(const LogKernel& k, const TreeEdge& e, int n);

struct IntegrationReport {
    Qp value;
    int depth = 0;
    int cert_val = 0;         // certified error valuation; INT32_MAX if exact
    std::vector<Qp> partials; // Riemann sum at each level 1..depth
    std::string serialize_json() const;
};

// depth-d Riemann sum of the kernel against the distribution of f, with a
// certified error bound from the truncation tails and the moment-growth
// floor of the distribution; throws PrecisionError when nothing is certified
IntegrationReport integrate(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                            const LogKernel& k, int depth);

// primitive of f paired with Q between za and zb (both reducing to vertices)
IntegrationReport coleman_integral(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                                   const Qp& za, const Qp& zb, const VecQ& P, int depth);

// value at gamma of the cocycle of the primitive based at zeta, as the
// coefficient vector dual to <value, P> = primitive from zeta to gamma*zeta
VecQ coleman_cocycle(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& f,
                     const Quat& gamma, const Qp& zeta, int depth);

} // namespace mf

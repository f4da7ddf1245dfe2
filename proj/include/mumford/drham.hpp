#pragma once

// The cohomology of the quotient curve with fixed polynomial coefficients,
// assembled as a filtered module with Frobenius and monodromy: the class
// block and the harmonic block, the middle filtration step cut out by the
// boundary primitives, the residue cup product, two independent extractions
// of the L-invariant, and the punctured model whose pairing against the
// primitives computes extension-class values between boundary points.

#include <mumford/coleman.hpp>
#include <mumford/phin.hpp>

namespace mf {

struct DeRhamSpace {
    int n = 0, m = 0; // coefficient degree and determinant twist
    int h = 0;        // dimension of each of the two blocks
    int depth = 0;    // integration depth behind the primitive data
    int cert = 0;     // certified digits of the integration-derived entries
    Qp base;          // base point of the primitives

    H1Space H;                    // first block: cohomology classes
    std::vector<EdgeCochain> har; // second block: harmonic cochains

    MatQ eps;    // h x h class coordinates of the harmonic cochains
    MatQ prim;   // h x h class coordinates of the primitive cocycles
    MatQ pairH;  // h x h evaluation pairing of classes against harmonics
    MatQ frob;   // 2h x 2h Frobenius matrix (x -> frob * sigma(x))
    MatQ mono;   // 2h x 2h monodromy matrix
    MatQ filmid; // 2h x h middle filtration step
    MatQ up;     // block-diagonal shift operator
    MatQ winv;   // block-diagonal level involution

    // cocycle of the primitive of each harmonic cochain, evaluated at each
    // free generator (outer index: harmonic, inner: generator)
    std::vector<std::vector<VecQ>> prim_cocycles;
};

// assemble the filtered-module structure from the block data and verify it
DeRhamSpace assemble_drham(int n, int m, const MatQ& eps, const MatQ& prim, const MatQ& pairH,
                           int cert);

// full construction: cohomology and harmonic bases, primitive cocycles with
// certified digits, operators, and the verified structure matrices
DeRhamSpace build_drham(ArithGroup& G, const QuotientGraph& Q, const FreeQuotient& F, int n,
                        int m, int depth);

// the space as a filtered Frobenius-monodromy module
PhiNModule phin_view(const DeRhamSpace& D);

// Gram matrix of the residue cup product in the block basis
MatQ cup_gram(const DeRhamSpace& D);
Qp cup_product(const DeRhamSpace& D, const VecQ& x, const VecQ& y);

// endomorphism of the class block solved from primitive = L * class matrix
MatQ l_invariant_from_primitive(const DeRhamSpace& D);
// the same endomorphism recovered from the filtration of the module view
MatQ l_invariant_from_filtration(const DeRhamSpace& D);

struct Puncture {
    Qp z;     // a point of the quadratic extension reducing to a vertex
    VecQ res; // prescribed residue, a length-(n+1) coefficient vector
};

struct OpenClass {
    int n = 0, m = 0;
    std::vector<Puncture> punctures;
    EdgeCochain g; // invariant cochain whose vertex sums match the residues
};

// solve the equivariant discrete Poisson problem: an invariant vertex
// cochain whose differential has the divergence prescribed by the orbit
// sums of the residues; throws HypothesisError when no solution exists
OpenClass open_h1dr(ArithGroup& G, const QuotientGraph& Q, int n, int m,
                    const std::vector<Puncture>& ps);

// pairing of the primitive data of D.har[j] against an open class: the edge
// part through the cached generator cocycles, the punctures through fresh
// primitives from the base point
Qp aj_extension_class(ArithGroup& G, const QuotientGraph& Q, const FreeQuotient& F,
                      const DeRhamSpace& D, int j, const OpenClass& a, int depth);

} // namespace mf

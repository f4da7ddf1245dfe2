#pragma once

// Equivariant edge cochains on the tree with polynomial coefficients:
// harmonic forms, first group cohomology through the edge/vertex exact
// sequence, the evaluation pairing over a fundamental domain, the shift
// and involution operators, and simultaneous eigenspace splitting.

#include <mumford/arith.hpp>
#include <mumford/reps.hpp>

#include <vector>

namespace mf {

// action of the group element with 2x2 image g on degree-n coefficients,
// twisted by the m-th power of the determinant: det(g)^(-m-n) rho_n(adj g)
MatQ weight_action(const MatQ& g, int n, int m);

struct EdgeClass {
    int orbit;
    Quat g; // g * (orbit rep, possibly reversed) = the located edge
    bool rev;
};
EdgeClass locate_edge(ArithGroup& G, const QuotientGraph& Q, const TreeEdge& e);

// an equivariant antisymmetric edge cochain, stored by orbit-rep values
struct EdgeCochain {
    int n = 0, m = 0;
    std::vector<VecQ> vals; // one length-(n+1) vector per edge class of Q
};

VecQ eval_edge(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& c, const TreeEdge& e);
VecQ stack_cochain(const EdgeCochain& c);
EdgeCochain unstack_cochain(const QuotientGraph& Q, int n, int m, const VecQ& x);

// cochains with vanishing vertex sums, invariant under the full group
std::vector<EdgeCochain> harmonic_space(ArithGroup& G, const QuotientGraph& Q, int n, int m);

// the same system over the torsion-free subgroup; values per free-quotient edge
std::vector<std::vector<VecQ>> harmonic_space_free(ArithGroup& G, const FreeQuotient& F, int n,
                                                   int m);

// invariant edge cochains modulo differentials of invariant vertex cochains
struct H1Space {
    int n = 0, m = 0;
    std::vector<EdgeCochain> basis; // representatives of a basis of classes
    MatQ cob;                       // stacked differentials of vertex cochains
};
H1Space group_h1(ArithGroup& G, const QuotientGraph& Q, int n, int m);
VecQ h1_reduce(const H1Space& H, const EdgeCochain& c); // class coordinates

// value at gamma of the group cocycle attached to an invariant cochain
VecQ connecting_cocycle(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& c,
                        const Quat& gamma);

// evaluation pairing of a cohomology class against a harmonic cochain,
// summed over a fundamental domain and divided by the subgroup index
Qp pairing_gamma(ArithGroup& G, const QuotientGraph& Q, const FreeQuotient& F,
                 const EdgeCochain& z, const EdgeCochain& f);

// matrix of the alpha-twisted action on the span of the given cochains
MatQ hecke_matrix(ArithGroup& G, const QuotientGraph& Q, const std::vector<EdgeCochain>& basis,
                  const Quat& alpha);
// the canonical norm-ell involution, ell a prime dividing the level
MatQ atkin_lehner_w(ArithGroup& G, const QuotientGraph& Q, const std::vector<EdgeCochain>& basis,
                    long long ell);
// the shift operator at the working prime: -p^m times the norm-p involution
MatQ hecke_up(ArithGroup& G, const QuotientGraph& Q, const std::vector<EdgeCochain>& basis);

// roots in the active field with integral slope and simple residue
std::vector<Qp> qp_roots(const Poly& f);

struct EigenBlock {
    MatQ basis;           // columns are coordinates in the ambient basis
    std::vector<Qp> eigs; // per operator; filled for one-dimensional blocks
};
std::vector<EigenBlock> eigen_split(const std::vector<MatQ>& ops);

} // namespace mf

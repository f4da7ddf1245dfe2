#pragma once

// Finite-dimensional filtered modules carrying a semilinear Frobenius A
// (phi(x) = A sigma(x)) and a nilpotent monodromy operator N with
// N A = p A sigma(N): slope decompositions, the rank-two monodromy-module
// recognition with its L-invariant, extension classes against a one-
// dimensional twist, and global sections.

#include <mumford/linalg.hpp>

#include <string>
#include <vector>

namespace mf {

struct PhiNModule {
    MatQ A; // Frobenius matrix
    MatQ N; // monodromy matrix
    // decreasing filtration: (jump, column basis), ascending jumps;
    // before the first stored jump the filtration is the whole space,
    // from a stored jump on it is that basis until the next stored jump
    std::vector<std::pair<int, MatQ>> fil;
    std::vector<MatQ> T; // commuting coefficient algebra generators (empty = scalars)

    int dim() const { return (int)A.rows(); }
    MatQ fil_at(int j) const;
    void validate() const;

    std::string serialize() const;
    static PhiNModule parse(const std::string& s);
};

PhiNModule unit_module();
PhiNModule twist(const PhiNModule& D, int i);     // multiplies Frobenius by p^i
PhiNModule conjugate(const PhiNModule& D, const MatQ& g);

// basis e1, e2; phi e1 = p^m e1, phi e2 = p^(m+1) e2, N e2 = e1,
// filtration jump at m+1 spanned by e2 - L e1
PhiNModule standard_monodromy(int m, const Qp& L);

struct SlopePiece {
    Frac slope;
    MatQ basis;
};
std::vector<SlopePiece> slope_decompose(const PhiNModule& D);

struct MonodromyDecomp {
    MatQ d1; // kernel of N
    MatQ d2; // complementary slope component
    int j0;
};
// throws HypothesisError naming the failed condition (i)/(ii)/(iii)
MonodromyDecomp is_monodromy_module(const PhiNModule& D);

// the unique element L of the coefficient algebra with
// x - L N(x) in F^{j0} for every x in d2; returned as a dim x dim matrix
MatQ l_invariant(const PhiNModule& D);

// extensions 0 -> D -> E -> K[n] -> 0 classified by D / F^n
PhiNModule ext1_build(const PhiNModule& D, int n, const VecQ& c);
VecQ ext1_class(const PhiNModule& E, const PhiNModule& D, int n);
VecQ fil_reduce(const PhiNModule& D, int n, VecQ y); // canonical coset representative
PhiNModule baer_sum(const PhiNModule& E1, const PhiNModule& E2, const PhiNModule& D, int n);

// F^0 intersected with the phi-fixed, N-killed vectors; a prime-field basis
std::vector<VecQ> gamma_sections(const PhiNModule& D);

} // namespace mf

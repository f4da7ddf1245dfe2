#pragma once

// The (p+1)-regular tree of lattice classes in a two-dimensional p-adic
// vector space. Vertices are kept in an exact normal form
//   [[p^a, u], [0, 1]],  u = c / p^e  determined mod p^a,
// so the combinatorics (adjacency, distance, quotients) never touch
// finite-precision arithmetic; only the matrix action does.

#include <mumford/linalg.hpp>

#include <compare>
#include <string>
#include <vector>

namespace mf {

long long ipow(long p, int k);

struct TreeVertex {
    int a = 0;
    long long c = 0; // u = c / p^e, 0 <= c < p^(a+e), p does not divide c if e > 0
    int e = 0;

    TreeVertex() = default;
    TreeVertex(int a_, long long c_, int e_);
    static TreeVertex standard() { return TreeVertex(); }

    friend bool operator==(const TreeVertex&, const TreeVertex&) = default;
    friend auto operator<=>(const TreeVertex&, const TreeVertex&) = default;

    Qp u() const; // the off-diagonal entry as a scalar

    std::string serialize() const;
    static TreeVertex parse(const std::string& s);
};

struct TreeEdge {
    TreeVertex o, t;
    TreeEdge reversed() const { return TreeEdge{t, o}; }
    friend bool operator==(const TreeEdge&, const TreeEdge&) = default;
    friend auto operator<=>(const TreeEdge&, const TreeEdge&) = default;
};

TreeVertex tree_parent(const TreeVertex& v);               // level a-1 neighbor
std::vector<TreeVertex> tree_children(const TreeVertex& v); // level a+1 neighbors
std::vector<TreeVertex> neighbors(const TreeVertex& v);
int tree_distance(const TreeVertex& v, const TreeVertex& w);
std::vector<TreeEdge> tree_geodesic(const TreeVertex& a, const TreeVertex& b);

// left action of an invertible matrix with entries in the prime field
TreeVertex act_vertex(const MatQ& g, const TreeVertex& v);
TreeEdge act_edge(const MatQ& g, const TreeEdge& e);

// Moebius action on boundary/quadratic points
Qp act_point(const MatQ& g, const Qp& z);

// the vertex a quadratic (non-prime-field) point reduces to
TreeVertex reduction(const Qp& z);

// boundary set of ends through the far vertex of an edge, as a disk
// |z - c/p^e| <= p^-k of the boundary line (or its complement, which
// contains the point at infinity)
struct Ball {
    bool complement = false;
    long long c = 0;
    int e = 0;
    int k = 0;
    friend bool operator==(const Ball&, const Ball&) = default;
};

Ball edge_ball(const TreeEdge& e);
bool ball_contains(const Ball& B, const Qp& z);
Qp ball_center(const Ball& B);
Qp ball_sample(const Ball& B); // a finite representative point inside

// exact rational digits: (c, e) with q = c/p^e mod p^k
std::pair<long long, int> rational_approx(const Qp& q, int k);

} // namespace mf

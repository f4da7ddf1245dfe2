#pragma once

// Definite quaternion orders, exact norm-form enumeration, splittings at the
// working prime, and the quotient of the lattice-class tree by the norm-one
// unit group (plus its torsion-free development via an auxiliary reduction).

#include <mumford/btree.hpp>

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mf {

// exact rational with small numerator/denominator
struct QRat {
    long long num = 0;
    long long den = 1;
    QRat() = default;
    QRat(long long n, long long d);
    friend bool operator==(const QRat&, const QRat&) = default;
    QRat operator*(const QRat& o) const { return QRat(num * o.num, den * o.den); }
    QRat operator+(const QRat& o) const { return QRat(num * o.den + o.num * den, den * o.den); }
    QRat operator-(const QRat& o) const { return QRat(num * o.den - o.num * den, den * o.den); }
};

// (n0 + n1 i + n2 j + n3 k) / d; the multiplication law lives on the algebra
struct Quat {
    std::array<long long, 4> n{0, 0, 0, 0};
    long long d = 1;
    Quat() = default;
    Quat(long long a0, long long a1, long long a2, long long a3, long long den = 1);
    static Quat scalar(const QRat& r) { return Quat(r.num, 0, 0, 0, r.den); }
    static Quat one() { return Quat(1, 0, 0, 0, 1); }
    friend bool operator==(const Quat&, const Quat&) = default;
    friend auto operator<=>(const Quat&, const Quat&) = default;
    std::string serialize() const;
    static Quat parse(const std::string& s);
};

struct QuatAlgebra {
    long a = -1, b = -1; // i^2 = a, j^2 = b
    long nminus = 2, nplus = 1;
    std::array<Quat, 4> basis; // Z-basis of the (Eichler) order

    Quat mul(const Quat& x, const Quat& y) const;
    Quat conj(const Quat& x) const { return Quat(x.n[0], -x.n[1], -x.n[2], -x.n[3], x.d); }
    QRat nrd(const Quat& x) const;
    QRat trd(const Quat& x) const { return QRat(2 * x.n[0], x.d); }
    Quat inv(const Quat& x) const; // conj / nrd
    long long gram_det() const;
    bool in_order(const Quat& x) const;
};

QuatAlgebra make_algebra(long nminus, long nplus = 1);

// images of 1, i, j, k in 2x2 matrices over the active prime field
struct Splitting {
    std::array<MatQ, 4> img;
    MatQ map(const Quat& x) const;
};

Splitting make_splitting(const QuatAlgebra& B);

// all order elements of the given reduced norm, up to sign, sorted
std::vector<Quat> enumerate_norm(const QuatAlgebra& B, long long t);
std::vector<Quat> enumerate_pure_norm(const QuatAlgebra& B, long long t);

struct QuotientGraph {
    long p = 0;
    long nminus = 0, nplus = 0;
    int precision = 0;
    std::vector<TreeVertex> verts;
    std::vector<std::vector<Quat>> vstabs; // norm-one stabilizers mod +-1
    struct QEdge {
        TreeEdge rep; // rep.o is verts[from]
        int from = 0, to = 0;
        std::vector<Quat> estab;
        std::optional<Quat> flip; // maps rep to its reversal, if any
    };
    std::vector<QEdge> edges;
    struct Incid {
        int orbit;
        Quat h; // h * (orbit rep, possibly reversed) = this incident edge
        bool rev;
    };
    std::vector<std::vector<Incid>> stars; // p+1 entries per vertex class

    std::string serialize() const;
    static QuotientGraph parse(const std::string& s);
};

struct FreeQuotient {
    std::vector<TreeVertex> verts;
    struct FEdge {
        TreeEdge rep;
        int from = 0, to = 0;
        Quat glue; // glue * rep.t = verts[to]; identity for tree edges
        bool in_tree = false;
    };
    std::vector<FEdge> edges;
    std::vector<std::vector<QuotientGraph::Incid>> stars; // p+1 entries per vertex
    int index = 0; // index of the torsion-free subgroup
};

struct ArithGroup {
    long p;
    QuatAlgebra B;
    Splitting split;
    long aux_ell = 0;                      // auxiliary split prime
    std::array<std::array<long, 4>, 4> aux_img; // 1,i,j,k as 2x2 (row-major) mod ell

    ArithGroup(long p_, long nminus, long nplus);

    const std::vector<Quat>& norms(long long t);
    MatQ mat(const Quat& g); // cached image (scaled to the splitting)

    Quat canon_sign(const Quat& q) const;
    Quat mul(const Quat& x, const Quat& y) const { return canon_sign(B.mul(x, y)); }

    std::optional<Quat> transport(const TreeVertex& v, const TreeVertex& w, int margin = 2);
    const std::vector<Quat>& stabilizer(const TreeVertex& v);
    std::vector<Quat> edge_stabilizer(const TreeEdge& e);
    std::optional<Quat> transport_edge(const TreeEdge& a, const TreeEdge& b, int margin = 2);

    std::array<long, 4> aux_image(const Quat& g) const; // projectively normalized
    bool in_kernel(const Quat& g) const;
    std::optional<Quat> transport_free(const TreeVertex& v, const TreeVertex& w);
    std::optional<Quat> transport_edge_free(const TreeEdge& a, const TreeEdge& b);

  private:
    std::map<long long, std::vector<Quat>> norm_cache;
    std::map<long long, std::vector<MatQ>> mat_cache_;
    std::map<Quat, MatQ> elt_mats_;
    std::map<TreeVertex, std::vector<Quat>> stab_cache;
    const std::vector<MatQ>& norm_mats(long long t);
    friend QuotientGraph build_quotient(ArithGroup&);
    friend FreeQuotient build_free_quotient(ArithGroup&, const TreeVertex&);
};

QuotientGraph build_quotient(ArithGroup& G);
FreeQuotient build_free_quotient(ArithGroup& G,
                                 const TreeVertex& base = TreeVertex::standard());

// certify completeness of the identifications; throws InvariantError
void check_masses(ArithGroup& G, const QuotientGraph& Q);

// order of the image of the group in the auxiliary projective linear group
int aux_index(ArithGroup& G, const QuotientGraph& Q);

// class of an arbitrary tree vertex: (class index, g) with g * rep = v
std::pair<int, Quat> locate_vertex(ArithGroup& G, const QuotientGraph& Q, const TreeVertex& v);

} // namespace mf

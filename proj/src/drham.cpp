#include <mumford/drham.hpp>

#include <algorithm>

namespace mf {

namespace {

// inverses of the norm-one glue elements of the non-tree edges, in the edge
// order of F; the evaluation pairing sums over exactly these
std::vector<Quat> free_generators(ArithGroup& G, const FreeQuotient& F) {
    std::vector<Quat> gens;
    for (const auto& fe : F.edges)
        if (!fe.in_tree) gens.push_back(G.canon_sign(G.B.conj(fe.glue)));
    return gens;
}

MatQ block_diag(const MatQ& A, const MatQ& B) {
    MatQ M = MatQ::Zero(A.rows() + B.rows(), A.cols() + B.cols());
    M.topLeftCorner(A.rows(), A.cols()) = A;
    M.bottomRightCorner(B.rows(), B.cols()) = B;
    return M;
}

long smallest_prime_factor(long n) {
    for (long q = 2; q * q <= n; q++)
        if (n % q == 0) return q;
    return n;
}

// mono, frob and filmid from (n, m, eps, prim); verified by the module view
void finish_structure(DeRhamSpace& D) {
    const int h = D.h;
    if (rank(D.eps) != h)
        throw InvariantError("harmonic cochains do not span the cohomology classes");
    D.mono = MatQ::Zero(2 * h, 2 * h);
    D.mono.topRightCorner(h, h) = -D.eps;
    D.frob = MatQ::Zero(2 * h, 2 * h);
    D.frob.topLeftCorner(h, h) = Qp::pow_p(D.m) * MatQ::Identity(h, h);
    D.frob.bottomRightCorner(h, h) =
        Qp::pow_p(D.m + 1) * (inverse(D.eps) * frobenius_entries(D.eps));
    D.filmid = MatQ::Zero(2 * h, h);
    D.filmid.topRows(h) = D.prim;
    D.filmid.bottomRows(h) = MatQ::Identity(h, h);
    phin_view(D).validate();
}

} // namespace

DeRhamSpace assemble_drham(int n, int m, const MatQ& eps, const MatQ& prim, const MatQ& pairH,
                           int cert) {
    DeRhamSpace D;
    D.n = n;
    D.m = m;
    D.h = (int)eps.rows();
    D.cert = cert;
    D.base = Qp::gen();
    D.eps = eps;
    D.prim = prim;
    D.pairH = pairH;
    D.up = MatQ(0, 0);
    D.winv = MatQ(0, 0);
    finish_structure(D);
    return D;
}

DeRhamSpace build_drham(ArithGroup& G, const QuotientGraph& Q, const FreeQuotient& F, int n,
                        int m, int depth) {
    DeRhamSpace D;
    D.n = n;
    D.m = m;
    D.depth = depth;
    D.base = Qp::gen();
    D.H = group_h1(G, Q, n, m);
    D.har = harmonic_space(G, Q, n, m);
    D.h = (int)D.har.size();
    if ((int)D.H.basis.size() != D.h)
        throw InvariantError("class and harmonic block dimensions disagree");
    const int h = D.h, d = n + 1;

    D.eps = MatQ(h, h);
    D.pairH = MatQ(h, h);
    for (int j = 0; j < h; j++) {
        D.eps.col(j) = h1_reduce(D.H, D.har[j]);
        for (int t = 0; t < h; t++)
            D.pairH(t, j) = pairing_gamma(G, Q, F, D.H.basis[t], D.har[j]);
    }

    // cocycles of the primitives at the free generators, certified digits
    std::vector<Quat> gens = free_generators(G, F);
    const int ng = (int)gens.size();
    MatQ J = pairing_matrix(n).transpose();
    int cert = INT32_MAX;
    MatQ rhs(ng * d, h);
    D.prim_cocycles.assign((size_t)h, {});
    for (int j = 0; j < h; j++)
        for (int i = 0; i < ng; i++) {
            Qp gz = act_point(G.mat(gens[(size_t)i]), D.base);
            MatQ vals(d, 1);
            for (int k = 0; k < d; k++) {
                VecQ P = VecQ::Zero(d);
                P(k) = Qp(1);
                IntegrationReport r = coleman_integral(G, Q, D.har[(size_t)j], D.base, gz, P,
                                                       depth);
                cert = std::min(cert, r.cert_val);
                vals(k, 0) = r.value;
            }
            VecQ zc = solve(J, vals).col(0);
            D.prim_cocycles[(size_t)j].push_back(zc);
            rhs.block(i * d, j, d, 1) = zc;
        }
    D.cert = std::min(cert, ctx().M) - 2;
    if (D.cert < 1) throw PrecisionError("no certified digits left in the primitive cocycles");

    // class coordinates of the primitive cocycles: expand over the class
    // basis plus one coboundary; the system is consistent only up to the
    // certified digits, so solve on an independent row subset and check the
    // rest as residuals
    MatQ A(ng * d, h + d);
    for (int i = 0; i < ng; i++) {
        for (int t = 0; t < h; t++)
            A.block(i * d, t, d, 1) = connecting_cocycle(G, Q, D.H.basis[(size_t)t],
                                                         gens[(size_t)i]);
        A.block(i * d, h, d, d) =
            MatQ::Identity(d, d) - weight_action(G.mat(gens[(size_t)i]), n, m);
    }
    std::vector<int> sel;
    {
        MatQ S(0, h + d);
        for (int r = 0; r < A.rows() && (int)sel.size() < h + d; r++) {
            MatQ S2(S.rows() + 1, h + d);
            S2 << S, A.row(r);
            if (rank(S2) > (int)sel.size()) {
                sel.push_back(r);
                S = std::move(S2);
            }
        }
    }
    MatQ Asel((int)sel.size(), h + d), bsel((int)sel.size(), h);
    for (size_t r = 0; r < sel.size(); r++) {
        Asel.row((long)r) = A.row(sel[r]);
        bsel.row((long)r) = rhs.row(sel[r]);
    }
    MatQ X = solve(Asel, bsel);
    MatQ resid = A * X - rhs;
    for (int i = 0; i < resid.rows(); i++)
        for (int j = 0; j < resid.cols(); j++)
            if (!resid(i, j).is_zero() && resid(i, j).v < D.cert - 2)
                throw InvariantError("primitive cocycle is not spanned by the classes");
    D.prim = X.topRows(h);

    D.up = block_diag(hecke_up(G, Q, D.H.basis), hecke_up(G, Q, D.har));
    long ell = smallest_prime_factor(Q.nminus);
    D.winv = block_diag(atkin_lehner_w(G, Q, D.H.basis, ell),
                        atkin_lehner_w(G, Q, D.har, ell));

    finish_structure(D);
    return D;
}

PhiNModule phin_view(const DeRhamSpace& D) {
    PhiNModule V;
    V.A = D.frob;
    V.N = D.mono;
    V.fil = {{D.m + 1, D.filmid}};
    return V;
}

MatQ cup_gram(const DeRhamSpace& D) {
    const int h = D.h;
    MatQ Gm = MatQ::Zero(2 * h, 2 * h);
    Gm.topRightCorner(h, h) = D.pairH;
    Gm.bottomLeftCorner(h, h) = -D.pairH.transpose();
    return Gm;
}

Qp cup_product(const DeRhamSpace& D, const VecQ& x, const VecQ& y) {
    return (x.transpose() * cup_gram(D) * y)(0, 0);
}

MatQ l_invariant_from_primitive(const DeRhamSpace& D) { return D.prim * inverse(D.eps); }

MatQ l_invariant_from_filtration(const DeRhamSpace& D) {
    return l_invariant(phin_view(D)).topLeftCorner(D.h, D.h);
}

OpenClass open_h1dr(ArithGroup& G, const QuotientGraph& Q, int n, int m,
                    const std::vector<Puncture>& ps) {
    const int d = n + 1;
    const int nv = (int)Q.verts.size();

    // divergence prescribed at each vertex class: every puncture spreads
    // over its orbit, so its residue enters through the full stabilizer,
    // transported to the class representative
    std::vector<MatQ> sym(Q.verts.size());
    for (int c = 0; c < nv; c++) {
        sym[(size_t)c] = MatQ::Zero(d, d);
        for (const Quat& s : Q.vstabs[(size_t)c])
            sym[(size_t)c] += weight_action(G.mat(s), n, m);
    }
    MatQ b = MatQ::Zero(nv * d, 1);
    for (const Puncture& P : ps) {
        if ((int)P.res.size() != d) throw HypothesisError("residue of the wrong degree");
        auto [c, gq] = locate_vertex(G, Q, reduction(P.z));
        VecQ at_rep = inverse(weight_action(G.mat(gq), n, m)) * P.res;
        b.col(0).segment(c * d, d) += sym[(size_t)c] * at_rep;
    }

    // invariant vertex cochains: values at the representatives fixed by the
    // stabilizers; parameterize each class by a basis of its fixed subspace
    std::vector<MatQ> K(Q.verts.size());
    std::vector<int> off(Q.verts.size() + 1, 0);
    for (int c = 0; c < nv; c++) {
        const auto& st = Q.vstabs[(size_t)c];
        MatQ C((int)st.size() * d, d);
        for (size_t s = 0; s < st.size(); s++)
            C.block((long)s * d, 0, d, d) =
                weight_action(G.mat(st[s]), n, m) - MatQ::Identity(d, d);
        K[(size_t)c] = kernel(C);
        off[(size_t)c + 1] = off[(size_t)c] + (int)K[(size_t)c].cols();
    }

    // divergence of the differential: neighbor sum minus (p+1) at the center
    MatQ L = MatQ::Zero(nv * d, off[(size_t)nv]);
    for (int c = 0; c < nv; c++) {
        L.block(c * d, off[(size_t)c], d, K[(size_t)c].cols()) -=
            Qp((long)Q.p + 1) * K[(size_t)c];
        for (const TreeVertex& w : neighbors(Q.verts[(size_t)c])) {
            auto [cw, gw] = locate_vertex(G, Q, w);
            L.block(c * d, off[(size_t)cw], d, K[(size_t)cw].cols()) +=
                weight_action(G.mat(gw), n, m) * K[(size_t)cw];
        }
    }
    MatQ y;
    try {
        y = solve(L, b);
    } catch (const HypothesisError&) {
        throw HypothesisError("the residue prescription is not a divergence");
    }

    auto h_at = [&](const TreeVertex& v) -> VecQ {
        auto [c, gv] = locate_vertex(G, Q, v);
        return weight_action(G.mat(gv), n, m) * K[(size_t)c] *
               y.col(0).segment(off[(size_t)c], K[(size_t)c].cols());
    };

    OpenClass a;
    a.n = n;
    a.m = m;
    a.punctures = ps;
    a.g.n = n;
    a.g.m = m;
    for (const auto& qe : Q.edges) a.g.vals.push_back(VecQ(h_at(qe.rep.t) - h_at(qe.rep.o)));
    return a;
}

Qp aj_extension_class(ArithGroup& G, const QuotientGraph& Q, const FreeQuotient& F,
                      const DeRhamSpace& D, int j, const OpenClass& a, int depth) {
    if (a.n != D.n || a.m != D.m) throw HypothesisError("open class of the wrong weight");
    const int d = D.n + 1;

    // edge part against the cocycle of the primitive, over a fundamental
    // domain of the free subgroup
    Qp s = Qp::zero_at(ctx().W);
    size_t i = 0;
    for (const auto& fe : F.edges) {
        if (fe.in_tree) continue;
        s += rep_pair(D.prim_cocycles[(size_t)j][i], eval_edge(G, Q, a.g, fe.rep));
        i++;
    }
    s = s * Qp::rational(1, (long)F.index);

    // puncture part: value of the primitive at each puncture, paired with
    // its residue
    MatQ J = pairing_matrix(D.n).transpose();
    for (const Puncture& P : a.punctures) {
        MatQ vals(d, 1);
        for (int k = 0; k < d; k++) {
            VecQ ek = VecQ::Zero(d);
            ek(k) = Qp(1);
            vals(k, 0) = coleman_integral(G, Q, D.har[(size_t)j], D.base, P.z, ek, depth).value;
        }
        s += rep_pair(solve(J, vals).col(0), P.res);
    }
    return s;
}

} // namespace mf

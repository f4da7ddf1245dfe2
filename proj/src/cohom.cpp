#include <mumford/cohom.hpp>

#include <utility>
#include <vector>

namespace mf {

namespace {

MatQ glue_rows(const std::vector<MatQ>& rows, int nv) {
    int r = 0;
    for (const auto& m : rows) r += (int)m.rows();
    MatQ A(r, nv);
    int at = 0;
    for (const auto& m : rows) {
        A.block(at, 0, m.rows(), nv) = m;
        at += (int)m.rows();
    }
    return A;
}

// pivot columns of A
MatQ image_basis(const MatQ& A) {
    RowEchelon E = row_echelon(A);
    MatQ B((int)A.rows(), (int)E.pivots.size());
    for (size_t i = 0; i < E.pivots.size(); i++) B.col((long)i) = A.col(E.pivots[i]);
    return B;
}

// stabilizer and antisymmetry constraints cutting out the invariant cochains
std::vector<MatQ> invariance_rows(ArithGroup& G, const QuotientGraph& Q, int n, int m) {
    const int E = (int)Q.edges.size(), d = n + 1, nv = E * d;
    std::vector<MatQ> rows;
    for (int j = 0; j < E; j++) {
        for (const Quat& s : Q.edges[(size_t)j].estab) {
            if (s == Quat::one()) continue;
            MatQ blk = MatQ::Zero(d, nv);
            blk.block(0, j * d, d, d) = weight_action(G.mat(s), n, m) - MatQ::Identity(d, d);
            rows.push_back(std::move(blk));
        }
        if (Q.edges[(size_t)j].flip) {
            MatQ blk = MatQ::Zero(d, nv);
            blk.block(0, j * d, d, d) =
                weight_action(G.mat(*Q.edges[(size_t)j].flip), n, m) + MatQ::Identity(d, d);
            rows.push_back(std::move(blk));
        }
    }
    return rows;
}

// one vanishing-sum row block per vertex class, from its star
template <typename Stars>
void star_rows(ArithGroup& G, const Stars& stars, int n, int m, int nv, std::vector<MatQ>& rows) {
    const int d = n + 1;
    for (const auto& star : stars) {
        MatQ row = MatQ::Zero(d, nv);
        for (const auto& inc : star) {
            MatQ w = weight_action(G.mat(inc.h), n, m);
            if (inc.rev) w = -w;
            row.block(0, inc.orbit * d, d, d) += w;
        }
        rows.push_back(std::move(row));
    }
}

} // namespace

MatQ weight_action(const MatQ& g, int n, int m) {
    MatQ adj(2, 2);
    adj << g(1, 1), -g(0, 1), -g(1, 0), g(0, 0);
    return rho_n(adj, n) * det(g).pow(-(long)m);
}

EdgeClass locate_edge(ArithGroup& G, const QuotientGraph& Q, const TreeEdge& e) {
    for (size_t j = 0; j < Q.edges.size(); j++) {
        if (auto g = G.transport_edge(Q.edges[j].rep, e)) return {(int)j, *g, false};
        if (auto g = G.transport_edge(Q.edges[j].rep.reversed(), e)) return {(int)j, *g, true};
    }
    throw InvariantError("edge not covered by the quotient classes");
}

VecQ eval_edge(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& c, const TreeEdge& e) {
    EdgeClass L = locate_edge(G, Q, e);
    VecQ v = weight_action(G.mat(L.g), c.n, c.m) * c.vals[(size_t)L.orbit];
    return L.rev ? VecQ(-v) : v;
}

VecQ stack_cochain(const EdgeCochain& c) {
    const int d = c.n + 1;
    VecQ x = VecQ::Zero((long)c.vals.size() * d);
    for (size_t j = 0; j < c.vals.size(); j++) x.segment((long)j * d, d) = c.vals[j];
    return x;
}

EdgeCochain unstack_cochain(const QuotientGraph& Q, int n, int m, const VecQ& x) {
    const int d = n + 1;
    EdgeCochain c{n, m, {}};
    for (size_t j = 0; j < Q.edges.size(); j++) c.vals.push_back(x.segment((long)j * d, d));
    return c;
}

std::vector<EdgeCochain> harmonic_space(ArithGroup& G, const QuotientGraph& Q, int n, int m) {
    const int nv = (int)Q.edges.size() * (n + 1);
    std::vector<MatQ> rows = invariance_rows(G, Q, n, m);
    star_rows(G, Q.stars, n, m, nv, rows);
    MatQ K = kernel(glue_rows(rows, nv));
    std::vector<EdgeCochain> out;
    for (int j = 0; j < K.cols(); j++) out.push_back(unstack_cochain(Q, n, m, K.col(j)));
    return out;
}

std::vector<std::vector<VecQ>> harmonic_space_free(ArithGroup& G, const FreeQuotient& F, int n,
                                                   int m) {
    const int d = n + 1, nv = (int)F.edges.size() * d;
    std::vector<MatQ> rows;
    star_rows(G, F.stars, n, m, nv, rows);
    MatQ K = kernel(glue_rows(rows, nv));
    std::vector<std::vector<VecQ>> out;
    for (int j = 0; j < K.cols(); j++) {
        std::vector<VecQ> vals;
        for (size_t e = 0; e < F.edges.size(); e++)
            vals.push_back(K.col(j).segment((long)e * d, d));
        out.push_back(std::move(vals));
    }
    return out;
}

H1Space group_h1(ArithGroup& G, const QuotientGraph& Q, int n, int m) {
    const int E = (int)Q.edges.size(), d = n + 1, nv = E * d;
    MatQ K1 = kernel(glue_rows(invariance_rows(G, Q, n, m), nv));

    // far-endpoint class and transported action, per edge orbit
    std::vector<std::pair<int, MatQ>> tloc;
    for (int j = 0; j < E; j++) {
        auto [cls, g] = locate_vertex(G, Q, Q.edges[(size_t)j].rep.t);
        tloc.push_back({cls, weight_action(G.mat(g), n, m)});
    }

    std::vector<VecQ> cobcols;
    for (size_t i = 0; i < Q.verts.size(); i++) {
        std::vector<MatQ> rows;
        for (const Quat& s : Q.vstabs[i]) {
            if (s == Quat::one()) continue;
            rows.push_back(weight_action(G.mat(s), n, m) - MatQ::Identity(d, d));
        }
        MatQ Ki = kernel(glue_rows(rows, d));
        for (int c = 0; c < Ki.cols(); c++) {
            VecQ y = Ki.col(c);
            VecQ col = VecQ::Zero(nv);
            for (int j = 0; j < E; j++) {
                if (tloc[(size_t)j].first == (int)i)
                    col.segment(j * d, d) += tloc[(size_t)j].second * y;
                if (Q.edges[(size_t)j].from == (int)i) col.segment(j * d, d) -= y;
            }
            cobcols.push_back(std::move(col));
        }
    }
    MatQ cob(nv, (long)cobcols.size());
    for (size_t c = 0; c < cobcols.size(); c++) cob.col((long)c) = cobcols[c];

    MatQ both(nv, cob.cols() + K1.cols());
    if (cob.cols() > 0) both.block(0, 0, nv, cob.cols()) = cob;
    if (K1.cols() > 0) both.block(0, cob.cols(), nv, K1.cols()) = K1;
    RowEchelon Ech = row_echelon(both);

    H1Space H{n, m, {}, cob};
    for (int piv : Ech.pivots)
        if (piv >= cob.cols()) H.basis.push_back(unstack_cochain(Q, n, m, K1.col(piv - cob.cols())));
    return H;
}

VecQ h1_reduce(const H1Space& H, const EdgeCochain& c) {
    const int k = (int)H.basis.size();
    const long nv = H.cob.rows();
    MatQ A(nv, H.cob.cols() + k);
    if (H.cob.cols() > 0) A.block(0, 0, nv, H.cob.cols()) = H.cob;
    for (int j = 0; j < k; j++) A.col(H.cob.cols() + j) = stack_cochain(H.basis[(size_t)j]);
    MatQ b(nv, 1);
    b.col(0) = stack_cochain(c);
    MatQ X = solve(A, b);
    return X.col(0).tail(k);
}

VecQ connecting_cocycle(ArithGroup& G, const QuotientGraph& Q, const EdgeCochain& c,
                        const Quat& gamma) {
    MatQ Mg = G.mat(gamma);
    TreeVertex v0 = TreeVertex::standard();
    TreeVertex w = act_vertex(inverse(Mg), v0);
    VecQ h = VecQ::Zero(c.n + 1);
    for (const TreeEdge& e : tree_geodesic(v0, w)) h += eval_edge(G, Q, c, e);
    return weight_action(Mg, c.n, c.m) * h;
}

Qp pairing_gamma(ArithGroup& G, const QuotientGraph& Q, const FreeQuotient& F,
                 const EdgeCochain& z, const EdgeCochain& f) {
    Qp s = Qp::zero_at(ctx().W);
    for (const auto& fe : F.edges) {
        if (fe.in_tree) continue;
        Quat gi = G.canon_sign(G.B.conj(fe.glue)); // the inverse of the norm-one glue
        s += rep_pair(connecting_cocycle(G, Q, z, gi), eval_edge(G, Q, f, fe.rep));
    }
    return s * Qp::rational(1, (long)F.index);
}

MatQ hecke_matrix(ArithGroup& G, const QuotientGraph& Q, const std::vector<EdgeCochain>& basis,
                  const Quat& alpha) {
    if (basis.empty()) return MatQ(0, 0);
    const int n = basis[0].n, m = basis[0].m, d = n + 1;
    const int E = (int)Q.edges.size(), nv = E * d, k = (int)basis.size();
    MatQ Bm(nv, k), Op(nv, k);
    for (int b = 0; b < k; b++) Bm.col(b) = stack_cochain(basis[(size_t)b]);
    MatQ wa = weight_action(G.mat(alpha), n, m);
    MatQ MaInv = G.mat(G.canon_sign(G.B.conj(alpha))); // alpha^{-1} up to scalars
    for (int j = 0; j < E; j++) {
        TreeEdge ej = act_edge(MaInv, Q.edges[(size_t)j].rep);
        for (int b = 0; b < k; b++)
            Op.block(j * d, b, d, 1) = wa * eval_edge(G, Q, basis[(size_t)b], ej);
    }
    return solve(Bm, Op);
}

MatQ atkin_lehner_w(ArithGroup& G, const QuotientGraph& Q, const std::vector<EdgeCochain>& basis,
                    long long ell) {
    const auto& cands = G.norms(ell);
    if (cands.empty()) throw HypothesisError("no order element of the requested norm");
    return hecke_matrix(G, Q, basis, cands.front());
}

MatQ hecke_up(ArithGroup& G, const QuotientGraph& Q, const std::vector<EdgeCochain>& basis) {
    if (basis.empty()) return MatQ(0, 0);
    MatQ W = atkin_lehner_w(G, Q, basis, G.p);
    return W * (-Qp::pow_p(basis[0].m));
}

std::vector<Qp> qp_roots(const Poly& f) {
    const FieldContext& F = ctx();
    std::vector<Qp> out;
    auto push = [&](const Qp& x) {
        for (const Qp& r : out)
            if (!r.is_zero() && !x.is_zero() && r.v == x.v && r.eq(x, F.M - 2)) return;
        out.push_back(x);
    };
    Poly df = f.derivative();
    for (const auto& [sl, mult] : newton_slopes(f)) {
        if (sl.den != 1) continue;
        Qp ps = Qp::pow_p((int)sl.num);
        const long blim = F.mu == 2 ? F.p : 1;
        for (long a = 0; a < F.p; a++)
            for (long b = 0; b < blim; b++) {
                if (a == 0 && b == 0) continue;
                Qp x = Qp::unit_from_residues((uint64_t)a, (uint64_t)b, F.W) * ps;
                Qp fx = f.eval(x);
                if (fx.is_zero()) {
                    push(x);
                    continue;
                }
                Qp dfx = df.eval(x);
                if (dfx.is_zero() || fx.v <= 2 * dfx.v) continue;
                for (int it = 0; it < 30; it++) {
                    Qp corr = f.eval(x) / df.eval(x);
                    if (corr.is_zero()) break;
                    x -= corr;
                }
                if (f.eval(x).is_zero()) push(x);
            }
    }
    return out;
}

std::vector<EigenBlock> eigen_split(const std::vector<MatQ>& ops) {
    std::vector<MatQ> blocks;
    if (!ops.empty() && ops[0].rows() > 0)
        blocks.push_back(MatQ::Identity(ops[0].rows(), ops[0].rows()));
    for (const MatQ& M : ops) {
        std::vector<MatQ> next;
        for (MatQ& Bl : blocks) {
            const int w = (int)Bl.cols();
            if (w == 1) {
                next.push_back(Bl);
                continue;
            }
            MatQ R = solve(Bl, MatQ(M * Bl));
            std::vector<Qp> roots;
            try {
                roots = qp_roots(charpoly(R));
            } catch (const HypothesisError&) {
            }
            std::vector<MatQ> parts;
            int tot = 0;
            MatQ rem = MatQ::Identity(w, w);
            for (const Qp& lam : roots) {
                MatQ S = R;
                for (int i = 0; i < w; i++) S(i, i) -= lam;
                S = mat_pow(S, (unsigned long)w);
                MatQ K = kernel(S);
                if (K.cols() == 0) continue;
                parts.push_back(MatQ(Bl * K));
                tot += (int)K.cols();
                rem = rem * S;
            }
            MatQ rest = image_basis(rem); // complement untouched by the found roots
            if (tot + rest.cols() == w && tot > 0 && (parts.size() + (rest.cols() > 0)) > 1) {
                for (auto& P : parts) next.push_back(std::move(P));
                if (rest.cols() > 0) next.push_back(MatQ(Bl * rest));
            } else {
                next.push_back(Bl);
            }
        }
        blocks = next;
    }
    std::vector<EigenBlock> out;
    for (auto& Bl : blocks) {
        EigenBlock eb{Bl, {}};
        if (Bl.cols() == 1)
            for (const MatQ& M : ops) eb.eigs.push_back(solve(Bl, MatQ(M * Bl))(0, 0));
        out.push_back(std::move(eb));
    }
    return out;
}

} // namespace mf

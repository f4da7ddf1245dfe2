#include <mumford/phin.hpp>

#include <algorithm>
#include <set>
#include <sstream>

namespace mf {

namespace {

int restriction_factor() { return ctx().mu == 2 ? 2 : 1; }

// the prime-field-linear matrix of x -> N x (no sigma) in split components
MatQ linear_restriction(const MatQ& A) {
    if (ctx().mu != 2) return A;
    const int m = (int)A.rows(), n = (int)A.cols();
    MatQ A1(m, n), A2(m, n);
    for (int i = 0; i < m; i++)
        for (int j = 0; j < n; j++) {
            auto [u, w] = split_scalar(A(i, j));
            A1(i, j) = u;
            A2(i, j) = w;
        }
    Qp r((long)ctx().r);
    MatQ M(2 * m, 2 * n);
    M << A1, (r * A2).eval(), A2, A1;
    return M;
}

MatQ semi_restrict(const MatQ& A) { return ctx().mu == 2 ? semilinear_restriction(A) : A; }
VecQ vec_restrict(const VecQ& v) { return ctx().mu == 2 ? split_vector(v) : v; }
VecQ vec_unrestrict(const VecQ& v) { return ctx().mu == 2 ? merge_vector(v) : v; }

// independent columns of M, as columns of M itself
MatQ image_basis(const MatQ& M) {
    RowEchelon E = row_echelon(M);
    MatQ B((int)M.rows(), E.rank);
    for (int k = 0; k < E.rank; k++) B.col(k) = M.col(E.pivots[k]);
    return B;
}

bool span_contains(const MatQ& B, const MatQ& X) {
    MatQ aug((int)B.rows(), B.cols() + X.cols());
    aug << B, X;
    return rank(aug) == rank(B);
}

bool mat_small(const MatQ& M, int k) {
    for (int i = 0; i < M.rows(); i++)
        for (int j = 0; j < M.cols(); j++)
            if (!M(i, j).eq(Qp(0), k)) return false;
    return true;
}

// full coefficient algebra spanned by the identity and the stored generators
std::vector<MatQ> algebra_basis(const PhiNModule& D) {
    const int d = D.dim();
    std::vector<MatQ> bas = {MatQ::Identity(d, d)};
    auto flat = [&](const MatQ& m) {
        VecQ v(d * d);
        for (int i = 0; i < d; i++)
            for (int j = 0; j < d; j++) v(i * d + j) = m(i, j);
        return v;
    };
    auto in_span = [&](const MatQ& m) {
        MatQ big(d * d, (int)bas.size() + 1);
        for (size_t k = 0; k < bas.size(); k++) big.col((int)k) = flat(bas[k]);
        big.col((int)bas.size()) = flat(m);
        return rank(big) == (int)bas.size();
    };
    bool grew = true;
    while (grew) {
        grew = false;
        for (size_t i = 0; i < bas.size(); i++)
            for (const MatQ& g : D.T) {
                MatQ prod = bas[i] * g;
                if (!in_span(prod)) {
                    bas.push_back(prod);
                    grew = true;
                }
            }
    }
    return bas;
}

} // namespace

MatQ PhiNModule::fil_at(int j) const {
    MatQ cur = MatQ::Identity(dim(), dim());
    for (const auto& [jump, basis] : fil) {
        if (jump > j) break;
        cur = basis;
    }
    return cur;
}

void PhiNModule::validate() const {
    const FieldContext& F = ctx();
    if (A.rows() != A.cols() || N.rows() != N.cols() || A.rows() != N.rows())
        throw HypothesisError("mismatched Frobenius/monodromy dimensions");
    MatQ lhs = N * A;
    MatQ rhs = Qp::pow_p(1) * (A * frobenius_entries(N));
    if (!mat_small(MatQ(lhs - rhs), F.W - 4))
        throw HypothesisError("monodromy relation N A = p A sigma(N) fails");
    if (rank(A) != dim()) throw HypothesisError("Frobenius not invertible at working precision");
    for (size_t k = 0; k + 1 < fil.size(); k++) {
        if (fil[k].first >= fil[k + 1].first)
            throw HypothesisError("filtration jumps not strictly increasing");
        if (!span_contains(fil[k].second, fil[k + 1].second))
            throw HypothesisError("filtration not nested");
    }
}

PhiNModule unit_module() {
    PhiNModule D;
    D.A = MatQ::Identity(1, 1);
    D.N = MatQ::Zero(1, 1);
    D.fil = {{0, MatQ::Identity(1, 1)}, {1, MatQ(1, 0)}};
    return D;
}

PhiNModule twist(const PhiNModule& D, int i) {
    PhiNModule R = D;
    R.A = Qp::pow_p(i) * D.A;
    for (auto& [j, b] : R.fil) j += i;
    return R;
}

PhiNModule conjugate(const PhiNModule& D, const MatQ& g) {
    PhiNModule R;
    MatQ gi = inverse(g);
    R.A = g * D.A * frobenius_entries(gi);
    R.N = g * D.N * gi;
    for (const auto& [j, b] : D.fil) R.fil.push_back({j, MatQ(g * b)});
    for (const MatQ& t : D.T) R.T.push_back(g * t * gi);
    return R;
}

PhiNModule standard_monodromy(int m, const Qp& L) {
    PhiNModule D;
    D.A = MatQ::Zero(2, 2);
    D.A(0, 0) = Qp::pow_p(m);
    D.A(1, 1) = Qp::pow_p(m + 1);
    D.N = MatQ::Zero(2, 2);
    D.N(0, 1) = Qp(1);
    MatQ f(2, 1);
    f(0, 0) = -L;
    f(1, 0) = Qp(1);
    D.fil = {{m + 1, f}};
    return D;
}

std::vector<SlopePiece> slope_decompose(const PhiNModule& D) {
    D.validate();
    const FieldContext& F = ctx();
    MatQ L = F.mu == 2 ? MatQ(D.A * frobenius_entries(D.A)) : D.A;
    auto pr = slope_projectors(L);
    std::vector<SlopePiece> out;
    for (auto& [fr, pi] : pr) {
        SlopePiece pc;
        pc.slope = make_frac(fr.num, fr.den * F.mu);
        pc.basis = image_basis(pi);
        // stable-lattice certificate: the restriction has one pure slope
        MatQ C = solve(pc.basis, MatQ(L * pc.basis));
        if (pc.basis.cols() > 0) {
            auto ns = newton_slopes(charpoly(C));
            if (ns.size() != 1 || !(ns[0].first == fr))
                throw InvariantError("slope piece is not pure");
        }
        out.push_back(pc);
    }
    return out;
}

MonodromyDecomp is_monodromy_module(const PhiNModule& D) {
    D.validate();
    const FieldContext& F = ctx();
    const int d = D.dim();
    std::vector<MatQ> tau = algebra_basis(D);
    const int td = (int)tau.size();

    // (i) free of rank two over the coefficient algebra
    bool free2 = false;
    if (d == 2 * td) {
        for (int i = 0; i < d && !free2; i++) {
            MatQ U1(d, td);
            for (int r = 0; r < td; r++) U1.col(r) = tau[r].col(i);
            if (rank(U1) != td) continue;
            for (int j = 0; j < d && !free2; j++) {
                MatQ U(d, 2 * td);
                for (int r = 0; r < td; r++) {
                    U.col(r) = tau[r].col(i);
                    U.col(td + r) = tau[r].col(j);
                }
                if (rank(U) == d) free2 = true;
            }
        }
    }
    if (!free2) throw HypothesisError("(i) not free of rank two over the coefficient algebra");

    // (ii) exact at the middle: Im N = Ker N
    if (!mat_small(MatQ(D.N * D.N), F.W - 4) || 2 * rank(D.N) != d)
        throw HypothesisError("(ii) the sequence is not exact at the middle");

    // (iii) a filtration step that is a free rank-one complement of Ker N
    MatQ kerN = kernel(D.N);
    int j0 = 0;
    bool found = false;
    for (const auto& [j, B] : D.fil) {
        if (rank(B) != d / 2) continue;
        MatQ aug(d, B.cols() + kerN.cols());
        aug << B, kerN;
        if (rank(aug) != d) continue;
        bool stable = true;
        for (const MatQ& t : D.T)
            if (!span_contains(B, MatQ(t * B))) stable = false;
        if (!stable) continue;
        j0 = j;
        found = true;
        break;
    }
    if (!found)
        throw HypothesisError("(iii) no filtration step complements the kernel of N");

    MonodromyDecomp md;
    md.j0 = j0;
    md.d1 = image_basis(kerN);
    // complementary slope component: the pieces not killed by N
    auto sd = slope_decompose(D);
    std::vector<MatQ> rest;
    int cols = 0;
    for (auto& pc : sd)
        if (!mat_small(MatQ(D.N * pc.basis), F.W - 4)) {
            rest.push_back(pc.basis);
            cols += (int)pc.basis.cols();
        }
    md.d2 = MatQ(d, cols);
    int at = 0;
    for (const MatQ& b : rest) {
        md.d2.block(0, at, d, b.cols()) = b;
        at += (int)b.cols();
    }
    if (rank(MatQ(D.N * md.d2)) != d / 2 || md.d2.cols() != d / 2)
        throw HypothesisError("(ii) N is not an isomorphism onto the kernel component");
    return md;
}

MatQ l_invariant(const PhiNModule& D) {
    MonodromyDecomp md = is_monodromy_module(D);
    const FieldContext& F = ctx();
    const int d = D.dim();
    std::vector<MatQ> tau = algebra_basis(D);
    const int td = (int)tau.size();
    MatQ B = D.fil_at(md.j0);
    const int k = (int)B.cols(), s = (int)md.d2.cols();
    MatQ M = MatQ::Zero(d * s, td + s * k);
    VecQ rhs(d * s);
    for (int si = 0; si < s; si++) {
        VecQ x = md.d2.col(si);
        VecQ nx = D.N * x;
        for (int r = 0; r < td; r++) M.block(si * d, r, d, 1) = tau[r] * nx;
        for (int b = 0; b < k; b++) M.block(si * d, td + si * k + b, d, 1) = B.col(b);
        rhs.segment(si * d, d) = x;
    }
    MatQ K = kernel(M);
    for (int c = 0; c < K.cols(); c++)
        for (int r = 0; r < td; r++)
            if (!K(r, c).eq(Qp(0), F.W - 4))
                throw PrecisionError("L-invariant system is rank deficient");
    MatQ sol = solve(M, rhs);
    MatQ L = MatQ::Zero(d, d);
    for (int r = 0; r < td; r++) L += tau[r] * sol(r, 0);
    return L;
}

PhiNModule ext1_build(const PhiNModule& D, int n, const VecQ& c) {
    D.validate();
    const int d = D.dim();
    PhiNModule E;
    E.A = MatQ::Zero(d + 1, d + 1);
    E.A.topLeftCorner(d, d) = D.A;
    E.A(d, d) = Qp::pow_p(n);
    E.N = MatQ::Zero(d + 1, d + 1);
    E.N.topLeftCorner(d, d) = D.N;
    std::set<int> jumps;
    for (const auto& [j, b] : D.fil) jumps.insert(j);
    jumps.insert(n + 1);
    for (int j : jumps) {
        MatQ base = D.fil_at(j);
        int extra = j <= n ? 1 : 0;
        MatQ B = MatQ::Zero(d + 1, base.cols() + extra);
        B.topLeftCorner(d, base.cols()) = base;
        if (extra) {
            B.block(0, base.cols(), d, 1) = c;
            B(d, base.cols()) = Qp(1);
        }
        E.fil.push_back({j, B});
    }
    return E;
}

VecQ fil_reduce(const PhiNModule& D, int n, VecQ y) {
    MatQ B = D.fil_at(n);
    RowEchelon E = row_echelon(MatQ(B.transpose()));
    for (int r = 0; r < E.rank; r++) {
        int cpos = E.pivots[r];
        Qp f = y(cpos);
        for (int j = 0; j < y.size(); j++) y(j) -= f * E.R(r, j);
    }
    return y;
}

VecQ ext1_class(const PhiNModule& E, const PhiNModule& D, int n) {
    const FieldContext& F = ctx();
    const int d = D.dim();
    if (E.dim() != d + 1) throw HypothesisError("extension has the wrong dimension");
    int dg = F.W - 4;
    if (!mat_small(MatQ(E.A.topLeftCorner(d, d) - D.A), dg) ||
        !mat_small(MatQ(E.N.topLeftCorner(d, d) - D.N), dg) ||
        !mat_small(MatQ(E.A.block(d, 0, 1, d)), dg) || !mat_small(MatQ(E.N.row(d)), dg) ||
        !E.A(d, d).eq(Qp::pow_p(n), dg))
        throw HypothesisError("not an extension of the given pair in these coordinates");
    VecQ v = E.A.block(0, d, d, 1);
    VecQ w = E.N.block(0, d, d, 1);

    // the canonical equivariant section (y, 1): A sigma(y) - p^n y = -v, N y = -w
    const int rho = restriction_factor();
    MatQ top = semi_restrict(D.A);
    Qp pn = Qp::pow_p(n);
    for (int i = 0; i < rho * d; i++) top(i, i) -= pn;
    MatQ bot = linear_restriction(D.N);
    MatQ S(top.rows() + bot.rows(), rho * d);
    S << top, bot;
    if (kernel(S).cols() != 0)
        throw HypothesisError("extension class is not unique: slope hypothesis fails");
    VecQ rhs(S.rows());
    rhs.head(rho * d) = -vec_restrict(v);
    rhs.tail(rho * d) = -vec_restrict(w);
    VecQ y = vec_unrestrict(VecQ(solve(S, rhs)));

    // the filtration section: a vector of F^n with last coordinate one
    MatQ B = E.fil_at(n);
    MatQ one(1, 1);
    one(0, 0) = Qp(1);
    MatQ t = solve(MatQ(B.row(d)), one);
    VecQ lift = B * t;
    VecQ crep = lift.head(d) - y;
    return fil_reduce(D, n, crep);
}

PhiNModule baer_sum(const PhiNModule& E1, const PhiNModule& E2, const PhiNModule& D, int n) {
    const FieldContext& F = ctx();
    const int d = D.dim();
    int dg = F.W - 4;
    for (const PhiNModule* E : {&E1, &E2}) {
        if (E->dim() != d + 1) throw HypothesisError("Baer sum of mismatched extensions");
        if (!mat_small(MatQ(E->A.topLeftCorner(d, d) - D.A), dg) ||
            !E->A(d, d).eq(Qp::pow_p(n), dg))
            throw HypothesisError("Baer sum needs both extensions over the same module");
    }
    PhiNModule S;
    S.A = MatQ::Zero(d + 1, d + 1);
    S.A.topLeftCorner(d, d) = D.A;
    S.A.block(0, d, d, 1) = E1.A.block(0, d, d, 1) + E2.A.block(0, d, d, 1);
    S.A(d, d) = Qp::pow_p(n);
    S.N = MatQ::Zero(d + 1, d + 1);
    S.N.topLeftCorner(d, d) = D.N;
    S.N.block(0, d, d, 1) = E1.N.block(0, d, d, 1) + E2.N.block(0, d, d, 1);

    std::set<int> jumps;
    for (const auto& [j, b] : E1.fil) jumps.insert(j);
    for (const auto& [j, b] : E2.fil) jumps.insert(j);
    for (int j : jumps) {
        MatQ B1 = E1.fil_at(j), B2 = E2.fil_at(j);
        const int k1 = (int)B1.cols(), k2 = (int)B2.cols();
        // pairs with matching quotient coordinate, pushed out along the sum
        MatQ rowc(1, k1 + k2);
        rowc << B1.row(d), -B2.row(d);
        MatQ K = kernel(rowc);
        MatQ cand(d + 1, K.cols());
        for (int c = 0; c < K.cols(); c++) {
            VecQ a = K.col(c).head(k1), b = K.col(c).tail(k2);
            cand.block(0, c, d, 1) = B1.topRows(d) * a + B2.topRows(d) * b;
            cand(d, c) = (B1.row(d) * a)(0, 0);
        }
        S.fil.push_back({j, image_basis(cand)});
    }
    return S;
}

std::vector<VecQ> gamma_sections(const PhiNModule& D) {
    D.validate();
    const int d = D.dim();
    const int rho = restriction_factor();
    MatQ top = semi_restrict(D.A);
    for (int i = 0; i < rho * d; i++) top(i, i) -= Qp(1);
    MatQ bot = linear_restriction(D.N);
    MatQ S(top.rows() + bot.rows(), rho * d);
    S << top, bot;
    MatQ Kr = kernel(S); // prime-field basis of the phi-fixed, N-killed vectors
    MatQ F0 = D.fil_at(0);
    MatQ FR(rho * d, rho * (int)F0.cols());
    for (int c = 0; c < F0.cols(); c++) {
        FR.col(rho * c) = vec_restrict(F0.col(c));
        if (rho == 2) FR.col(rho * c + 1) = vec_restrict(VecQ(Qp::gen() * F0.col(c)));
    }
    MatQ join(rho * d, Kr.cols() + FR.cols());
    join << Kr, -FR;
    MatQ KK = kernel(join);
    MatQ pts(rho * d, KK.cols());
    for (int c = 0; c < KK.cols(); c++) pts.col(c) = Kr * KK.col(c).head(Kr.cols());
    MatQ basis = image_basis(pts);
    std::vector<VecQ> out;
    for (int c = 0; c < basis.cols(); c++) out.push_back(vec_unrestrict(VecQ(basis.col(c))));
    return out;
}

// ---- serialization ----------------------------------------------------------

namespace {

void put_mat(std::ostringstream& os, const MatQ& M) {
    os << M.rows() << " " << M.cols() << "\n";
    for (int i = 0; i < M.rows(); i++) {
        for (int j = 0; j < M.cols(); j++) {
            if (j) os << " | ";
            os << M(i, j).serialize();
        }
        os << "\n";
    }
}

MatQ get_mat(std::istream& is) {
    int r, c;
    is >> r >> c;
    std::string line;
    std::getline(is, line);
    MatQ M(r, c);
    for (int i = 0; i < r; i++) {
        std::getline(is, line);
        size_t pos = 0;
        for (int j = 0; j < c; j++) {
            size_t next = line.find(" | ", pos);
            std::string tok = line.substr(pos, next == std::string::npos ? next : next - pos);
            M(i, j) = Qp::parse(tok);
            pos = next == std::string::npos ? line.size() : next + 3;
        }
    }
    return M;
}

} // namespace

std::string PhiNModule::serialize() const {
    std::ostringstream os;
    os << "phin 1\n";
    os << "A ";
    put_mat(os, A);
    os << "N ";
    put_mat(os, N);
    os << "fil " << fil.size() << "\n";
    for (const auto& [j, b] : fil) {
        os << j << " ";
        put_mat(os, b);
    }
    os << "T " << T.size() << "\n";
    for (const MatQ& t : T) put_mat(os, t);
    return os.str();
}

PhiNModule PhiNModule::parse(const std::string& s) {
    std::istringstream is(s);
    std::string tag;
    int ver;
    is >> tag >> ver;
    if (tag != "phin" || ver != 1) throw HypothesisError("unrecognized module format");
    PhiNModule D;
    is >> tag;
    D.A = get_mat(is);
    is >> tag;
    D.N = get_mat(is);
    size_t nf, nt;
    is >> tag >> nf;
    for (size_t i = 0; i < nf; i++) {
        int j;
        is >> j;
        D.fil.push_back({j, get_mat(is)});
    }
    is >> tag >> nt;
    for (size_t i = 0; i < nt; i++) D.T.push_back(get_mat(is));
    return D;
}

} // namespace mf

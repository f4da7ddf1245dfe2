#include <mumford/checks.hpp>

#include <algorithm>
#include <climits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <utility>

namespace mf {

namespace {

bool mat_small(const MatQ& A, int k) {
    for (int i = 0; i < A.rows(); i++)
        for (int j = 0; j < A.cols(); j++)
            if (!A(i, j).eq(Qp(0), k)) return false;
    return true;
}

int val_diff(const Qp& a, const Qp& b) {
    Qp d = a - b;
    return d.is_zero() ? INT32_MAX : (int)d.v;
}

std::string digits(int v) { return v == INT32_MAX ? "exact" : std::to_string(v) + " digits"; }

} // namespace

std::vector<CriterionResult>
run_acceptance(const InstanceConfig& C,
               const std::function<void(const CriterionResult&)>& emit) {
    C.validate();
    ScopedField sf(C.p, 2, C.precision);
    if (C.branch != 0) ctx_mut().set_branch(Qp(C.branch));
    const int Mp = ctx().M;
    const int nn = C.n(), mm = C.m();

    std::mt19937_64 rng(C.seed ? C.seed : 1);
    auto rnd_small = [&rng]() { return Qp((long)(rng() % 625) - 312); };
    auto rnd_invertible = [&](int d) {
        while (true) {
            MatQ g(d, d);
            for (int i = 0; i < d; i++)
                for (int j = 0; j < d; j++) g(i, j) = rnd_small();
            if (!det(g).is_zero() && det(g).v == 0) return g;
        }
    };
    // extension-equivalence disguise: identity on the sub and the quotient
    auto disguise = [&](const PhiNModule& E, const VecQ& u) {
        int d = E.dim();
        MatQ g = MatQ::Identity(d, d);
        for (int i = 0; i + 1 < d; i++) g(i, d - 1) = u(i);
        return conjugate(E, g);
    };

    ArithGroup G(C.p, C.nminus, C.nplus);
    QuotientGraph Q = build_quotient(G);
    FreeQuotient F = build_free_quotient(G);
    std::vector<EdgeCochain> har = harmonic_space(G, Q, nn, mm);

    std::optional<DeRhamSpace> Dopt;
    auto drham = [&]() -> DeRhamSpace& {
        if (!Dopt) Dopt = build_drham(G, Q, F, nn, mm, C.depth);
        return *Dopt;
    };
    std::optional<HeegnerDatum> Hopt;
    auto datum = [&]() -> HeegnerDatum& {
        if (!Hopt) {
            for (const Quat& cand : enumerate_pure_norm(G.B, -C.dk)) {
                try {
                    Hopt = heegner_datum(G, cand);
                    break;
                } catch (const HypothesisError&) {
                }
            }
            if (!Hopt)
                throw HypothesisError("no embedding of the field into the order was found");
        }
        return *Hopt;
    };

    std::vector<CriterionResult> out;
    auto crit = [&](int id, const char* name,
                    const std::function<std::pair<bool, std::string>()>& fn) {
        CriterionResult r;
        r.id = id;
        r.name = name;
        try {
            auto res = fn();
            r.pass = res.first;
            r.detail = res.second;
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = e.what();
        }
        out.push_back(r);
        if (emit) emit(out.back());
    };

    // ---- 1: randomized semilinear modules --------------------------------
    crit(1, "semilinear module algebra on randomized instances", [&] {
        bool ok = true;
        for (int t = 0; t < 100 && ok; t++) {
            PhiNModule D0;
            int type = t % 3;
            Qp L = rnd_small();
            if (L.is_zero()) L = Qp(1);
            if (type == 0) {
                D0 = standard_monodromy((int)(rng() % 3), L);
            } else if (type == 1) {
                D0.A = MatQ::Zero(2, 2);
                D0.A(0, 0) = Qp::pow_p((int)(rng() % 4));
                D0.A(1, 1) = Qp::pow_p((int)(rng() % 4));
                D0.N = MatQ::Zero(2, 2);
                D0.fil = {{0, MatQ::Identity(2, 2)}};
            } else {
                PhiNModule S = standard_monodromy((int)(rng() % 3), L);
                D0.A = MatQ::Zero(3, 3);
                D0.A.topLeftCorner(2, 2) = S.A;
                D0.A(2, 2) = Qp::pow_p((int)(rng() % 5));
                D0.N = MatQ::Zero(3, 3);
                D0.N.topLeftCorner(2, 2) = S.N;
                D0.fil = {{0, MatQ::Identity(3, 3)}};
            }
            int d = D0.dim();
            PhiNModule Dm = conjugate(D0, rnd_invertible(d));
            Dm.validate(); // the commutation law N A = p A sigma(N)
            auto sd = slope_decompose(Dm);
            int tot = 0;
            for (const auto& pc : sd) tot += (int)pc.basis.cols();
            ok = ok && tot == d;
            MatQ all(d, tot);
            int col = 0;
            for (const auto& pc : sd) {
                all.middleCols(col, pc.basis.cols()) = pc.basis;
                col += (int)pc.basis.cols();
            }
            ok = ok && rank(all) == d; // direct sum
            for (const auto& pc : sd) {
                // phi-stability of each piece
                MatQ phi = Dm.A * frobenius_entries(pc.basis);
                MatQ aug(d, 2 * pc.basis.cols());
                aug << pc.basis, phi;
                ok = ok && rank(aug) == (int)pc.basis.cols();
                // N lands one slope lower
                MatQ img = Dm.N * pc.basis;
                const MatQ* low = nullptr;
                Frac down = make_frac(pc.slope.num - pc.slope.den, pc.slope.den);
                for (const auto& qc : sd)
                    if (qc.slope == down) low = &qc.basis;
                if (low) {
                    MatQ a2(d, low->cols() + img.cols());
                    a2 << *low, img;
                    ok = ok && rank(a2) == rank(*low);
                } else {
                    ok = ok && mat_small(img, Mp - 2);
                }
            }
            // twisting shifts every slope by exactly i
            int tw = (int)(rng() % 5) - 2;
            auto sd2 = slope_decompose(twist(Dm, tw));
            ok = ok && sd2.size() == sd.size();
            for (size_t i = 0; ok && i < sd.size(); i++)
                ok = sd2[i].slope ==
                     make_frac(sd[i].slope.num + (long)tw * sd[i].slope.den, sd[i].slope.den);
        }
        return std::pair{ok, std::string("100 modules")};
    });

    // ---- 2: planted L-invariants ------------------------------------------
    crit(2, "planted L-invariant recovery", [&] {
        bool ok = true;
        int worst = INT32_MAX;
        for (int t = 0; t < 50; t++) {
            Qp L = rnd_small();
            if (L.is_zero()) L = Qp(1);
            PhiNModule D =
                conjugate(standard_monodromy((int)(rng() % 3), L), rnd_invertible(2));
            MatQ Lm = l_invariant(D);
            worst = std::min({worst, val_diff(Lm(0, 0), L), val_diff(Lm(0, 1), Qp(0))});
        }
        ok = worst >= Mp - 2;
        return std::pair{ok, "50 plants, worst agreement " + digits(worst)};
    });

    // ---- 3: extension-class round trip -------------------------------------
    crit(3, "extension-class round trip", [&] {
        bool ok = true;
        for (int t = 0; t < 20 && ok; t++) {
            int m0 = (int)(rng() % 3), n0 = m0 + 1;
            Qp L = rnd_small();
            if (L.is_zero()) L = Qp(1);
            PhiNModule D = standard_monodromy(m0, L);
            VecQ c(2), u(2);
            c << rnd_small(), rnd_small();
            u << rnd_small(), rnd_small();
            PhiNModule E = disguise(ext1_build(D, n0, c), u);
            VecQ got = ext1_class(E, D, n0);
            VecQ want = fil_reduce(D, n0, c);
            for (int i = 0; i < 2; i++) ok = ok && got(i).eq(want(i), Mp - 2);
        }
        return std::pair{ok, std::string("20 round trips")};
    });

    // ---- 4: quotient graph --------------------------------------------------
    crit(4, "quotient graph: determinism, masses, gluing relations", [&] {
        bool ok = true;
        ArithGroup G2(C.p, C.nminus, C.nplus);
        QuotientGraph Q2 = build_quotient(G2);
        ok = ok && Q2.serialize() == Q.serialize();
        check_masses(G, Q); // the stabilizer-sum identity; throws on failure
        auto ntf = [](const FreeQuotient& f) {
            int c = 0;
            for (const auto& e : f.edges)
                if (!e.in_tree) c++;
            return c;
        };
        // developing from another base vertex preserves all invariants
        FreeQuotient F2 = build_free_quotient(G2, neighbors(TreeVertex::standard())[0]);
        ok = ok && F2.index == F.index && F2.verts.size() == F.verts.size() &&
             ntf(F2) == ntf(F);
        // gluing relations: glue moves the representative end onto its class
        for (const auto& fe : F.edges) {
            if (fe.in_tree)
                ok = ok && fe.glue == Quat::one();
            else
                ok = ok && act_vertex(G.mat(fe.glue), fe.rep.t) == F.verts[(size_t)fe.to];
        }
        ok = ok && (int)F.verts.size() - (int)F.edges.size() == 1 - ntf(F);
        std::ostringstream d;
        d << Q.verts.size() << " vertex classes, " << Q.edges.size() << " edge classes, rank "
          << ntf(F) << ", index " << F.index;
        return std::pair{ok, d.str()};
    });

    // ---- 5: cohomology dimensions -------------------------------------------
    crit(5, "cohomology dimension comparisons", [&] {
        bool ok = true;
        H1Space h1 = group_h1(G, Q, nn, mm);
        ok = ok && har.size() == h1.basis.size();
        ok = ok && 2 * (int)har.size() == (int)drham().frob.rows();
        // trivial-coefficient oracle: the cycle rank of the quotient graph,
        // not counting edge classes reversed by the group
        auto har0 = harmonic_space(G, Q, 0, 0);
        int flips = 0;
        for (const auto& e : Q.edges)
            if (e.flip) flips++;
        int b1 = (int)Q.edges.size() - flips - (int)Q.verts.size() + 1;
        ok = ok && (int)har0.size() == b1;
        std::ostringstream d;
        d << "dim " << har.size() << " = " << h1.basis.size() << " = half of "
          << drham().frob.rows() << "; trivial-weight dim " << har0.size() << " = cycle rank "
          << b1;
        return std::pair{ok, d.str()};
    });

    // ---- 6: filtered module and residue pairing ------------------------------
    crit(6, "filtered-module and residue-pairing identities", [&] {
        const DeRhamSpace& D = drham();
        int h = D.h, c = D.cert;
        bool ok = c >= 1;
        ok = ok && mat_small(MatQ(D.mono * D.mono), Mp);
        ok = ok && rank(D.mono) == h;
        MatQ blk = MatQ::Zero(2 * h, h);
        blk.topRows(h) = MatQ::Identity(h, h);
        ok = ok && mat_small(MatQ(D.mono * blk), Mp); // kernel block
        MatQ join(2 * h, 2 * h);
        join << D.filmid, blk;
        ok = ok && rank(join) == 2 * h;               // complement
        ok = ok && rank(MatQ(D.mono * D.filmid)) == h; // injectivity on the step
        PhiNModule V = phin_view(D);
        V.validate();
        auto sd = slope_decompose(V);
        ok = ok && sd.size() == 2 && sd[0].slope == make_frac(mm, 1) &&
             sd[1].slope == make_frac(mm + 1, 1);

        MatQ Gm = cup_gram(D);
        ok = ok && mat_small(MatQ(Gm + Gm.transpose()), Mp - 2); // antisymmetry
        ok = ok && !det(Gm).eq(Qp(0), c);                        // nondegeneracy
        VecQ e1 = VecQ::Zero(2 * h), e1b = VecQ::Zero(2 * h);
        e1(0) = Qp(1);
        e1b(0) = Qp(3);
        ok = ok && cup_product(D, e1, e1b).eq(Qp(0), Mp - 2); // kernel isotropy
        VecQ f1 = D.filmid.col(0);
        ok = ok && cup_product(D, f1, f1).eq(Qp(0), c - 2); // step isotropy
        VecQ x(2 * h), y(2 * h);
        for (int i = 0; i < 2 * h; i++) {
            x(i) = rnd_small();
            y(i) = rnd_small();
        }
        Qp s = cup_product(D, VecQ(D.mono * x), y) + cup_product(D, x, VecQ(D.mono * y));
        ok = ok && s.eq(Qp(0), c - 2); // monodromy antisymmetry
        MatQ lhs = D.frob.transpose() * Gm * D.frob;
        MatQ rhs = Qp::pow_p(2 * mm + 1) * frobenius_entries(Gm);
        ok = ok && mat_small(MatQ(lhs - rhs), c - 2); // Frobenius twist
        return std::pair{ok, "certified to " + digits(c)};
    });

    // ---- 7: the two L-invariant extractions ----------------------------------
    crit(7, "the two L-invariant extractions agree and commute", [&] {
        const DeRhamSpace& D = drham();
        int h = D.h, c = D.cert;
        MatQ LT = l_invariant_from_primitive(D);
        MatQ LF = l_invariant_from_filtration(D);
        int agree = INT32_MAX;
        for (int i = 0; i < h; i++)
            for (int j = 0; j < h; j++) agree = std::min(agree, val_diff(LT(i, j), LF(i, j)));
        bool ok = agree >= Mp - 3;
        MatQ upb = D.up.topLeftCorner(h, h);
        MatQ wb = D.winv.topLeftCorner(h, h);
        ok = ok && mat_small(MatQ(LT * upb - upb * LT), c - 2);
        ok = ok && mat_small(MatQ(LT * wb - wb * LT), c - 2);
        ok = ok && mat_small(MatQ(LT - frobenius_entries(LT)), c - 2); // prime field
        return std::pair{ok, "extractions agree to " + digits(agree)};
    });

    // ---- 8: integration convergence -------------------------------------------
    crit(8, "integration convergence and exact polynomial masses", [&] {
        const EdgeCochain& f = har.at(0);
        HeegnerDatum& Hd = datum();
        Qp v3 = lp_partial_derivative(G, Q, f, Hd, Qp(0), 3).value;
        Qp v4 = lp_partial_derivative(G, Q, f, Hd, Qp(0), 4).value;
        Qp v5 = lp_partial_derivative(G, Q, f, Hd, Qp(0), 5).value;
        int a34 = val_diff(v4, v3), a45 = val_diff(v5, v4);
        bool ok = a34 == INT32_MAX ? a45 == INT32_MAX : a45 >= a34 + 1;
        // polynomial kernels are exact at the first level, with zero total mass
        LogKernel pk{VecQ::Zero(nn + 1), Qp(0), Qp(0), VecQ::Zero(nn + 1)};
        for (int i = 0; i <= nn; i++) pk.H(i) = rnd_small();
        IntegrationReport r = integrate(G, Q, f, pk, 1);
        ok = ok && r.cert_val == INT32_MAX && r.value.eq(Qp(0), Mp);
        std::ostringstream d;
        d << "agreement " << digits(a34) << " at depth 4, " << digits(a45) << " at depth 5";
        return std::pair{ok, d.str()};
    });

    // ---- 9: the primitive's group cocycle --------------------------------------
    crit(9, "primitive cocycle relation and base-point class", [&] {
        const EdgeCochain& f = har.at(0);
        std::vector<Quat> gens;
        for (const auto& fe : F.edges)
            if (!fe.in_tree) gens.push_back(fe.glue);
        if (gens.size() < 2) return std::pair{false, std::string("fewer than two generators")};
        Qp zeta = Qp::gen();
        int dc = std::min(C.depth, 4);
        VecQ probeP = VecQ::Zero(nn + 1);
        probeP(nn) = Qp(1);
        int cert = INT32_MAX;
        for (const Quat& g : gens) {
            Qp gz = act_point(G.mat(g), zeta);
            cert = std::min(cert, coleman_integral(G, Q, f, zeta, gz, probeP, dc).cert_val);
        }
        cert -= 2; // slack for the change of basis and the group action
        bool ok = cert >= 1;
        std::map<Quat, VecQ> memo;
        auto coc = [&](const Quat& g, const Qp& z) {
            if (!z.same_bits(zeta)) return coleman_cocycle(G, Q, f, g, z, dc);
            auto it = memo.find(g);
            if (it == memo.end())
                it = memo.emplace(g, coleman_cocycle(G, Q, f, g, zeta, dc)).first;
            return it->second;
        };
        for (int t = 0; t < 10 && ok; t++) {
            const Quat& gi = gens[rng() % gens.size()];
            const Quat& gj = gens[rng() % gens.size()];
            VecQ lhs = coc(G.mul(gi, gj), zeta);
            VecQ rhs = VecQ(weight_action(G.mat(gi), nn, mm) * coc(gj, zeta)) + coc(gi, zeta);
            for (int i = 0; i <= nn; i++) {
                Qp gp = lhs(i) - rhs(i);
                ok = ok && (gp.is_zero() || gp.v >= cert);
            }
        }
        // moving the base point shifts the cocycle by one fixed coboundary
        Qp zeta2 = Qp(1) + Qp(C.p) * Qp::gen();
        MatQ I = MatQ::Identity(nn + 1, nn + 1);
        std::vector<VecQ> shift;
        for (const Quat& g : gens) shift.push_back(VecQ(coc(g, zeta2) - coc(g, zeta)));
        MatQ A(2 * (nn + 1), nn + 1), rhsm(2 * (nn + 1), 1);
        A.topRows(nn + 1) = I - weight_action(G.mat(gens[0]), nn, mm);
        A.bottomRows(nn + 1) = I - weight_action(G.mat(gens[1]), nn, mm);
        rhsm.col(0).segment(0, nn + 1) = shift[0];
        rhsm.col(0).segment(nn + 1, nn + 1) = shift[1];
        VecQ xi = solve(A, rhsm).col(0);
        for (size_t gidx = 2; gidx < gens.size() && ok; gidx++) {
            VecQ want = (I - weight_action(G.mat(gens[gidx]), nn, mm)) * xi;
            for (int i = 0; i <= nn; i++) {
                Qp gp = shift[gidx](i) - want(i);
                ok = ok && (gp.is_zero() || gp.v >= cert - 2);
            }
        }
        return std::pair{ok, "10 pairs at certified bound " + digits(cert)};
    });

    // ---- 10: the main check ------------------------------------------------------
    crit(10, "central derivative along three routes, central vanishing", [&] {
        MainCheckReport mc = main_theorem_check(G, Q, F, drham(), 0, datum(), Qp(0), C.depth);
        int bound = std::min(mc.cert_lp, mc.cert_direct);
        bool ok = bound >= 4;
        ok = ok && mc.agree_lp_direct >= bound && mc.agree_lp_aj >= bound &&
             mc.agree_direct_aj >= bound;
        IntegrationReport cen =
            lp_partial(G, Q, har.at(0), datum(), Qp(0), Qp(mm + 1), C.depth);
        ok = ok && (cen.value.is_zero() || cen.value.v >= bound);
        std::ostringstream d;
        d << "certified " << digits(bound) << "; agreements " << digits(mc.agree_lp_direct)
          << ", " << digits(mc.agree_lp_aj) << ", " << digits(mc.agree_direct_aj);
        return std::pair{ok, d.str()};
    });

    // ---- 11: symmetries ------------------------------------------------------------
    crit(11, "involution equivariance and representative independence", [&] {
        const EdgeCochain& f = har.at(0);
        const DeRhamSpace& D = drham();
        HeegnerDatum& Hd = datum();
        // the level involution at p, read off the shift operator
        Qp eigen_w = Qp(0) - D.up.topLeftCorner(D.h, D.h)(0, 0) / Qp::pow_p(mm);
        IntegrationReport d0 = lp_partial_derivative(G, Q, f, Hd, Qp(0), 3);
        IntegrationReport db = lp_partial_derivative(G, Q, f, Hd, Qp(3), 3);
        int cert = std::min(d0.cert_val, db.cert_val) - 2;
        bool ok = cert >= 1;
        Qp gb = d0.value - db.value; // base-point independence
        ok = ok && (gb.is_zero() || gb.v >= cert);

        auto conj_datum = [&](const Quat& g) {
            QRat ng = G.B.nrd(g);
            Quat q = G.B.mul(G.B.mul(g, Hd.psi), G.B.conj(g));
            HeegnerDatum Hx = heegner_datum(
                G, Quat(q.n[0] * ng.den, q.n[1] * ng.den, q.n[2] * ng.den, q.n[3] * ng.den,
                        q.d * ng.num));
            Qp zw = act_point(G.mat(g), Hd.z0);
            if (!Hx.z0.eq(zw, Mp - 3)) std::swap(Hx.z0, Hx.z0bar);
            if (!Hx.z0.eq(zw, Mp - 3))
                throw InvariantError("conjugated fixed points do not transport");
            return Hx;
        };
        // equivariance under the norm-p partner, with the computed eigenvalue
        HeegnerDatum H2 = conj_datum(Hd.wp);
        Qp star2 = act_point(G.mat(Hd.wp), Qp(1));
        IntegrationReport dw = lp_partial_derivative(G, Q, f, H2, star2, 3);
        Qp gw = dw.value - eigen_w * d0.value;
        ok = ok && (gw.is_zero() || gw.v >= std::min(cert, dw.cert_val - 2));
        // independence of the embedding representative within the group
        Quat gamma;
        for (const auto& fe : F.edges)
            if (!fe.in_tree) {
                gamma = fe.glue;
                break;
            }
        HeegnerDatum H3 = conj_datum(gamma);
        IntegrationReport dr = lp_partial_derivative(G, Q, f, H3, Qp(0), 3);
        Qp gr = dr.value - d0.value;
        ok = ok && (gr.is_zero() || gr.v >= std::min(cert, dr.cert_val - 2));
        std::ostringstream d;
        d << "level-involution eigenvalue " << eigen_w.serialize().substr(0, 12) << "...; "
          << "gaps " << digits(gb.is_zero() ? INT32_MAX : (int)gb.v) << ", "
          << digits(gw.is_zero() ? INT32_MAX : (int)gw.v) << ", "
          << digits(gr.is_zero() ? INT32_MAX : (int)gr.v);
        return std::pair{ok, d.str()};
    });

    return out;
}

} // namespace mf

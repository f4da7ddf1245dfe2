// Pipeline driver: validates the configured instance, runs one stage of the
// computation, and writes a deterministic JSON artifact.  Exit codes: 0 on
// success, 2 for a violated running hypothesis, 3 for insufficient precision,
// 4 for a broken internal invariant, 1 for plain usage errors.

#include <CLI11.hpp>
#include <json.hpp>

#include <mumford/checks.hpp>

#include <climits>
#include <cstdio>
#include <fstream>
#include <iostream>

using namespace mf;
using nlohmann::json;
using ordered = nlohmann::ordered_json;

namespace {

void write_artifact(const ordered& j, const std::string& path) {
    std::string s = j.dump(2);
    s += "\n";
    if (path.empty()) {
        std::cout << s;
    } else {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw HypothesisError("cannot write artifact " + path);
        out << s;
    }
}

ordered json_val(int v) {
    if (v == INT32_MAX) return ordered("inf");
    return ordered(v);
}

// shared setup: the finite field at the working precision and the branch
struct Stage {
    ScopedField sf;
    ArithGroup G;
    explicit Stage(const InstanceConfig& C)
        : sf(C.p, 2, C.precision), G(C.p, C.nminus, C.nplus) {
        if (C.branch != 0) ctx_mut().set_branch(Qp(C.branch));
    }
};

HeegnerDatum find_datum(ArithGroup& G, const InstanceConfig& C) {
    for (const Quat& cand : enumerate_pure_norm(G.B, -C.dk)) {
        try {
            return heegner_datum(G, cand);
        } catch (const HypothesisError&) {
        }
    }
    throw HypothesisError("no embedding of the field into the order was found");
}

int cmd_graph(const InstanceConfig& C) {
    Stage st(C);
    bool hit = false;
    QuotientGraph Q = cached_quotient_graph(st.G, C, &hit);
    if (!C.cache_dir.empty())
        std::cerr << (hit ? "quotient graph loaded from cache\n"
                          : "quotient graph built and cached\n");
    ordered j;
    j["p"] = C.p;
    j["nminus"] = C.nminus;
    j["nplus"] = C.nplus;
    j["precision"] = C.precision;
    j["vertices"] = Q.verts.size();
    ordered vs = ordered::array();
    for (const auto& s : Q.vstabs) vs.push_back(s.size());
    j["vertex_stabilizer_orders"] = vs;
    ordered es = ordered::array();
    for (const auto& e : Q.edges) {
        ordered je;
        je["from"] = e.from;
        je["to"] = e.to;
        je["stab_order"] = e.estab.size();
        je["flip"] = e.flip.has_value();
        es.push_back(je);
    }
    j["edges"] = es;
    write_artifact(j, C.json_path);
    return 0;
}

int cmd_basis(const InstanceConfig& C) {
    Stage st(C);
    QuotientGraph Q = cached_quotient_graph(st.G, C, nullptr);
    auto har = harmonic_space(st.G, Q, C.n(), C.m());
    ordered j;
    j["p"] = C.p;
    j["weight"] = C.k;
    j["dimension"] = har.size();
    auto put_matrix = [](const MatQ& A) {
        ordered rows = ordered::array();
        for (int i = 0; i < A.rows(); i++) {
            ordered row = ordered::array();
            for (int c = 0; c < A.cols(); c++) row.push_back(A(i, c).serialize());
            rows.push_back(row);
        }
        return rows;
    };
    if (!har.empty()) {
        j["shift_operator"] = put_matrix(hecke_up(st.G, Q, har));
        ordered w;
        long nm = C.nminus;
        for (long q = 2; q <= nm; q++)
            if (nm % q == 0) {
                w[std::to_string(q)] = put_matrix(atkin_lehner_w(st.G, Q, har, q));
                while (nm % q == 0) nm /= q;
            }
        j["involutions"] = w;
    }
    write_artifact(j, C.json_path);
    return 0;
}

int cmd_linv(const InstanceConfig& C) {
    Stage st(C);
    QuotientGraph Q = cached_quotient_graph(st.G, C, nullptr);
    FreeQuotient F = build_free_quotient(st.G);
    DeRhamSpace D = build_drham(st.G, Q, F, C.n(), C.m(), C.depth);
    MatQ LT = l_invariant_from_primitive(D);
    MatQ LF = l_invariant_from_filtration(D);
    int agree = INT32_MAX;
    for (int i = 0; i < LT.rows(); i++)
        for (int c = 0; c < LT.cols(); c++) {
            Qp d = LT(i, c) - LF(i, c);
            if (!d.is_zero()) agree = std::min(agree, (int)d.v);
        }
    ordered j;
    j["dimension"] = D.h;
    j["from_primitive"] = ordered::array();
    j["from_filtration"] = ordered::array();
    for (int i = 0; i < LT.rows(); i++)
        for (int c = 0; c < LT.cols(); c++) {
            j["from_primitive"].push_back(LT(i, c).serialize());
            j["from_filtration"].push_back(LF(i, c).serialize());
        }
    j["difference_valuation"] = json_val(agree);
    j["certified_digits"] = D.cert;
    j["depth"] = C.depth;
    write_artifact(j, C.json_path);
    return 0;
}

int cmd_lp(const InstanceConfig& C) {
    Stage st(C);
    QuotientGraph Q = cached_quotient_graph(st.G, C, nullptr);
    auto har = harmonic_space(st.G, Q, C.n(), C.m());
    if (har.empty()) throw HypothesisError("the space of harmonic cochains is zero");
    HeegnerDatum H = find_datum(st.G, C);
    IntegrationReport central =
        lp_partial(st.G, Q, har[0], H, Qp(0), Qp(C.m() + 1), C.depth);
    IntegrationReport deriv = lp_partial_derivative(st.G, Q, har[0], H, Qp(0), C.depth);
    ordered j;
    j["discriminant"] = C.dk;
    j["central_value"] = ordered::parse(central.serialize_json());
    j["derivative"] = ordered::parse(deriv.serialize_json());
    write_artifact(j, C.json_path);
    return 0;
}

int cmd_aj(const InstanceConfig& C) {
    Stage st(C);
    QuotientGraph Q = cached_quotient_graph(st.G, C, nullptr);
    FreeQuotient F = build_free_quotient(st.G);
    DeRhamSpace D = build_drham(st.G, Q, F, C.n(), C.m(), C.depth);
    HeegnerDatum H = find_datum(st.G, C);
    MainCheckReport mc = main_theorem_check(st.G, Q, F, D, 0, H, Qp(0), C.depth);
    ordered j;
    j["direct_integral"] = mc.direct.serialize();
    j["extension_class"] = mc.aj.serialize();
    j["derivative"] = mc.lp.serialize();
    j["agreement"] = json_val(std::min(mc.agree_direct_aj,
                                       std::min(mc.agree_lp_aj, mc.agree_lp_direct)));
    j["certified_digits"] = json_val(std::min(mc.cert_lp, mc.cert_direct));
    j["depth"] = C.depth;
    write_artifact(j, C.json_path);
    return 0;
}

int cmd_check_all(const InstanceConfig& C) {
    ordered arr = ordered::array();
    auto emit = [&](const CriterionResult& r) {
        std::printf("criterion %2d  %-58s %s\n", r.id, r.name.c_str(),
                    r.pass ? "PASS" : "FAIL");
        if (!r.detail.empty()) std::printf("              %s\n", r.detail.c_str());
        std::fflush(stdout);
        ordered j;
        j["id"] = r.id;
        j["name"] = r.name;
        j["pass"] = r.pass;
        j["detail"] = r.detail;
        arr.push_back(j);
    };
    auto results = run_acceptance(C, emit);
    if (!C.json_path.empty()) write_artifact(arr, C.json_path);
    int failed = 0;
    for (const auto& r : results)
        if (!r.pass) failed++;
    if (failed) {
        std::cerr << failed << " criteria failed\n";
        return 4;
    }
    std::printf("all %zu criteria passed\n", results.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rigid-analytic modular pipeline"};
    app.require_subcommand(1);

    std::string config_path, json_path, cache_dir;
    int depth = -1, precision = -1;
    long branch = 0;
    unsigned long long seed = 0;
    bool have_branch = false, have_seed = false;
    app.add_option("--config", config_path, "instance config file (key = value lines)");
    app.add_option("--depth", depth, "covering depth for integration");
    app.add_option("--precision", precision, "working precision in digits");
    auto* ob = app.add_option("--branch", branch, "branch value of log at the prime");
    app.add_option("--json", json_path, "write the JSON artifact to this file");
    app.add_option("--cache", cache_dir, "quotient-graph cache directory");
    auto* os = app.add_option("--seed", seed, "seed for randomized checks");

    auto* c_graph = app.add_subcommand("graph", "build the quotient graph");
    auto* c_basis = app.add_subcommand("basis", "harmonic basis and operator matrices");
    auto* c_linv = app.add_subcommand("linv", "the two L-invariant extractions");
    auto* c_lp = app.add_subcommand("lp", "central value and derivative of the L-function");
    auto* c_aj = app.add_subcommand("aj", "three-route comparison of the central derivative");
    auto* c_check = app.add_subcommand("check-all", "run the full acceptance suite");
    for (auto* s : {c_graph, c_basis, c_linv, c_lp, c_aj, c_check}) s->fallthrough();

    CLI11_PARSE(app, argc, argv);
    have_branch = ob->count() > 0;
    have_seed = os->count() > 0;

    try {
        InstanceConfig C;
        if (!config_path.empty()) C = load_config(config_path);
        if (depth >= 0) C.depth = depth;
        if (precision >= 0) C.precision = precision;
        if (have_branch) C.branch = branch;
        if (have_seed) C.seed = seed;
        if (!json_path.empty()) C.json_path = json_path;
        if (!cache_dir.empty()) C.cache_dir = cache_dir;
        C.validate();
        if (c_graph->parsed()) return cmd_graph(C);
        if (c_basis->parsed()) return cmd_basis(C);
        if (c_linv->parsed()) return cmd_linv(C);
        if (c_lp->parsed()) return cmd_lp(C);
        if (c_aj->parsed()) return cmd_aj(C);
        if (c_check->parsed()) return cmd_check_all(C);
    } catch (const HypothesisError& e) {
        std::cerr << "hypothesis violation: " << e.what() << "\n";
        return 2;
    } catch (const PrecisionError& e) {
        std::cerr << "precision loss: " << e.what() << "\n";
        return 3;
    } catch (const InvariantError& e) {
        std::cerr << "invariant failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

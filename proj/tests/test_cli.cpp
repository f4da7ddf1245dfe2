#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mumford/config.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace mf;
namespace fs = std::filesystem;

#ifndef MUMFORD_BIN
#define MUMFORD_BIN "./mumford"
#endif

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(MUMFORD_BIN) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() / "mumford_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
};

void write_config(const fs::path& p, int k = 4) {
    std::ofstream out(p);
    out << "# reference instance\n"
        << "p = 5\nnminus = 2\nnplus = 1\nk = " << k << "\ndk = -43\n"
        << "precision = 12\ndepth = 3\n";
}

} // namespace

TEST_CASE("configuration: defaults, parsing, and named hypothesis checks") {
    InstanceConfig C;
    C.validate(); // the reference instance satisfies every hypothesis
    CHECK(C.n() == 2);
    CHECK(C.m() == 1);

    auto expect_violation = [](InstanceConfig bad, const std::string& needle) {
        try {
            bad.validate();
            FAIL_CHECK("expected a hypothesis violation mentioning " << needle);
        } catch (const HypothesisError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    InstanceConfig c1;
    c1.k = 5;
    expect_violation(c1, "even");
    InstanceConfig c2;
    c2.nminus = 4;
    expect_violation(c2, "squarefree");
    InstanceConfig c3;
    c3.nminus = 6;
    expect_violation(c3, "odd number");
    InstanceConfig c4;
    c4.dk = -11; // -11 is a square mod 5: the prime splits
    expect_violation(c4, "inert");
    InstanceConfig c5;
    c5.dk = -3;
    expect_violation(c5, "-4");
    InstanceConfig c6;
    c6.nplus = 5;
    expect_violation(c6, "divide");
    InstanceConfig c7;
    c7.depth = 0;
    expect_violation(c7, "depth");

    TempDir td;
    write_config(td.dir / "cfg", 4);
    InstanceConfig L = load_config((td.dir / "cfg").string());
    CHECK(L.p == 5);
    CHECK(L.k == 4);
    CHECK(L.dk == -43);
    CHECK(L.depth == 3);
    CHECK_THROWS_AS(load_config((td.dir / "missing").string()), HypothesisError);
}

TEST_CASE("exit-code mapping for the three failure families") {
    CHECK(cli_exit_code(HypothesisError("x")) == 2);
    CHECK(cli_exit_code(PrecisionError("x")) == 3);
    CHECK(cli_exit_code(InvariantError("x")) == 4);
}

TEST_CASE("end-to-end subcommands, exit codes, and cache byte-identity") {
    TempDir td;
    fs::path cfg = td.dir / "cfg";
    write_config(cfg);
    std::string base = "--config " + cfg.string();
    fs::path cache = td.dir / "cache";

    // graph twice: both succeed, artifacts byte-identical, cache file reused
    std::string g1 = (td.dir / "g1.json").string();
    std::string g2 = (td.dir / "g2.json").string();
    REQUIRE(run_cli("graph " + base + " --cache " + cache.string() + " --json " + g1) == 0);
    REQUIRE(fs::exists(cache));
    auto cache_files = std::distance(fs::directory_iterator(cache), fs::directory_iterator{});
    CHECK(cache_files == 1);
    std::string cached = slurp(*fs::directory_iterator(cache));
    REQUIRE(run_cli("graph " + base + " --cache " + cache.string() + " --json " + g2) == 0);
    CHECK(slurp(g1) == slurp(g2));
    CHECK(slurp(*fs::directory_iterator(cache)) == cached);
    CHECK(slurp(g1).find("\"vertices\"") != std::string::npos);

    std::string b = (td.dir / "b.json").string();
    REQUIRE(run_cli("basis " + base + " --json " + b) == 0);
    CHECK(slurp(b).find("\"dimension\"") != std::string::npos);

    std::string l = (td.dir / "l.json").string();
    REQUIRE(run_cli("linv " + base + " --json " + l) == 0);
    CHECK(slurp(l).find("\"difference_valuation\"") != std::string::npos);

    std::string lp = (td.dir / "lp.json").string();
    REQUIRE(run_cli("lp " + base + " --json " + lp) == 0);
    CHECK(slurp(lp).find("\"derivative\"") != std::string::npos);
    CHECK(slurp(lp).find("\"central_value\"") != std::string::npos);

    std::string aj = (td.dir / "aj.json").string();
    REQUIRE(run_cli("aj " + base + " --json " + aj) == 0);
    CHECK(slurp(aj).find("\"agreement\"") != std::string::npos);

    // hypothesis violations exit with code 2
    fs::path bad = td.dir / "bad";
    write_config(bad, 5);
    CHECK(run_cli("graph --config " + bad.string()) == 2);
    CHECK(run_cli("linv " + base + " --depth 0") == 2);

    // unknown subcommand / bad flags are plain CLI errors
    CHECK(run_cli("frobnicate") != 0);
}

#include <mumford/config.hpp>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

namespace mf {

namespace {

bool is_prime(long q) {
    if (q < 2) return false;
    for (long d = 2; d * d <= q; d++)
        if (q % d == 0) return false;
    return true;
}

std::vector<long> prime_divisors(long x) {
    std::vector<long> out;
    for (long d = 2; d * d <= x; d++)
        if (x % d == 0) {
            out.push_back(d);
            while (x % d == 0) x /= d;
        }
    if (x > 1) out.push_back(x);
    return out;
}

bool squarefree(long x) {
    for (long d = 2; d * d <= x; d++)
        if (x % (d * d) == 0) return false;
    return true;
}

// is a a square modulo the odd prime q (Euler's criterion)
bool square_mod(long a, long q) {
    a %= q;
    if (a < 0) a += q;
    long r = 1, b = a, e = (q - 1) / 2;
    while (e) {
        if (e & 1) r = r * b % q;
        b = b * b % q;
        e >>= 1;
    }
    return r == 1;
}

bool inert_at(long dk, long q) {
    if (q == 2) return ((dk % 8) + 8) % 8 == 5;
    if (dk % q == 0) return false; // ramified
    return !square_mod(dk, q);
}

} // namespace

void InstanceConfig::validate() const {
    auto fail = [](const std::string& s) { throw HypothesisError(s); };
    if (!is_prime(p) || p < 3) fail("p must be an odd prime");
    if (nminus < 2) fail("N- must have at least one prime divisor");
    if (!squarefree(nminus)) fail("N- must be squarefree");
    if (prime_divisors(nminus).size() % 2 == 0)
        fail("N- must have an odd number of prime divisors");
    if (nplus < 1) fail("N+ must be positive");
    if (std::gcd(nminus, nplus) != 1) fail("N- and N+ must be coprime");
    if (nminus % p == 0 || nplus % p == 0) fail("p must not divide the level N- * N+");
    if (k < 4 || k % 2 != 0) fail("the weight k must be even and at least 4");
    if (dk >= -4) fail("the field discriminant must lie below -4");
    long r4 = ((dk % 4) + 4) % 4;
    if (r4 != 0 && r4 != 1) fail("dk must be a discriminant (0 or 1 mod 4)");
    std::vector<long> qs = prime_divisors(nminus);
    qs.push_back(p);
    for (long q : qs)
        if (!inert_at(dk, q))
            fail("the prime " + std::to_string(q) + " must be inert in the quadratic field");
    if (precision < 4) fail("precision must be at least 4 digits");
    if (depth < 1) fail("depth must be at least 1");
}

InstanceConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw HypothesisError("cannot read config file " + path);
    InstanceConfig C;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw HypothesisError("config line " + std::to_string(lineno) +
                                      " is not key = value");
            continue;
        }
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t\r");
            auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "p")
                C.p = std::stol(val);
            else if (key == "nminus")
                C.nminus = std::stol(val);
            else if (key == "nplus")
                C.nplus = std::stol(val);
            else if (key == "k")
                C.k = std::stoi(val);
            else if (key == "dk")
                C.dk = std::stol(val);
            else if (key == "precision")
                C.precision = std::stoi(val);
            else if (key == "depth")
                C.depth = std::stoi(val);
            else if (key == "branch")
                C.branch = std::stol(val);
            else if (key == "seed")
                C.seed = (uint64_t)std::stoull(val);
            else if (key == "cache")
                C.cache_dir = val;
            else if (key == "output")
                C.json_path = val;
            else
                throw HypothesisError("unknown config key " + key);
        } catch (const std::invalid_argument&) {
            throw HypothesisError("config value for " + key + " is not a number");
        } catch (const std::out_of_range&) {
            throw HypothesisError("config value for " + key + " is out of range");
        }
    }
    return C;
}

int cli_exit_code(const std::exception& e) {
    if (dynamic_cast<const HypothesisError*>(&e)) return 2;
    if (dynamic_cast<const PrecisionError*>(&e)) return 3;
    if (dynamic_cast<const InvariantError*>(&e)) return 4;
    return 1;
}

QuotientGraph cached_quotient_graph(ArithGroup& G, const InstanceConfig& C, bool* cache_hit) {
    if (cache_hit) *cache_hit = false;
    if (C.cache_dir.empty()) return build_quotient(G);
    namespace fs = std::filesystem;
    fs::path dir(C.cache_dir);
    fs::create_directories(dir);
    std::ostringstream name;
    name << "graph_p" << C.p << "_nm" << C.nminus << "_np" << C.nplus << "_M" << C.precision
         << ".qg";
    fs::path file = dir / name.str();
    if (fs::exists(file)) {
        std::ifstream in(file, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        QuotientGraph Q = QuotientGraph::parse(ss.str());
        if (Q.serialize() != ss.str())
            throw InvariantError("quotient-graph cache file is not canonical: " + file.string());
        if (cache_hit) *cache_hit = true;
        return Q;
    }
    QuotientGraph Q = build_quotient(G);
    std::ofstream out(file, std::ios::binary);
    out << Q.serialize();
    return Q;
}

} // namespace mf

#pragma once

// Instance configuration for the pipeline driver: the prime, the level pair,
// the weight, the imaginary quadratic discriminant, precision and depth,
// with every running hypothesis validated up front by name, plus the
// plain-text config format and the deterministic quotient-graph cache.

#include <mumford/arith.hpp>

#include <cstdint>
#include <exception>
#include <string>

namespace mf {

struct InstanceConfig {
    long p = 5;
    long nminus = 2; // squarefree, odd number of prime divisors
    long nplus = 1;  // coprime to p * nminus
    int k = 4;       // even weight >= 4
    long dk = -43;   // imaginary quadratic discriminant, inert at p and N-
    int precision = 12;
    int depth = 5;
    long branch = 0; // chosen value of log(p); 0 selects the standard branch
    std::string cache_dir; // empty disables the cache
    std::string json_path; // empty prints the artifact to standard output
    uint64_t seed = 1;     // test shuffling only

    int n() const { return k - 2; }
    int m() const { return (k - 2) / 2; }

    // throws HypothesisError naming the violated condition
    void validate() const;
};

// plain-text key=value file; '#' starts a comment; unknown keys are errors
InstanceConfig load_config(const std::string& path);

// exit-code contract of the driver: 2 hypothesis, 3 precision, 4 invariant
int cli_exit_code(const std::exception& e);

// build or load the quotient graph; the cache file is keyed by
// (p, N-, N+, precision) and its bytes are the canonical serialization
QuotientGraph cached_quotient_graph(ArithGroup& G, const InstanceConfig& C, bool* cache_hit);

} // namespace mf

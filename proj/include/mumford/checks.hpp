#pragma once

// The property-based acceptance gate: eleven structural criteria exercised
// on a configured instance, from the semilinear module algebra up to the
// three-route agreement of the central L-derivative, each reported as a
// named pass/fail with a diagnostic detail string.

#include <mumford/config.hpp>
#include <mumford/heegner.hpp>

#include <functional>
#include <string>
#include <vector>

namespace mf {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail; // margins on pass, the failed identity on fail
};

// run all criteria in order; emit (when given) is called after each one so
// progress can be streamed; exceptions inside a criterion fail it by name
std::vector<CriterionResult>
run_acceptance(const InstanceConfig& C,
               const std::function<void(const CriterionResult&)>& emit = {});

} // namespace mf

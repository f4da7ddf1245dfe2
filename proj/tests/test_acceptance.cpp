#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mumford/checks.hpp>

#include <cstdio>

using namespace mf;

TEST_CASE("acceptance gate on the reference instance") {
    InstanceConfig C; // reference defaults: p=5, N-=2, N+=1, k=4, dk=-43,
                      // 12 digits, depth 5
    std::vector<CriterionResult> results =
        run_acceptance(C, [](const CriterionResult& r) {
            std::printf("criterion %2d  %-58s %s\n", r.id, r.name.c_str(),
                        r.pass ? "PASS" : "FAIL");
            if (!r.detail.empty()) std::printf("              %s\n", r.detail.c_str());
            std::fflush(stdout);
        });
    REQUIRE(results.size() == 11);
    for (const CriterionResult& r : results) {
        INFO(r.id << " " << r.name << ": " << r.detail);
        CHECK(r.pass);
    }
}

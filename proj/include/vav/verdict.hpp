#pragma once

#include "vav/environment.hpp"

#include <string>
#include <vector>

namespace vav {

struct QueryFailure {
    std::string query;
    std::string observed;
    std::string expected;
};

struct Verdict {
    bool passed = true;
    std::vector<QueryFailure> failures;
    int queries_used = 0;

    void fail(std::string query, std::string observed, std::string expected) {
        passed = false;
        failures.push_back({std::move(query), std::move(observed), std::move(expected)});
    }
};

inline json verdict_to_json(const Verdict& v) {
    json failures = json::array();
    for (const auto& f : v.failures)
        failures.push_back(json{{"query", f.query}, {"observed", f.observed}, {"expected", f.expected}});
    return json{{"passed", v.passed}, {"failures", failures}, {"queries_used", v.queries_used}};
}

} // namespace vav

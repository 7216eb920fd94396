#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fixtures.hpp"

namespace emdm::testing {

// One write against the royal fixture with its expected verdict. A rejected
// case names the constraint that must appear among the violations.
struct AxiomCase {
    std::string name;
    std::string constraint;
    bool accept = false;
    std::function<WriteOp(Royals&)> make;  // may add setup rows to the fixture first
    bool without_lifetime = false;         // run on the corpus minus C29 (temporal cases)
};

std::vector<AxiomCase> axiom_cases();

struct AxiomOutcome {
    bool passed = false;
    std::string detail;
};

// Builds the fixture, adjudicates the write and cross-checks the verdict
// against the syntax-tree oracle on the tentative state.
AxiomOutcome run_axiom_case(const AxiomCase& c);

}  // namespace emdm::testing

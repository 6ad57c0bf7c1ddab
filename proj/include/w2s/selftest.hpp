#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace w2s {

struct SelfTestItem {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct SelfTestReport {
    std::vector<SelfTestItem> items;
    bool all_pass = true;
};

// Property suites: simplex-pair inequalities (non-negativity, Pinsker,
// Bretagnolle-Huber, clamp soundness, WIS linearity), gradient checks
// against central finite differences, exact-calibration identities, the
// calibration gap bound sweep, normalization fixpoint and determinism.
// `quick` shrinks the sample counts for unit-test use.
SelfTestReport run_selftest(std::uint64_t seed, bool quick = false);

}  // namespace w2s

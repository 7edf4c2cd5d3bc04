#ifndef NMQ_VALIDATE_HPP
#define NMQ_VALIDATE_HPP

#include <string>
#include <vector>

#include "nmq/config.hpp"

namespace nmq {

struct ValidationCheck {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double tolerance = 0.0;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool all_pass() const;
    std::string text() const;  // one PASS/FAIL line per check
};

// Runs the invariant battery of every module: tensor algebra identities,
// propagation isometry, coherent-basis completeness, factorization
// round-trip, noise moments, trace preservation, outcome-density
// normalization, measurement non-disturbance. When a config is supplied its
// system/kernel/lattice are exercised too.
ValidationReport run_validation(const ExperimentConfig* cfg = nullptr);

}  // namespace nmq

#endif

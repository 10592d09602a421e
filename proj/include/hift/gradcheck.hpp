#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hift/config.hpp"

namespace hift {

struct GradCheckLine {
    std::string name;
    int coords_checked = 0;
    double max_err = 0.0;
    bool ok = true;
};

struct GradCheckReport {
    std::vector<GradCheckLine> lines;
    int seeds = 0;
    bool ok = true;
};

// Full-pipeline analytic gradient vs central finite differences (step 1e-5)
// on a tiny model (C = 16, 6x6 map). Relative error with a small-denominator
// floor: |a - f| / max(|a|, |f|, 1e-3) must stay within tol.
// corrupt_param, when set, perturbs that parameter's analytic gradient first
// so the failure path can be exercised.
GradCheckReport run_gradcheck(std::uint64_t base_seed, int num_seeds, int coords_per_param, double tol,
                              const std::string& corrupt_param = "");

// The tiny configuration the checker runs on (also used by acceptance tests).
RunConfig gradcheck_config();

} // namespace hift

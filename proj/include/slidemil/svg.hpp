#pragma once

#include <string>

#include "slidemil/metrics.hpp"

namespace slidemil::svg {

// Self-contained ROC plot (no plotting dependency, no timestamps): axes with
// 0.25 gridlines, the chance diagonal, the curve, and an AUC label. Output is
// byte-deterministic for equal inputs.
std::string render_roc(const metrics::RocCurve& curve, double auc,
                       const std::string& title);

}  // namespace slidemil::svg

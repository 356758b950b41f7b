#include "ctxda/types.hpp"

#include <algorithm>
#include <cmath>

namespace ctxda {

bool FeatureVector::all_finite() const noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

int Prediction::argmax() const {
  if (probs.empty()) return -1;
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double Prediction::confidence() const {
  if (probs.empty()) return 0.0;
  return *std::max_element(probs.begin(), probs.end());
}

}  // namespace ctxda

// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/audio.h"

#include <cmath>
#include <string>

#include "fbse/error.h"

namespace fbse {

void CheckFinite(const AudioBuffer& audio, const char* what) {
  for (double v : audio.samples) {
    if (!std::isfinite(v))
      throw ValueError(std::string(what) + ": non-finite sample");
  }
}

double Energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace fbse

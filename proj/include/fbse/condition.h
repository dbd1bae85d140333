// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_CONDITION_H_
#define FBSE_CONDITION_H_

#include <string>

#include "fbse/features.h"

namespace fbse {

// Lower-stream input of the highband network.
enum class Aid {
  kEstimated,  // |S16| from the wideband enhancer
  kNone,       // zeros
  kNoisy,      // |Y16|
};

std::string AidName(Aid aid);  // e16k, none, n16k
Aid ParseAid(const std::string& name);

enum class ConditionKind {
  kFft768,
  kMel48,
  kMel64,
  kMel80,
  kTsFft768E16k,
  kTsFft768,
  kTsFft768N16k,
};

// FFT768, Mel48, Mel64, Mel80, TS_FFT768_e16k, TS_FFT768, TS_FFT768_n16k.
std::string ConditionName(ConditionKind kind);
ConditionKind ParseCondition(const std::string& name);

bool IsTwoStep(ConditionKind kind);
// Feature of a one-step condition; kStft769 for two-step kinds.
Feature ConditionFeature(ConditionKind kind);
// Aid mode of a two-step condition; kEstimated for one-step kinds.
Aid ConditionAid(ConditionKind kind);

}  // namespace fbse

#endif  // FBSE_CONDITION_H_

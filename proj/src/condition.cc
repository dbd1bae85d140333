// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/condition.h"

#include "fbse/error.h"

namespace fbse {

std::string AidName(Aid aid) {
  switch (aid) {
    case Aid::kEstimated:
      return "e16k";
    case Aid::kNone:
      return "none";
    case Aid::kNoisy:
      return "n16k";
  }
  return "unknown";
}

Aid ParseAid(const std::string& name) {
  for (Aid a : {Aid::kEstimated, Aid::kNone, Aid::kNoisy})
    if (AidName(a) == name) return a;
  throw ConfigError("unknown aid mode '" + name + "' (expected e16k, none or n16k)");
}

std::string ConditionName(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::kFft768:
      return "FFT768";
    case ConditionKind::kMel48:
      return "Mel48";
    case ConditionKind::kMel64:
      return "Mel64";
    case ConditionKind::kMel80:
      return "Mel80";
    case ConditionKind::kTsFft768E16k:
      return "TS_FFT768_e16k";
    case ConditionKind::kTsFft768:
      return "TS_FFT768";
    case ConditionKind::kTsFft768N16k:
      return "TS_FFT768_n16k";
  }
  return "unknown";
}

ConditionKind ParseCondition(const std::string& name) {
  for (ConditionKind k :
       {ConditionKind::kFft768, ConditionKind::kMel48, ConditionKind::kMel64,
        ConditionKind::kMel80, ConditionKind::kTsFft768E16k,
        ConditionKind::kTsFft768, ConditionKind::kTsFft768N16k})
    if (ConditionName(k) == name) return k;
  throw ConfigError("unknown condition '" + name + "'");
}

bool IsTwoStep(ConditionKind kind) {
  return kind == ConditionKind::kTsFft768E16k ||
         kind == ConditionKind::kTsFft768 ||
         kind == ConditionKind::kTsFft768N16k;
}

Feature ConditionFeature(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::kMel48:
      return Feature::kMel48;
    case ConditionKind::kMel64:
      return Feature::kMel64;
    case ConditionKind::kMel80:
      return Feature::kMel80;
    default:
      return Feature::kStft769;
  }
}

Aid ConditionAid(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::kTsFft768:
      return Aid::kNone;
    case ConditionKind::kTsFft768N16k:
      return Aid::kNoisy;
    default:
      return Aid::kEstimated;
  }
}

}  // namespace fbse

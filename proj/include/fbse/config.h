// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBSE_CONFIG_H_
#define FBSE_CONFIG_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fbse {

// Flat "key = value" text. '#' starts a comment; "include <path>" splices
// another file in place (relative to the including file). Later assignments
// override earlier ones. Every key must be consumed by a Take* call, and
// CheckConsumed() reports the ones that were not.
class KeyValueConfig {
 public:
  static KeyValueConfig Load(const std::string& path);
  static KeyValueConfig Parse(const std::string& text,
                              const std::string& origin = "<string>");

  void Set(const std::string& key, const std::string& value);
  bool Has(const std::string& key) const;

  std::optional<std::string> TakeString(const std::string& key);
  std::string TakeString(const std::string& key, const std::string& fallback);
  double TakeDouble(const std::string& key, double fallback);
  int TakeInt(const std::string& key, int fallback);
  uint64_t TakeU64(const std::string& key, uint64_t fallback);
  // Paths resolve against the directory of the file that set them.
  std::optional<std::string> TakePath(const std::string& key);

  void CheckConsumed() const;

 private:
  struct Entry {
    std::string value;
    std::string origin;  // "file:line"
    std::string dir;
    bool consumed = false;
  };
  void ParseInto(const std::string& text, const std::string& origin,
                 const std::string& dir, int depth);
  Entry* Find(const std::string& key);

  std::map<std::string, Entry> entries_;
};

}  // namespace fbse

#endif  // FBSE_CONFIG_H_

// Copyright 2026 The fbse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fbse/config.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fbse/error.h"

namespace fbse {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

KeyValueConfig KeyValueConfig::Load(const std::string& path) {
  KeyValueConfig cfg;
  cfg.ParseInto(ReadFile(path), path,
                std::filesystem::path(path).parent_path().string(), 0);
  return cfg;
}

KeyValueConfig KeyValueConfig::Parse(const std::string& text,
                                     const std::string& origin) {
  KeyValueConfig cfg;
  cfg.ParseInto(text, origin, "", 0);
  return cfg;
}

void KeyValueConfig::ParseInto(const std::string& text,
                               const std::string& origin,
                               const std::string& dir, int depth) {
  if (depth > 8) throw ConfigError(origin + ": includes nested too deeply");
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    if (line.rfind("include ", 0) == 0) {
      std::filesystem::path p(Trim(line.substr(8)));
      if (p.is_relative() && !dir.empty()) p = std::filesystem::path(dir) / p;
      ParseInto(ReadFile(p.string()), p.string(), p.parent_path().string(),
                depth + 1);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    entries_[key] = Entry{value, where, dir, false};
  }
}

void KeyValueConfig::Set(const std::string& key, const std::string& value) {
  entries_[key] = Entry{value, "<override>", "", false};
}

bool KeyValueConfig::Has(const std::string& key) const {
  return entries_.count(key) != 0;
}

KeyValueConfig::Entry* KeyValueConfig::Find(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.consumed = true;
  return &it->second;
}

std::optional<std::string> KeyValueConfig::TakeString(const std::string& key) {
  Entry* e = Find(key);
  if (!e) return std::nullopt;
  return e->value;
}

std::string KeyValueConfig::TakeString(const std::string& key,
                                       const std::string& fallback) {
  return TakeString(key).value_or(fallback);
}

double KeyValueConfig::TakeDouble(const std::string& key, double fallback) {
  Entry* e = Find(key);
  if (!e) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(e->value, &used);
    if (used == e->value.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ConfigError(e->origin + ": '" + key + "' is not a number: " + e->value);
}

int KeyValueConfig::TakeInt(const std::string& key, int fallback) {
  Entry* e = Find(key);
  if (!e) return fallback;
  try {
    std::size_t used = 0;
    const int v = std::stoi(e->value, &used);
    if (used == e->value.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw ConfigError(e->origin + ": '" + key + "' is not an integer: " + e->value);
}

uint64_t KeyValueConfig::TakeU64(const std::string& key, uint64_t fallback) {
  Entry* e = Find(key);
  if (!e) return fallback;
  try {
    std::size_t used = 0;
    if (!e->value.empty() && e->value[0] != '-') {
      const uint64_t v = std::stoull(e->value, &used);
      if (used == e->value.size()) return v;
    }
  } catch (const std::logic_error&) {
  }
  throw ConfigError(e->origin + ": '" + key +
                    "' is not a non-negative integer: " + e->value);
}

std::optional<std::string> KeyValueConfig::TakePath(const std::string& key) {
  Entry* e = Find(key);
  if (!e) return std::nullopt;
  std::filesystem::path p(e->value);
  if (p.is_relative() && !e->dir.empty()) p = std::filesystem::path(e->dir) / p;
  return p.string();
}

void KeyValueConfig::CheckConsumed() const {
  std::string unknown;
  for (const auto& [key, e] : entries_)
    if (!e.consumed) unknown += "\n  " + e.origin + ": " + key;
  if (!unknown.empty()) throw ConfigError("unknown config keys:" + unknown);
}

}  // namespace fbse

// SPDX-License-Identifier: Apache-2.0
//
// Minimal TOML-style configuration reader: [section] headers, key = value
// pairs, '#' comments, scalar values (number, bool, quoted string) and flat
// arrays of those. Covers the training / noise / search-space files.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ikf {

struct ConfigValue {
  enum class Kind { kNumber, kBool, kString, kArray };
  Kind kind = Kind::kNumber;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<ConfigValue> array;

  double as_number() const;
  bool as_bool() const;
  const std::string& as_string() const;
};

class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  const ConfigValue& get(const std::string& section,
                         const std::string& key) const;

  double number_or(const std::string& section, const std::string& key,
                   double fallback) const;
  bool bool_or(const std::string& section, const std::string& key,
               bool fallback) const;
  std::string string_or(const std::string& section, const std::string& key,
                        const std::string& fallback) const;

  std::vector<std::string> sections() const;
  const std::map<std::string, ConfigValue>* section(
      const std::string& name) const;

 private:
  std::map<std::string, std::map<std::string, ConfigValue>> sections_;
};

}  // namespace ikf

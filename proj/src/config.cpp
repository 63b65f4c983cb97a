// SPDX-License-Identifier: Apache-2.0

#include "inekformer/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ikf {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

ConfigValue parse_scalar(const std::string& token, int line_no) {
  ConfigValue v;
  if (token == "true" || token == "false") {
    v.kind = ConfigValue::Kind::kBool;
    v.boolean = token == "true";
    return v;
  }
  if (token.size() >= 2 && token.front() == '"' && token.back() == '"') {
    v.kind = ConfigValue::Kind::kString;
    v.text = token.substr(1, token.size() - 2);
    return v;
  }
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, v.number);
  if (ec != std::errc{} || ptr != last)
    throw std::runtime_error("config: line " + std::to_string(line_no) +
                             ": bad value '" + token + "'");
  v.kind = ConfigValue::Kind::kNumber;
  v.text = token;
  return v;
}

ConfigValue parse_value(const std::string& raw, int line_no) {
  const std::string token = trim(raw);
  if (token.empty())
    throw std::runtime_error("config: line " + std::to_string(line_no) +
                             ": empty value");
  if (token.front() == '[') {
    if (token.back() != ']')
      throw std::runtime_error("config: line " + std::to_string(line_no) +
                               ": unterminated array");
    ConfigValue v;
    v.kind = ConfigValue::Kind::kArray;
    std::string inner = token.substr(1, token.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) v.array.push_back(parse_scalar(item, line_no));
    }
    return v;
  }
  return parse_scalar(token, line_no);
}

}  // namespace

double ConfigValue::as_number() const {
  if (kind != Kind::kNumber)
    throw std::runtime_error("config: value is not a number");
  return number;
}

bool ConfigValue::as_bool() const {
  if (kind != Kind::kBool)
    throw std::runtime_error("config: value is not a bool");
  return boolean;
}

const std::string& ConfigValue::as_string() const {
  if (kind != Kind::kString && kind != Kind::kNumber)
    throw std::runtime_error("config: value is not a string");
  return text;
}

Config Config::parse(const std::string& text) {
  Config cfg;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config: line " + std::to_string(line_no) +
                                 ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      cfg.sections_[section];
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(line_no) +
                               ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    cfg.sections_[section][key] = parse_value(line.substr(eq + 1), line_no);
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key) > 0;
}

const ConfigValue& Config::get(const std::string& section,
                               const std::string& key) const {
  const auto it = sections_.find(section);
  if (it == sections_.end() || !it->second.count(key))
    throw std::runtime_error("config: missing " + section + "." + key);
  return it->second.at(key);
}

double Config::number_or(const std::string& section, const std::string& key,
                         double fallback) const {
  return has(section, key) ? get(section, key).as_number() : fallback;
}

bool Config::bool_or(const std::string& section, const std::string& key,
                     bool fallback) const {
  return has(section, key) ? get(section, key).as_bool() : fallback;
}

std::string Config::string_or(const std::string& section,
                              const std::string& key,
                              const std::string& fallback) const {
  return has(section, key) ? get(section, key).as_string() : fallback;
}

std::vector<std::string> Config::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : sections_) out.push_back(name);
  return out;
}

const std::map<std::string, ConfigValue>* Config::section(
    const std::string& name) const {
  const auto it = sections_.find(name);
  return it == sections_.end() ? nullptr : &it->second;
}

}  // namespace ikf

/* Copyright 2026 The fsadv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#include "fsadv/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fsadv/errors.hpp"

namespace fsadv {

namespace {

constexpr char kModule[] = "config";

class Parser {
 public:
  Parser(std::string_view text, std::string_view origin) : text_(text), origin_(origin) {}

  ConfigDoc run() {
    while (!at_end()) {
      skip_blank();
      if (at_end()) break;
      if (peek() == '[') {
        table_header();
      } else {
        assignment();
      }
      end_of_line();
    }
    return std::move(doc_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::kConfig, kModule,
                std::string(origin_) + ":" + std::to_string(line_) + ": " + what);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  char take() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_spaces() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') ++pos_;
    }
  }
  // Spaces, comments and newlines.
  void skip_blank() {
    for (;;) {
      skip_spaces();
      skip_comment();
      if (!at_end() && (peek() == '\n' || peek() == '\r')) {
        take();
        continue;
      }
      return;
    }
  }
  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (peek() == '\r') take();
    if (!at_end() && take() != '\n') fail("unexpected text after value");
  }

  std::string key_path() {
    std::string key;
    for (;;) {
      skip_spaces();
      std::string part;
      while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                           peek() == '-')) {
        part.push_back(take());
      }
      if (part.empty()) fail("expected a key");
      key += key.empty() ? part : "." + part;
      skip_spaces();
      if (peek() != '.') return key;
      take();
    }
  }

  void table_header() {
    take();
    if (peek() == '[') fail("arrays of tables are not supported");
    table_ = key_path();
    if (peek() != ']') fail("expected ']' after table name");
    take();
  }

  void assignment() {
    const std::string key = key_path();
    if (peek() != '=') fail("expected '=' after key '" + key + "'");
    take();
    skip_spaces();
    const std::string full = table_.empty() ? key : table_ + "." + key;
    std::string value = peek() == '[' ? array() : scalar();
    if (doc_.has(full)) fail("duplicate key '" + full + "'");
    doc_.set(full, std::move(value));
  }

  std::string array() {
    take();
    std::vector<std::string> items;
    for (;;) {
      skip_blank();
      if (peek() == ']') {
        take();
        break;
      }
      if (peek() == '[') fail("nested arrays are not supported");
      std::string item = scalar();
      if (item.find(',') != std::string::npos) fail("array items may not contain ','");
      items.push_back(std::move(item));
      skip_blank();
      if (peek() == ',') {
        take();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    return join_list(items);
  }

  std::string scalar() {
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    if (peek() == '{') fail("inline tables are not supported");
    std::string token;
    while (!at_end() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' &&
           peek() != ']' && peek() != '#') {
      token.push_back(take());
    }
    if (token.empty()) fail("expected a value");
    if (token == "true" || token == "false" || is_number(token) || is_fraction(token)) {
      std::string clean;
      for (char c : token) {
        if (c != '_') clean.push_back(c);
      }
      return clean;
    }
    fail("unquoted value '" + token + "' (strings need quotes)");
  }

  static bool is_number(const std::string& t) {
    std::string s;
    for (char c : t) {
      if (c != '_') s.push_back(c);
    }
    if (s == "inf" || s == "+inf" || s == "-inf" || s == "nan") return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && !s.empty();
  }
  static bool is_fraction(const std::string& t) {
    const auto slash = t.find('/');
    return slash != std::string::npos && slash > 0 && is_number(t.substr(0, slash)) &&
           is_number(t.substr(slash + 1));
  }

  std::string basic_string() {
    take();
    std::string out;
    for (;;) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = take();
      if (c == '"') return out;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (at_end()) fail("unterminated escape");
      switch (const char e = take()) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        default: fail(std::string("unsupported escape '\\") + e + "'");
      }
    }
  }

  std::string literal_string() {
    take();
    std::string out;
    for (;;) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = take();
      if (c == '\'') return out;
      out.push_back(c);
    }
  }

  std::string_view text_;
  std::string_view origin_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::string table_;
  ConfigDoc doc_;
};

std::string quote(const std::string& v) {
  std::string out = "\"";
  for (char c : v) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out + "\"";
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const std::string* ConfigDoc::find(std::string_view key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::map<std::string, std::string> ConfigDoc::section(std::string_view prefix) const {
  std::map<std::string, std::string> out;
  const std::string p = std::string(prefix) + ".";
  for (const auto& [k, v] : values_) {
    if (k.starts_with(p)) out[k.substr(p.size())] = v;
  }
  return out;
}

std::string ConfigDoc::to_toml() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + quote(v) + "\n";
  return out;
}

ConfigDoc parse_config(std::string_view text, std::string_view origin) {
  return Parser(text, origin).run();
}

ConfigDoc load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kConfig, kModule, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_override(ConfigDoc& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorKind::kConfig, kModule,
                "override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  if (key.empty()) throw Error(ErrorKind::kConfig, kModule, "override with an empty key");
  if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
      value.back() == value.front()) {
    value = value.substr(1, value.size() - 2);
  }
  doc.set(key, value);
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string item = trim(text.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& i : items) out += (out.empty() ? "" : ",") + i;
  return out;
}

}  // namespace fsadv

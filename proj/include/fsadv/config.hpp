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


#ifndef FSADV_CONFIG_HPP_
#define FSADV_CONFIG_HPP_

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fsadv {

// Flat view of a TOML-style document. Tables and dotted keys collapse to
// "table.key"; arrays are stored comma-joined. Values keep the text the user
// wrote, so "16/255" survives into snapshots unchanged.
class ConfigDoc {
 public:
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(std::string_view key) const { return values_.find(key) != values_.end(); }
  const std::string* find(std::string_view key) const;
  bool erase(std::string_view key) { return values_.erase(std::string(key)) > 0; }

  const std::map<std::string, std::string, std::less<>>& entries() const { return values_; }
  // Entries under "prefix." with the prefix stripped.
  std::map<std::string, std::string> section(std::string_view prefix) const;

  // Sorted key = "value" lines. Parsing the output yields an equal document.
  std::string to_toml() const;

  friend bool operator==(const ConfigDoc&, const ConfigDoc&) = default;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

// Supported: comments, [table] headers, bare and dotted keys, basic and
// literal strings, integers, floats, booleans, arrays of scalars (may span
// lines) and unquoted fractions such as 16/255. Anything else is kConfig.
ConfigDoc parse_config(std::string_view text, std::string_view origin = "<config>");
ConfigDoc load_config(const std::string& path);

// "key=value" as given to --set.
void apply_override(ConfigDoc& doc, std::string_view assignment);

std::vector<std::string> split_list(std::string_view text);
std::string join_list(const std::vector<std::string>& items);

}  // namespace fsadv

#endif  // FSADV_CONFIG_HPP_

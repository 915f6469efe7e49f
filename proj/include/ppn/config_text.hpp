// Copyright (c) 2026 The PPN Engine Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <initializer_list>
#include <map>
#include <string>

namespace ppn {

/// "key = value" lines; '#' starts a comment. Duplicate or malformed lines
/// are ConfigErrors.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string str(const std::string& key) const;
  long long integer(const std::string& key) const;
  double number(const std::string& key) const;

  /// Throws ConfigError naming the first key outside `known`.
  void reject_unknown(std::initializer_list<const char*> known) const;

  /// Sorted "key = value" lines.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ppn

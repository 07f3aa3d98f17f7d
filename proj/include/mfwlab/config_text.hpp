// Copyright 2026 The mfwlab Authors
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

#ifndef MFWLAB_CONFIG_TEXT_HPP
#define MFWLAB_CONFIG_TEXT_HPP

#include <string>

#include <json.hpp>

namespace mfw {

/// Parses the TOML subset used by experiment configs into a JSON object:
/// `[section]` headers (one level), `key = value` lines, `#` comments, and
/// values that are double-quoted strings, integers, floats, booleans or
/// flat arrays of those. Throws FormatError with the line number on anything else.
nlohmann::json parse_toml_subset(const std::string& text);

}  // namespace mfw

#endif  // MFWLAB_CONFIG_TEXT_HPP

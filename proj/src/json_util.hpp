// Copyright 2026 The advsim authors
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

#ifndef SRC_JSON_UTIL_HPP_
#define SRC_JSON_UTIL_HPP_

#include <fstream>
#include <string>

#include "advsim/errors.hpp"
#include "json.hpp"

namespace advsim::jsonutil
{

// Schema accessors that name the offending field path in their error.

inline const nlohmann::json & require_key(
  const nlohmann::json & j, const std::string & key, const std::string & path)
{
  if (!j.is_object()) {
    fail(ErrorCode::schema, path + ": expected an object");
  }
  const auto it = j.find(key);
  if (it == j.end()) {
    fail(ErrorCode::schema, path + "." + key + ": missing");
  }
  return *it;
}

inline double require_number(const nlohmann::json & j, const std::string & path)
{
  if (!j.is_number()) {
    fail(ErrorCode::schema, path + ": expected a number");
  }
  return j.get<double>();
}

inline int require_int(const nlohmann::json & j, const std::string & path)
{
  if (!j.is_number_integer()) {
    fail(ErrorCode::schema, path + ": expected an integer");
  }
  return j.get<int>();
}

inline bool require_bool(const nlohmann::json & j, const std::string & path)
{
  if (!j.is_boolean()) {
    fail(ErrorCode::schema, path + ": expected a boolean");
  }
  return j.get<bool>();
}

inline std::string require_string(const nlohmann::json & j, const std::string & path)
{
  if (!j.is_string()) {
    fail(ErrorCode::schema, path + ": expected a string");
  }
  return j.get<std::string>();
}

inline const nlohmann::json & require_array(
  const nlohmann::json & j, const std::string & path)
{
  if (!j.is_array()) {
    fail(ErrorCode::schema, path + ": expected an array");
  }
  return j;
}

inline double get_number(
  const nlohmann::json & j, const std::string & key, const std::string & path)
{
  return require_number(require_key(j, key, path), path + "." + key);
}

inline int get_int(
  const nlohmann::json & j, const std::string & key, const std::string & path)
{
  return require_int(require_key(j, key, path), path + "." + key);
}

inline std::string get_string(
  const nlohmann::json & j, const std::string & key, const std::string & path)
{
  return require_string(require_key(j, key, path), path + "." + key);
}

inline nlohmann::json load_json_file(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    fail(ErrorCode::io, "cannot open " + path);
  }
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    fail(ErrorCode::parse, "malformed JSON in " + path);
  }
  return j;
}

inline void save_json_file(const nlohmann::json & j, const std::string & path)
{
  std::ofstream out(path);
  if (!out) {
    fail(ErrorCode::io, "cannot write " + path);
  }
  out << j.dump(2) << "\n";
  if (!out) {
    fail(ErrorCode::io, "short write to " + path);
  }
}

}  // namespace advsim::jsonutil

#endif  // SRC_JSON_UTIL_HPP_

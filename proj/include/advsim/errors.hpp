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

#ifndef ADVSIM_ERRORS_HPP_
#define ADVSIM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace advsim
{

enum class ErrorCode {
  io,         // file missing or unreadable
  parse,      // malformed input text
  schema,     // well formed but wrong shape; message carries a field path
  invariant,  // shape is fine, semantics are not
  argument,   // caller passed something unusable
  state,      // operation not legal in the current object state
  internal,
};

class Error : public std::runtime_error
{
public:
  Error(ErrorCode code, const std::string & message)
  : std::runtime_error(message), code_(code)
  {
  }

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string & message)
{
  throw Error(code, message);
}

}  // namespace advsim

#endif  // ADVSIM_ERRORS_HPP_

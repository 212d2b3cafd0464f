// Copyright 2026 The MTPC Authors.
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

#ifndef MTPC_ERROR_HPP_
#define MTPC_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace mtpc {

// Precondition violations raise std::invalid_argument. The two classes below
// separate bad input data from numerical breakdown so that callers (the CLI in
// particular) can map them onto distinct exit codes.

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace mtpc

#endif  // MTPC_ERROR_HPP_

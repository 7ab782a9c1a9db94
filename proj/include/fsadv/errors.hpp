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

#ifndef FSADV_ERRORS_HPP_
#define FSADV_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace fsadv {

enum class ErrorKind {
  kConfig,       // bad or inconsistent configuration
  kValidation,   // bad argument to a pure operation
  kDegenerate,   // zero-norm vector or similar upstream bug
  kUnsupported,  // bundle lacks a required capability
  kLookup,       // unknown class / key
  kNumeric,      // nonfinite value during optimization
  kNotFound,     // missing file or remote model
  kIntegrity,    // digest mismatch
  kNetwork,      // hub unreachable
  kIo,
  kMigration,    // persisted schema version mismatch
  kBuild,        // toy bundle failed its accuracy gate
};

const char* to_string(ErrorKind kind);

// All library errors carry the module that raised them so front ends can
// name it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message),
        kind_(kind),
        module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

}  // namespace fsadv

#endif  // FSADV_ERRORS_HPP_

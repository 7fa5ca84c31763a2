// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvact {

enum class Errc {
  placement_infeasible,
  unsupported_task,
  insufficient_length,
  empty_keyframes,
  malformed_manifest,
  version_mismatch,
  truncated_record,
  io_failure,
  shape_mismatch,
  non_scalar_loss,
  degenerate_input,
  non_unit_quaternion,
  non_finite,
  config_unknown_key,
  config_type_mismatch,
  config_constraint,
  checkpoint_mismatch,
  invalid_argument,
};

std::string_view to_string(Errc code) noexcept;

/// Exception carrying a stable error code. All library failures throw this.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mvact

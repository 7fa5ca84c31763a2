// SPDX-License-Identifier: Apache-2.0
#include "mvact/error.hpp"

namespace mvact {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::placement_infeasible: return "placement-infeasible";
    case Errc::unsupported_task: return "unsupported-task";
    case Errc::insufficient_length: return "insufficient-length";
    case Errc::empty_keyframes: return "empty-keyframes";
    case Errc::malformed_manifest: return "malformed-manifest";
    case Errc::version_mismatch: return "version-mismatch";
    case Errc::truncated_record: return "truncated-record";
    case Errc::io_failure: return "io-failure";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::non_scalar_loss: return "non-scalar-loss";
    case Errc::degenerate_input: return "degenerate-input";
    case Errc::non_unit_quaternion: return "non-unit-quaternion";
    case Errc::non_finite: return "non-finite";
    case Errc::config_unknown_key: return "config-unknown-key";
    case Errc::config_type_mismatch: return "config-type-mismatch";
    case Errc::config_constraint: return "config-constraint";
    case Errc::checkpoint_mismatch: return "checkpoint-mismatch";
    case Errc::invalid_argument: return "invalid-argument";
  }
  return "unknown";
}

}  // namespace mvact

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace varireal {

enum class Errc {
  invalid_argument,
  precondition,
  insufficient_prompts,
  parse_error,
  schema_version_mismatch,
  schema_error,
  io_error,
  backend_unavailable,
  backend_failure,
  malformed_reply,
  missing_decision,
  division_by_zero,
  empty_mask,
  unknown_color,
  dimension_mismatch,
  shape_mismatch,
  zero_norm,
  empty_pool,
  divergence,
  empty_input,
  non_psd,
  insufficient_synthetic,
  stage_order,
  config_error,
  not_found,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace varireal

#include "varireal/error.hpp"

namespace varireal {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::precondition: return "precondition";
    case Errc::insufficient_prompts: return "insufficient-prompts";
    case Errc::parse_error: return "parse-error";
    case Errc::schema_version_mismatch: return "schema-version-mismatch";
    case Errc::schema_error: return "schema-error";
    case Errc::io_error: return "io-error";
    case Errc::backend_unavailable: return "backend-unavailable";
    case Errc::backend_failure: return "backend-failure";
    case Errc::malformed_reply: return "malformed-reply";
    case Errc::missing_decision: return "missing-decision";
    case Errc::division_by_zero: return "division-by-zero";
    case Errc::empty_mask: return "empty-mask";
    case Errc::unknown_color: return "unknown-color";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::zero_norm: return "zero-norm";
    case Errc::empty_pool: return "empty-pool";
    case Errc::divergence: return "divergence";
    case Errc::empty_input: return "empty-input";
    case Errc::non_psd: return "non-psd";
    case Errc::insufficient_synthetic: return "insufficient-synthetic";
    case Errc::stage_order: return "stage-order";
    case Errc::config_error: return "config-error";
    case Errc::not_found: return "not-found";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

}  // namespace varireal

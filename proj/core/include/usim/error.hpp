#pragma once

#include <stdexcept>
#include <string>

namespace usim {

// Domain error codes, one per failure mode a caller is expected to
// distinguish. CLI maps any of these to exit code 1.
enum class ErrorCode {
  // channel
  connection_refused,
  protocol_version_mismatch,
  security_negotiation_failed,
  session_closed,
  malformed_rectangle,
  coordinates_out_of_range,
  // simdesk
  port_in_use,
  // humanizer
  out_of_bounds,
  unmappable_character,
  // vision
  template_larger_than_frame,
  empty_prototype_set,
  // actions
  missing_manifest,
  missing_image,
  dangling_element_id,
  element_not_found,
  verification_failed,
  empty_script,
  // recorder
  empty_recording,
  no_diff_found,
  // scenario
  parse_error,
  dangling_reference,
  weight_out_of_range,
  empty_window,
  missing_endpoint,
  missing_body,
  cyclic_dependencies,
  // textgen
  empty_corpus,
  unknown_bucket,
  provider_unreachable,
  provider_malformed_response,
  // generic
  io_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

} // namespace usim

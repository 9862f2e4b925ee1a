#include "usim/error.hpp"

namespace usim {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::connection_refused: return "connection-refused";
    case ErrorCode::protocol_version_mismatch: return "protocol-version-mismatch";
    case ErrorCode::security_negotiation_failed: return "security-negotiation-failed";
    case ErrorCode::session_closed: return "session-closed";
    case ErrorCode::malformed_rectangle: return "malformed-rectangle";
    case ErrorCode::coordinates_out_of_range: return "coordinates-out-of-range";
    case ErrorCode::port_in_use: return "port-in-use";
    case ErrorCode::out_of_bounds: return "out-of-bounds";
    case ErrorCode::unmappable_character: return "unmappable-character";
    case ErrorCode::template_larger_than_frame: return "template-larger-than-frame";
    case ErrorCode::empty_prototype_set: return "empty-prototype-set";
    case ErrorCode::missing_manifest: return "missing-manifest";
    case ErrorCode::missing_image: return "missing-image";
    case ErrorCode::dangling_element_id: return "dangling-element-id";
    case ErrorCode::element_not_found: return "element-not-found";
    case ErrorCode::verification_failed: return "verification-failed";
    case ErrorCode::empty_script: return "empty-script";
    case ErrorCode::empty_recording: return "empty-recording";
    case ErrorCode::no_diff_found: return "no-diff-found";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::dangling_reference: return "dangling-reference";
    case ErrorCode::weight_out_of_range: return "weight-out-of-range";
    case ErrorCode::empty_window: return "empty-window";
    case ErrorCode::missing_endpoint: return "missing-endpoint";
    case ErrorCode::missing_body: return "missing-body";
    case ErrorCode::cyclic_dependencies: return "cyclic-dependencies";
    case ErrorCode::empty_corpus: return "empty-corpus";
    case ErrorCode::unknown_bucket: return "unknown-bucket";
    case ErrorCode::provider_unreachable: return "provider-unreachable";
    case ErrorCode::provider_malformed_response: return "provider-malformed-response";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown-error";
}

} // namespace usim

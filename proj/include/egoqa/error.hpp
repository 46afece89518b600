#pragma once

#include <stdexcept>
#include <string>

namespace egoqa {

// Error taxonomy for the whole toolkit. Codes group into data errors
// (bad inputs, degenerate geometry) and transport errors (LLM endpoint);
// the CLI maps the groups to distinct exit codes.
enum class Errc {
  // geometry / point clouds
  degenerate_cloud,
  no_plane,
  no_ground,
  out_of_bounds,
  non_positive_depth,
  dimension_mismatch,
  // masks
  size_mismatch,
  // trajectories / facts
  empty_trajectory,
  degenerate_bearing,
  not_aligned,
  too_few_points,
  ambiguous_rank,
  // fusion
  tracker_failure,
  // forge
  too_short_track,
  missing_slot,
  missing_referring_expression,
  // metrics
  non_positive_ground_truth,
  no_foreground_frames,
  kind_mismatch,
  // llm gateway
  missing_input,
  transport_exhausted,
  malformed_response,
  judge_unavailable,
  // plumbing
  parse_error,
  io_error,
  invalid_argument,
};

inline const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::degenerate_cloud: return "DegenerateCloud";
    case Errc::no_plane: return "NoPlane";
    case Errc::no_ground: return "NoGround";
    case Errc::out_of_bounds: return "OutOfBounds";
    case Errc::non_positive_depth: return "NonPositiveDepth";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::size_mismatch: return "SizeMismatch";
    case Errc::empty_trajectory: return "EmptyTrajectory";
    case Errc::degenerate_bearing: return "DegenerateBearing";
    case Errc::not_aligned: return "NotAligned";
    case Errc::too_few_points: return "TooFewPoints";
    case Errc::ambiguous_rank: return "Ambiguous";
    case Errc::tracker_failure: return "TrackerFailure";
    case Errc::too_short_track: return "TooShortTrack";
    case Errc::missing_slot: return "MissingSlot";
    case Errc::missing_referring_expression: return "MissingReferringExpression";
    case Errc::non_positive_ground_truth: return "NonPositiveGroundTruth";
    case Errc::no_foreground_frames: return "NoForegroundFrames";
    case Errc::kind_mismatch: return "KindMismatch";
    case Errc::missing_input: return "MissingInput";
    case Errc::transport_exhausted: return "Exhausted";
    case Errc::malformed_response: return "MalformedResponse";
    case Errc::judge_unavailable: return "JudgeUnavailable";
    case Errc::parse_error: return "ParseError";
    case Errc::io_error: return "IoError";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "Error";
}

// True for errors caused by an unreachable or misbehaving remote service.
inline bool is_transport_error(Errc code) noexcept {
  return code == Errc::transport_exhausted || code == Errc::malformed_response ||
         code == Errc::judge_unavailable;
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) raise(code, message);
}

}  // namespace egoqa

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adcare::data {

enum class Label { positive = 0, negative = 1, ambiguous = 2 };
enum class Sex { male, female, unknown };
enum class BodyMotion { oligocentric, polycentric };
enum class Illumination { good, dark, blurry };

inline constexpr std::array<Label, 3> kLabels{Label::positive, Label::negative, Label::ambiguous};

const char* to_string(Label v);
const char* to_string(Sex v);
const char* to_string(BodyMotion v);
const char* to_string(Illumination v);
Label parse_label(std::string_view s);

struct Visibility {
  bool face_visible = false;
  bool pill_visible = false;
  bool water_visible = false;
  bool operator==(const Visibility&) const = default;
};

struct Descriptors {
  BodyMotion body_motion = BodyMotion::oligocentric;
  // Subset of {holding, swallowing, drinking}, listed in the order observed.
  std::vector<std::string> activities;
  // Subset of {talking, listening}.
  std::vector<std::string> interactions;
  Visibility visibility;
  Illumination illumination = Illumination::good;
  bool operator==(const Descriptors&) const = default;
};

// Evaluation dimensions a question can probe.
inline constexpr std::array<std::string_view, 5> kDimensions{"correctness", "detailing", "contextual", "temporal",
                                                             "consistency"};

struct QaPair {
  std::string dimension;
  std::string question;
  std::string answer;
  // Consistency items carry a second wording of the same question.
  std::optional<std::string> paraphrase;
  bool operator==(const QaPair&) const = default;
};

struct AnnotationRecord {
  std::string video_id;
  std::string patient_id;
  Sex sex = Sex::unknown;
  Label label = Label::positive;
  std::vector<Label> annotator_votes;
  Descriptors descriptors;
  std::string caption;
  std::vector<QaPair> qa_pairs;
  bool operator==(const AnnotationRecord&) const = default;
};

/// Parses one record. Throws ParseError naming the line (for syntax errors)
/// or the offending field path (for schema errors).
AnnotationRecord parse_record(std::string_view text);
/// Canonical form: sorted keys, two-space indent, trailing newline.
std::string serialize_record(const AnnotationRecord& record);

/// Reason codes for rejected records.
inline constexpr std::string_view kReasonVoteCount = "vote_count";
inline constexpr std::string_view kReasonDisagreement = "disagreement";
inline constexpr std::string_view kReasonLabelMismatch = "label_mismatch";
inline constexpr std::string_view kReasonInconsistent = "inconsistent_descriptors";
inline constexpr std::string_view kReasonDuplicate = "duplicate_video_id";
inline constexpr std::string_view kReasonMissingField = "missing_field";

/// Descriptor rules per label:
///   positive:  face and pill visible, good lighting
///   negative:  neither face nor pill visible
///   ambiguous: pill not visible, dark or blurry view
/// Returns the empty string when consistent, otherwise a short explanation.
std::string check_consistency(const AnnotationRecord& record);

struct Rejection {
  std::string video_id;
  std::string reason;
  std::string detail;
};

struct FilterResult {
  std::vector<AnnotationRecord> retained;
  std::vector<Rejection> rejected;
};

/// Keeps records with three identical votes matching the label and consistent
/// descriptors. Input order is preserved.
FilterResult validate_and_filter(std::span<const AnnotationRecord> records);

}  // namespace adcare::data

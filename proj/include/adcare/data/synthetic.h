#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adcare/data/annotation.h"
#include "adcare/encoder/video.h"

namespace adcare::data {

struct CorpusConfig {
  std::size_t n = 806;
  // Label mix (positive, negative, ambiguous).
  std::array<double, 3> distribution{0.60, 0.28, 0.12};
  encoder::FrameGeometry geometry;
  std::size_t records_per_patient = 16;
  // Extra records whose annotators disagree; they fail the unanimity filter.
  std::size_t disputed = 0;
  // Per-pixel Gaussian noise and number of static distractor rectangles.
  double noise = 0.06;
  std::size_t clutter = 2;
  // Share of negative clips filmed in the dark.
  double negative_dark_fraction = 0.25;
};

struct SyntheticItem {
  AnnotationRecord record;
  encoder::VideoSample video;
};

/// Per-class counts for n records, rounded by largest remainder so they sum
/// to n (806 at 60/28/12 gives 483/226/97).
std::array<std::size_t, 3> label_counts(std::size_t n, const std::array<double, 3>& distribution);

/// Procedural corpus. Labels follow the descriptor rules: positive clips show
/// a face, a pill blob travelling to the mouth and a water bottle under good
/// light; negative clips show no face and no pill; ambiguous clips hide the
/// pill under dark or blurred footage. Throws ContractError for n < 10.
std::vector<SyntheticItem> generate_synthetic_corpus(const CorpusConfig& config, std::uint64_t seed);

// Templated language for a record's descriptors.
std::string label_phrase(Label label);
std::string objects_phrase(const Visibility& v);
std::string lighting_phrase(Illumination light);
std::string temporal_phrase(Label label, const std::vector<std::string>& activities);
std::string caption_for(Label label, const Descriptors& d);
std::vector<QaPair> qa_pairs_for(Label label, const Descriptors& d);

inline constexpr const char* kPretrainPrompt = "describe the video";

// Number of frames in which the pill motif is drawn.
std::size_t pill_frames(const encoder::VideoSample& video);

/// Raw video file: "ADRV", u32 version, u32 F, H, W, C, then F*H*W*C bytes
/// (pixel value * 255, rounded). Little-endian.
std::string encode_video(const encoder::VideoSample& video);
encoder::VideoSample decode_video(const std::string& bytes, const std::string& id);
void write_video(const std::filesystem::path& path, const encoder::VideoSample& video);
encoder::VideoSample read_video(const std::filesystem::path& path);

struct ManifestEntry {
  std::filesystem::path video;
  std::filesystem::path record;
};

/// Writes videos/<id>.adrv, records/<id>.json and manifest.tsv under dir.
void write_corpus(const std::filesystem::path& dir, const std::vector<SyntheticItem>& items);
/// Manifest paths are relative to the manifest's directory; returned absolute.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace adcare::data

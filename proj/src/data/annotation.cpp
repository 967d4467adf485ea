#include "adcare/data/annotation.h"

#include <algorithm>
#include <set>

#include "json.hpp"

#include "adcare/error.h"

namespace adcare::data {

using json = nlohmann::json;

const char* to_string(Label v) {
  switch (v) {
    case Label::positive: return "positive";
    case Label::negative: return "negative";
    case Label::ambiguous: return "ambiguous";
  }
  return "?";
}

const char* to_string(Sex v) {
  switch (v) {
    case Sex::male: return "male";
    case Sex::female: return "female";
    case Sex::unknown: return "unknown";
  }
  return "?";
}

const char* to_string(BodyMotion v) { return v == BodyMotion::oligocentric ? "oligocentric" : "polycentric"; }

const char* to_string(Illumination v) {
  switch (v) {
    case Illumination::good: return "good";
    case Illumination::dark: return "dark";
    case Illumination::blurry: return "blurry";
  }
  return "?";
}

Label parse_label(std::string_view s) {
  for (Label l : kLabels)
    if (s == to_string(l)) return l;
  throw ParseError("unknown adherence label '" + std::string(s) + "'");
}

namespace {

const std::set<std::string> kActivities{"holding", "swallowing", "drinking"};
const std::set<std::string> kInteractions{"talking", "listening"};

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw ParseError("field '" + path + "': " + what);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional = {}) {
  if (!obj.is_object()) field_error(path.empty() ? "<root>" : path, "expected an object");
  const std::string prefix = path.empty() ? "" : path + ".";
  for (const char* k : required)
    if (!obj.contains(k)) field_error(prefix + k, "missing");
  for (const auto& [k, _] : obj.items()) {
    const bool known = std::ranges::any_of(required, [&](const char* r) { return k == r; }) ||
                       std::ranges::any_of(optional, [&](const char* r) { return k == r; });
    if (!known) field_error(prefix + k, "unknown field");
  }
}

std::string get_string(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_string()) field_error(path, "expected a string");
  return v.get<std::string>();
}

bool get_bool(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_boolean()) field_error(path, "expected a boolean");
  return v.get<bool>();
}

template <typename E>
E get_enum(const json& obj, const std::string& key, const std::string& path, std::initializer_list<E> values) {
  const std::string s = get_string(obj, key, path);
  for (E v : values)
    if (s == to_string(v)) return v;
  field_error(path, "unexpected value '" + s + "'");
}

std::vector<std::string> get_word_list(const json& obj, const std::string& key, const std::string& path,
                                       const std::set<std::string>& allowed) {
  const auto& v = obj.at(key);
  if (!v.is_array()) field_error(path, "expected an array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!v[i].is_string()) field_error(p, "expected a string");
    auto s = v[i].get<std::string>();
    if (!allowed.contains(s)) field_error(p, "unexpected value '" + s + "'");
    if (std::ranges::find(out, s) != out.end()) field_error(p, "duplicate value '" + s + "'");
    out.push_back(std::move(s));
  }
  return out;
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

}  // namespace

AnnotationRecord parse_record(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON at line " + std::to_string(line_of(text, e.byte > 0 ? e.byte - 1 : 0)) + ": " +
                     e.what());
  }
  check_keys(j, "", {"video_id", "patient_id", "sex", "label", "annotator_votes", "descriptors", "caption",
                     "qa_pairs"});
  AnnotationRecord r;
  r.video_id = get_string(j, "video_id", "video_id");
  r.patient_id = get_string(j, "patient_id", "patient_id");
  if (r.video_id.empty()) field_error("video_id", "must not be empty");
  if (r.patient_id.empty()) field_error("patient_id", "must not be empty");
  r.sex = get_enum(j, "sex", "sex", {Sex::male, Sex::female, Sex::unknown});
  r.label = get_enum(j, "label", "label", {Label::positive, Label::negative, Label::ambiguous});
  const auto& votes = j.at("annotator_votes");
  if (!votes.is_array()) field_error("annotator_votes", "expected an array");
  for (std::size_t i = 0; i < votes.size(); ++i) {
    const std::string p = "annotator_votes[" + std::to_string(i) + "]";
    if (!votes[i].is_string()) field_error(p, "expected a string");
    try {
      r.annotator_votes.push_back(parse_label(votes[i].get<std::string>()));
    } catch (const ParseError&) {
      field_error(p, "unexpected value '" + votes[i].get<std::string>() + "'");
    }
  }

  const auto& d = j.at("descriptors");
  check_keys(d, "descriptors", {"body_motion", "activities", "interactions", "visibility", "illumination"});
  r.descriptors.body_motion =
      get_enum(d, "body_motion", "descriptors.body_motion", {BodyMotion::oligocentric, BodyMotion::polycentric});
  r.descriptors.activities = get_word_list(d, "activities", "descriptors.activities", kActivities);
  r.descriptors.interactions = get_word_list(d, "interactions", "descriptors.interactions", kInteractions);
  r.descriptors.illumination = get_enum(d, "illumination", "descriptors.illumination",
                                        {Illumination::good, Illumination::dark, Illumination::blurry});
  const auto& vis = d.at("visibility");
  check_keys(vis, "descriptors.visibility", {"face_visible", "pill_visible", "water_visible"});
  r.descriptors.visibility.face_visible = get_bool(vis, "face_visible", "descriptors.visibility.face_visible");
  r.descriptors.visibility.pill_visible = get_bool(vis, "pill_visible", "descriptors.visibility.pill_visible");
  r.descriptors.visibility.water_visible = get_bool(vis, "water_visible", "descriptors.visibility.water_visible");

  r.caption = get_string(j, "caption", "caption");
  const auto& qa = j.at("qa_pairs");
  if (!qa.is_array()) field_error("qa_pairs", "expected an array");
  for (std::size_t i = 0; i < qa.size(); ++i) {
    const std::string p = "qa_pairs[" + std::to_string(i) + "]";
    check_keys(qa[i], p, {"dimension", "question", "answer"}, {"paraphrase"});
    QaPair pair;
    pair.dimension = get_string(qa[i], "dimension", p + ".dimension");
    if (std::ranges::find(kDimensions, pair.dimension) == kDimensions.end()) {
      field_error(p + ".dimension", "unexpected value '" + pair.dimension + "'");
    }
    pair.question = get_string(qa[i], "question", p + ".question");
    pair.answer = get_string(qa[i], "answer", p + ".answer");
    if (qa[i].contains("paraphrase")) pair.paraphrase = get_string(qa[i], "paraphrase", p + ".paraphrase");
    r.qa_pairs.push_back(std::move(pair));
  }
  return r;
}

std::string serialize_record(const AnnotationRecord& r) {
  json votes = json::array();
  for (Label l : r.annotator_votes) votes.push_back(to_string(l));
  json qa = json::array();
  for (const auto& p : r.qa_pairs) {
    json item{{"dimension", p.dimension}, {"question", p.question}, {"answer", p.answer}};
    if (p.paraphrase) item["paraphrase"] = *p.paraphrase;
    qa.push_back(std::move(item));
  }
  const auto& d = r.descriptors;
  json j{{"video_id", r.video_id},
         {"patient_id", r.patient_id},
         {"sex", to_string(r.sex)},
         {"label", to_string(r.label)},
         {"annotator_votes", votes},
         {"descriptors",
          {{"body_motion", to_string(d.body_motion)},
           {"activities", d.activities},
           {"interactions", d.interactions},
           {"visibility",
            {{"face_visible", d.visibility.face_visible},
             {"pill_visible", d.visibility.pill_visible},
             {"water_visible", d.visibility.water_visible}}},
           {"illumination", to_string(d.illumination)}}},
         {"caption", r.caption},
         {"qa_pairs", qa}};
  return j.dump(2) + "\n";
}

std::string check_consistency(const AnnotationRecord& r) {
  const auto& v = r.descriptors.visibility;
  const auto light = r.descriptors.illumination;
  switch (r.label) {
    case Label::positive:
      if (!v.face_visible) return "positive label without a visible face";
      if (!v.pill_visible) return "positive label without a visible pill";
      if (light != Illumination::good) return "positive label without good lighting";
      break;
    case Label::negative:
      if (v.face_visible) return "negative label with a visible face";
      if (v.pill_visible) return "negative label with a visible pill";
      break;
    case Label::ambiguous:
      if (v.pill_visible) return "ambiguous label with a visible pill";
      if (light == Illumination::good) return "ambiguous label with good lighting";
      break;
  }
  return {};
}

FilterResult validate_and_filter(std::span<const AnnotationRecord> records) {
  FilterResult out;
  std::set<std::string> seen;
  for (const auto& r : records) {
    auto reject = [&](std::string_view reason, std::string detail) {
      out.rejected.push_back({r.video_id, std::string(reason), std::move(detail)});
    };
    if (r.video_id.empty() || r.patient_id.empty()) {
      reject(kReasonMissingField, "video_id and patient_id are required");
      continue;
    }
    if (!seen.insert(r.video_id).second) {
      reject(kReasonDuplicate, "video id seen earlier in the corpus");
      continue;
    }
    if (r.annotator_votes.size() != 3) {
      reject(kReasonVoteCount, "expected 3 votes, got " + std::to_string(r.annotator_votes.size()));
      continue;
    }
    const auto& vs = r.annotator_votes;
    if (vs[0] != vs[1] || vs[1] != vs[2]) {
      reject(kReasonDisagreement, std::string("votes ") + to_string(vs[0]) + "/" + to_string(vs[1]) + "/" +
                                      to_string(vs[2]));
      continue;
    }
    if (vs[0] != r.label) {
      reject(kReasonLabelMismatch, std::string("votes say ") + to_string(vs[0]) + ", label says " + to_string(r.label));
      continue;
    }
    if (auto why = check_consistency(r); !why.empty()) {
      reject(kReasonInconsistent, why);
      continue;
    }
    out.retained.push_back(r);
  }
  return out;
}

}  // namespace adcare::data

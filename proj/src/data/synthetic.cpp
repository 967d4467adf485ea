#include "adcare/data/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "adcare/error.h"

namespace adcare::data {

using encoder::VideoSample;

std::array<std::size_t, 3> label_counts(std::size_t n, const std::array<double, 3>& distribution) {
  double total = 0.0;
  for (double d : distribution) {
    if (!(d >= 0.0)) throw ConfigError("label distribution entries must be non-negative");
    total += d;
  }
  if (!(total > 0.0)) throw ConfigError("label distribution sums to zero");
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * distribution[i] / total;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
  return counts;
}

std::string label_phrase(Label label) {
  switch (label) {
    case Label::positive: return "positive adherence patient swallows pill";
    case Label::negative: return "negative adherence no pill intake";
    case Label::ambiguous: return "ambiguous adherence pill not visible";
  }
  return {};
}

std::string objects_phrase(const Visibility& v) {
  std::string s;
  if (v.face_visible) s += "face ";
  if (v.pill_visible) s += "pill ";
  if (v.water_visible) s += "water ";
  return s.empty() ? "no objects visible" : s + "visible";
}

std::string lighting_phrase(Illumination light) {
  switch (light) {
    case Illumination::good: return "good lighting";
    case Illumination::dark: return "dark lighting";
    case Illumination::blurry: return "blurry view";
  }
  return {};
}

std::string temporal_phrase(Label label, const std::vector<std::string>& activities) {
  if (label == Label::negative) return "no intake observed";
  if (label == Label::ambiguous) return "unclear activity observed";
  std::string s;
  for (const auto& a : activities) {
    if (!s.empty()) s += " then ";
    if (a == "holding") s += "holds pill";
    else if (a == "swallowing") s += "swallows pill";
    else if (a == "drinking") s += "drinks water";
  }
  return s;
}

std::string caption_for(Label label, const Descriptors& d) {
  return label_phrase(label) + " " + objects_phrase(d.visibility) + " " + lighting_phrase(d.illumination) + " " +
         temporal_phrase(label, d.activities);
}

std::vector<QaPair> qa_pairs_for(Label label, const Descriptors& d) {
  return {{"correctness", "what is the adherence status", label_phrase(label), std::nullopt},
          {"detailing", "which objects are visible", objects_phrase(d.visibility), std::nullopt},
          {"contextual", "how is the lighting", lighting_phrase(d.illumination), std::nullopt},
          {"temporal", "what happens in order", temporal_phrase(label, d.activities), std::nullopt},
          {"consistency", "what is the adherence status", label_phrase(label),
           std::string("did the patient take the medication")}};
}

namespace {

using Color = std::array<double, 3>;

constexpr Color kSkin{0.86, 0.64, 0.50};
constexpr Color kPill{1.00, 1.00, 0.10};
constexpr Color kBottle{0.20, 0.45, 0.95};
constexpr std::array<Color, 5> kClutter{
    {{0.60, 0.22, 0.20}, {0.22, 0.58, 0.30}, {0.50, 0.30, 0.62}, {0.72, 0.72, 0.72}, {0.28, 0.28, 0.30}}};

struct Canvas {
  VideoSample& v;

  void put(std::size_t f, long y, long x, const Color& c) {
    if (y < 0 || x < 0 || y >= long(v.height) || x >= long(v.width)) return;
    for (std::size_t ch = 0; ch < v.channels; ++ch) v.at(f, std::size_t(y), std::size_t(x), ch) = c[ch % 3];
  }
  void rect(std::size_t f, double cy, double cx, long h, long w, const Color& c) {
    const long y0 = std::lround(cy) - h / 2, x0 = std::lround(cx) - w / 2;
    for (long y = y0; y < y0 + h; ++y)
      for (long x = x0; x < x0 + w; ++x) put(f, y, x, c);
  }
  void disk(std::size_t f, double cy, double cx, double r, const Color& c) {
    for (long y = long(cy - r) - 1; y <= long(cy + r) + 1; ++y)
      for (long x = long(cx - r) - 1; x <= long(cx + r) + 1; ++x)
        if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) put(f, y, x, c);
  }
};

void box_blur(VideoSample& v, std::size_t f) {
  std::vector<double> src(v.pixels.begin() + long(f * v.height * v.width * v.channels),
                          v.pixels.begin() + long((f + 1) * v.height * v.width * v.channels));
  auto at = [&](long y, long x, std::size_t c) {
    y = std::clamp(y, 0L, long(v.height) - 1);
    x = std::clamp(x, 0L, long(v.width) - 1);
    return src[(std::size_t(y) * v.width + std::size_t(x)) * v.channels + c];
  };
  for (long y = 0; y < long(v.height); ++y)
    for (long x = 0; x < long(v.width); ++x)
      for (std::size_t c = 0; c < v.channels; ++c) {
        double s = 0.0;
        for (long dy = -1; dy <= 1; ++dy)
          for (long dx = -1; dx <= 1; ++dx) s += at(y + dy, x + dx, c);
        v.at(f, std::size_t(y), std::size_t(x), c) = s / 9.0;
      }
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

// Draws one clip. Layout coordinates are fractions of the frame so any
// geometry renders the same scene.
VideoSample render(const AnnotationRecord& r, const CorpusConfig& cfg, std::mt19937_64& rng) {
  const auto& g = cfg.geometry;
  VideoSample v{r.video_id, g.frames, g.height, g.width, g.channels, {}};
  v.pixels.assign(g.frames * g.height * g.width * g.channels, 0.0);
  Canvas canvas{v};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double H = double(g.height), W = double(g.width);
  const double scale = std::min(H, W) / 32.0;
  const auto px = [&](double n) { return std::max(1L, std::lround(n * scale)); };

  const double base = lerp(0.35, 0.55, unit(rng));
  Color bg{base + 0.04 * (unit(rng) - 0.5), base + 0.04 * (unit(rng) - 0.5), base + 0.04 * (unit(rng) - 0.5)};
  for (std::size_t f = 0; f < g.frames; ++f)
    for (std::size_t y = 0; y < g.height; ++y)
      for (std::size_t x = 0; x < g.width; ++x) canvas.put(f, long(y), long(x), bg);

  struct Box {
    double cy, cx;
    long h, w;
    Color c;
  };
  std::vector<Box> clutter;
  for (std::size_t i = 0; i < cfg.clutter; ++i) {
    clutter.push_back({unit(rng) * H, unit(rng) * W, px(lerp(3, 8, unit(rng))), px(lerp(3, 8, unit(rng))),
                       kClutter[std::size_t(unit(rng) * kClutter.size()) % kClutter.size()]});
  }
  for (std::size_t f = 0; f < g.frames; ++f)
    for (const auto& b : clutter) canvas.rect(f, b.cy, b.cx, b.h, b.w, b.c);

  const auto& d = r.descriptors;
  const double face_y = H * lerp(0.24, 0.32, unit(rng)), face_x = W * lerp(0.40, 0.60, unit(rng));
  const double mouth_y = face_y + 3.0 * scale, mouth_x = face_x;
  const double hand_y = H * 0.84, hand_x = W * lerp(0.30, 0.70, unit(rng));
  const bool bottle_left = unit(rng) < 0.5;
  const double bottle_rest_y = H * 0.78, bottle_x = W * (bottle_left ? 0.14 : 0.86);
  const long bottle_h = px(9), bottle_w = px(3), pill = px(2), hand = px(3);
  const double face_r = 5.0 * scale;

  const std::size_t F = g.frames;
  std::vector<double> pill_t(F, -1.0), bottle_t(F, 0.0), hand_t(F, -1.0);
  const bool drink_first = !d.activities.empty() && d.activities.front() == "drinking";
  if (r.label == Label::positive) {
    // Pill visible over six of eight frame slots, reaching the mouth at the end
    // of its run; the bottle is raised before or after.
    const double s = double(F) / 8.0;
    const std::size_t p0 = drink_first ? std::size_t(std::lround(2 * s)) : 0;
    const std::size_t p1 = std::min(F, p0 + std::size_t(std::lround(6 * s)));
    for (std::size_t f = p0; f < p1; ++f) {
      pill_t[f] = p1 - p0 > 1 ? double(f - p0) / double(p1 - p0 - 1) : 1.0;
      hand_t[f] = pill_t[f];
    }
    for (std::size_t f = 0; f < F; ++f) {
      const double slot = double(f) / s;
      if (drink_first) bottle_t[f] = slot < 2.0 ? 1.0 : (slot < 3.0 ? 0.5 : 0.0);
      else bottle_t[f] = slot >= 6.0 ? 1.0 : (slot >= 5.0 ? 0.5 : 0.0);
    }
  } else if (r.label == Label::ambiguous) {
    for (std::size_t f = 0; f < F; ++f) hand_t[f] = 0.6 * double(f) / double(std::max<std::size_t>(1, F - 1));
  }

  for (std::size_t f = 0; f < F; ++f) {
    if (d.visibility.face_visible) canvas.disk(f, face_y, face_x, face_r, kSkin);
    if (d.visibility.water_visible) {
      const double by = lerp(bottle_rest_y, mouth_y + 2.0 * scale, bottle_t[f]);
      const double bx = lerp(bottle_x, face_x + (bottle_left ? -4.0 : 4.0) * scale, bottle_t[f]);
      canvas.rect(f, by, bx, bottle_h, bottle_w, kBottle);
    }
    if (hand_t[f] >= 0.0) {
      const double hy = lerp(hand_y, mouth_y + 2.0 * scale, hand_t[f]);
      const double hx = lerp(hand_x, mouth_x, hand_t[f]);
      canvas.rect(f, hy + 1.5 * scale, hx, hand, hand, kSkin);
    }
    if (d.visibility.pill_visible && pill_t[f] >= 0.0) {
      const double py = lerp(hand_y, mouth_y, pill_t[f]);
      const double pxx = lerp(hand_x, mouth_x, pill_t[f]);
      canvas.rect(f, py, pxx, pill, pill, kPill);
    }
  }

  for (std::size_t f = 0; f < F; ++f) {
    if (d.illumination == Illumination::blurry) {
      box_blur(v, f);
      box_blur(v, f);
    }
  }
  std::normal_distribution<double> noise(0.0, cfg.noise > 0.0 ? cfg.noise : 1.0);
  const double gain = d.illumination == Illumination::dark ? 0.35 : 1.0;
  for (auto& p : v.pixels) {
    double x = p * gain + (cfg.noise > 0.0 ? noise(rng) : 0.0);
    p = std::round(std::clamp(x, 0.0, 1.0) * 255.0) / 255.0;
  }
  return v;
}

Descriptors describe(Label label, const CorpusConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Descriptors d;
  d.body_motion = unit(rng) < 0.5 ? BodyMotion::oligocentric : BodyMotion::polycentric;
  if (unit(rng) < 0.4) d.interactions.push_back("talking");
  if (unit(rng) < 0.3) d.interactions.push_back("listening");
  switch (label) {
    case Label::positive:
      d.body_motion = BodyMotion::polycentric;
      d.visibility = {true, true, true};
      d.illumination = Illumination::good;
      if (unit(rng) < 0.5) d.activities = {"holding", "swallowing", "drinking"};
      else d.activities = {"drinking", "holding", "swallowing"};
      break;
    case Label::negative:
      d.visibility = {false, false, unit(rng) < 0.5};
      d.illumination = unit(rng) < cfg.negative_dark_fraction ? Illumination::dark : Illumination::good;
      break;
    case Label::ambiguous:
      d.visibility = {true, false, unit(rng) < 0.5};
      d.illumination = unit(rng) < 0.5 ? Illumination::dark : Illumination::blurry;
      d.activities = {"holding"};
      break;
  }
  return d;
}

std::mt19937_64 record_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(index), std::uint32_t(index >> 32)};
  return std::mt19937_64(seq);
}

std::string padded(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

}  // namespace

std::vector<SyntheticItem> generate_synthetic_corpus(const CorpusConfig& cfg, std::uint64_t seed) {
  if (cfg.n < 10) throw ContractError("synthetic corpus needs at least 10 records, got " + std::to_string(cfg.n));
  encoder::validate_geometry(cfg.geometry);
  if (cfg.records_per_patient == 0) throw ConfigError("records_per_patient must be positive");
  const auto counts = label_counts(cfg.n, cfg.distribution);
  std::vector<Label> labels;
  for (std::size_t i = 0; i < 3; ++i) labels.insert(labels.end(), counts[i], kLabels[i]);
  std::mt19937_64 rng(seed);
  std::shuffle(labels.begin(), labels.end(), rng);

  const std::size_t total = cfg.n + cfg.disputed;
  const std::size_t patients = std::max<std::size_t>(2, (total + cfg.records_per_patient - 1) / cfg.records_per_patient);
  std::vector<Sex> patient_sex(patients);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& s : patient_sex) s = unit(rng) < 0.66 ? Sex::male : Sex::female;
  const std::size_t id_width = std::max<std::size_t>(4, std::to_string(total).size());
  const std::size_t pt_width = std::max<std::size_t>(3, std::to_string(patients).size());

  std::vector<SyntheticItem> out;
  out.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    auto r_rng = record_rng(seed, i);
    AnnotationRecord r;
    r.video_id = "vid_" + padded(i + 1, id_width);
    const std::size_t patient = i % patients;
    r.patient_id = "pt_" + padded(patient + 1, pt_width);
    r.sex = patient_sex[patient];
    if (i < cfg.n) {
      r.label = labels[i];
      r.annotator_votes = {r.label, r.label, r.label};
    } else {
      r.label = kLabels[std::size_t(unit(r_rng) * 3.0) % 3];
      Label other = kLabels[(std::size_t(r.label) + 1 + std::size_t(unit(r_rng) * 2.0) % 2) % 3];
      r.annotator_votes = {r.label, r.label, other};
      std::shuffle(r.annotator_votes.begin(), r.annotator_votes.end(), r_rng);
    }
    r.descriptors = describe(r.label, cfg, r_rng);
    r.caption = caption_for(r.label, r.descriptors);
    r.qa_pairs = qa_pairs_for(r.label, r.descriptors);
    auto video = render(r, cfg, r_rng);
    out.push_back({std::move(r), std::move(video)});
  }
  return out;
}

std::size_t pill_frames(const VideoSample& v) {
  std::size_t count = 0;
  for (std::size_t f = 0; f < v.frames; ++f) {
    bool hit = false;
    auto yellow = [&](std::size_t y, std::size_t x) {
      return v.at(f, y, x, 0) > 0.80 && v.at(f, y, x, 1) > 0.80 && v.at(f, y, x, 2) < 0.40;
    };
    // The blob is at least two pixels wide; single noisy pixels do not count.
    for (std::size_t y = 0; y < v.height && !hit; ++y)
      for (std::size_t x = 0; x + 1 < v.width && !hit; ++x) hit = yellow(y, x) && yellow(y, x + 1);
    if (hit) ++count;
  }
  return count;
}

namespace {

constexpr char kVideoMagic[4] = {'A', 'D', 'R', 'V'};
constexpr std::uint32_t kVideoVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw ParseError("video file truncated in header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(in[pos + std::size_t(i)])) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::string encode_video(const VideoSample& v) {
  std::string out(kVideoMagic, 4);
  put_u32(out, kVideoVersion);
  for (std::size_t d : {v.frames, v.height, v.width, v.channels}) put_u32(out, std::uint32_t(d));
  out.reserve(out.size() + v.pixels.size());
  for (double p : v.pixels) out.push_back(char(static_cast<unsigned char>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0))));
  return out;
}

VideoSample decode_video(const std::string& bytes, const std::string& id) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kVideoMagic, 4) != 0) throw ParseError("not a raw video file");
  std::size_t pos = 4;
  if (get_u32(bytes, pos) != kVideoVersion) throw ParseError("unsupported raw video version");
  VideoSample v;
  v.id = id;
  v.frames = get_u32(bytes, pos);
  v.height = get_u32(bytes, pos);
  v.width = get_u32(bytes, pos);
  v.channels = get_u32(bytes, pos);
  const std::size_t n = v.frames * v.height * v.width * v.channels;
  if (bytes.size() - pos != n) throw ParseError("raw video payload does not match its shape header");
  v.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) v.pixels[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  return v;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), std::streamsize(text.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void write_video(const std::filesystem::path& path, const VideoSample& video) { write_text(path, encode_video(video)); }

VideoSample read_video(const std::filesystem::path& path) {
  return decode_video(read_text(path), path.stem().string());
}

void write_corpus(const std::filesystem::path& dir, const std::vector<SyntheticItem>& items) {
  std::string manifest = "# video\trecord\n";
  for (const auto& item : items) {
    const auto video = std::filesystem::path("videos") / (item.record.video_id + ".adrv");
    const auto record = std::filesystem::path("records") / (item.record.video_id + ".json");
    write_video(dir / video, item.video);
    write_text(dir / record, serialize_record(item.record));
    manifest += video.generic_string() + "\t" + record.generic_string() + "\n";
  }
  write_text(dir / "manifest.tsv", manifest);
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  const auto base = manifest.parent_path();
  std::istringstream in(read_text(manifest));
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(manifest.string() + ":" + std::to_string(lineno) + ": expected <video>\\t<record>");
    }
    out.push_back({base / line.substr(0, tab), base / line.substr(tab + 1)});
  }
  return out;
}

}  // namespace adcare::data

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "usim/frame.hpp"
#include "usim/geometry.hpp"

namespace usim::vision {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> intensities; // row-major Rec.601 luma

  GrayImage() = default;
  GrayImage(int w, int h) : width(w), height(h), intensities(static_cast<size_t>(w) * h, 0) {}

  uint8_t& at(int x, int y) { return intensities[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int x, int y) const { return intensities[static_cast<size_t>(y) * width + x]; }
};

GrayImage to_gray(const Frame& frame);

enum class ZoneKind { icon, button, text_line, window, unknown };

const char* to_string(ZoneKind kind);
ZoneKind zone_kind_from_string(const std::string& name);

struct ZoneOfInterest {
  Rect rect;
  ZoneKind kind = ZoneKind::unknown;
  double confidence = 0.0;
};

// One per-kind size/shape predicate; kinds are tried in listed order and
// the first match wins.
struct KindRule {
  ZoneKind kind = ZoneKind::unknown;
  double aspect_min = 0.0;
  double aspect_max = 1e9;
  int w_min = 1;
  int w_max = 1 << 20;
  int h_min = 1;
  int h_max = 1 << 20;
  double fill_min = 0.0;
  double fill_max = 1.0;

  bool matches(int w, int h, double fill) const;
};

struct GeometryRules {
  std::vector<KindRule> rules;

  // adaptive threshold stage
  int threshold_radius = 7;
  int threshold_c = 10;

  // text-line assembly: merge components whose horizontal gap and
  // vertical overlap pass these bounds; only components within text
  // height take part, so window frames never swallow their contents.
  int merge_gap_px = 4;
  double merge_overlap_frac = 0.5;
  int merge_max_height = 32;

  // Typical 96-DPI widget metrics.
  static GeometryRules defaults();

  ZoneKind classify_shape(int w, int h, double fill) const;
};

struct TemplateMatch {
  Rect rect;
  double score = 0.0;
};

struct ScoreMap {
  int width = 0;  // frame.width - tmpl.width + 1
  int height = 0;
  std::vector<double> scores; // row-major, one per offset

  double at(int x, int y) const { return scores[static_cast<size_t>(y) * width + x]; }
};

// Per-offset ZNCC scores over luma (the raw correlation surface).
ScoreMap match_template_scores(const Frame& frame, const Frame& tmpl);

// Zero-mean normalized cross-correlation over luma at every offset,
// non-maximum suppression with radius = half the template size, ties in
// row-major order. A zero-variance template degrades to
// 1 - mean-absolute-difference/255 so the operation stays total.
std::vector<TemplateMatch> match_template(const Frame& frame, const Frame& tmpl,
                                          double threshold);

using Mask = std::vector<uint8_t>; // nonzero = foreground

// Foreground iff intensity < window mean - c, window (2r+1)^2 clipped at
// the borders (each in-range pixel counted once). Summed-area table
// inside; integer-exact.
Mask adaptive_threshold(const GrayImage& img, int radius = 7, int c = 10);

struct Component {
  Rect rect;
  int pixel_count = 0;
};

// 8-connectivity, sorted by pixel count descending (ties top-left).
std::vector<Component> connected_components(const Mask& mask, int width, int height);

// Pluggable false-positive filter / labeler applied after the geometric
// rules. Gets the rule-assigned candidate kind and may relabel,
// including to unknown.
class ZoneClassifier {
 public:
  virtual ~ZoneClassifier() = default;
  virtual std::pair<ZoneKind, double> classify(const Frame& frame, const Rect& rect,
                                               ZoneKind candidate) const = 0;
};

// Keeps whatever the geometric rules said, confidence 1. The default
// when an environment profile ships no prototypes.
class RuleTrustingClassifier final : public ZoneClassifier {
 public:
  std::pair<ZoneKind, double> classify(const Frame&, const Rect&,
                                       ZoneKind candidate) const override {
    return {candidate, 1.0};
  }
};

// Deterministic nearest-template baseline: crops are scaled to 32x32
// luma and compared to labelled prototypes by normalized L2. Neural
// models slot in behind ZoneClassifier instead.
class PrototypeClassifier final : public ZoneClassifier {
 public:
  static constexpr int patch_size = 32;
  static constexpr double tau = 0.5;

  // Prototypes keep insertion order; ties break toward the earliest.
  void add_prototype(ZoneKind kind, const Frame& image);
  bool empty() const { return prototypes_.empty(); }
  size_t size() const { return prototypes_.size(); }

  // classify_zone: throws Error{empty_prototype_set} when no prototypes
  // are loaded.
  std::pair<ZoneKind, double> classify_crop(const Frame& frame, const Rect& rect) const;

  std::pair<ZoneKind, double> classify(const Frame& frame, const Rect& rect,
                                       ZoneKind candidate) const override;

 private:
  struct Proto {
    ZoneKind kind;
    std::vector<uint8_t> luma; // patch_size^2
  };
  std::vector<Proto> prototypes_;
};

std::pair<ZoneKind, double> classify_zone(const Frame& frame, const Rect& rect,
                                          const PrototypeClassifier& model);

// threshold -> components -> text-line merge -> geometry rules ->
// classifier; zones below confidence 0.5 are dropped.
std::vector<ZoneOfInterest> detect_zones(const Frame& frame, const GeometryRules& rules,
                                         const ZoneClassifier& classifier);

// Line reader for the built-in bitmap face. Pluggable seam for general
// OCR engines.
class TextRecognizer {
 public:
  virtual ~TextRecognizer() = default;
  virtual std::string read_line(const Frame& frame, const Rect& rect) const = 0;
};

class BitmapFontOcr final : public TextRecognizer {
 public:
  std::string read_line(const Frame& frame, const Rect& rect) const override;
};

// Exact reader for the built-in 5x7 face; unmatched cells become '?'.
std::string ocr_line(const Frame& frame, const Rect& rect);

struct LinkHit {
  Rect rect;
  std::string text;
};

// Colour-mask link detector: pixels within per-channel tolerance of the
// link colour, assembled into text runs, each read with ocr_line.
// Results in left-to-right order.
std::vector<LinkHit> find_links(const Frame& frame, Rgb link_colour, int tolerance = 16);

} // namespace usim::vision

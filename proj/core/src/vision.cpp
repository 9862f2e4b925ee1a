#include "usim/vision.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "usim/error.hpp"
#include "usim/font5x7.hpp"

namespace usim::vision {

GrayImage to_gray(const Frame& frame) {
  GrayImage gray(frame.width, frame.height);
  for (size_t i = 0; i < frame.pixels.size(); ++i) {
    const Rgba& p = frame.pixels[i];
    gray.intensities[i] = static_cast<uint8_t>(
        (299 * p.r + 587 * p.g + 114 * p.b + 500) / 1000);
  }
  return gray;
}

const char* to_string(ZoneKind kind) {
  switch (kind) {
    case ZoneKind::icon: return "icon";
    case ZoneKind::button: return "button";
    case ZoneKind::text_line: return "text-line";
    case ZoneKind::window: return "window";
    case ZoneKind::unknown: return "unknown";
  }
  return "unknown";
}

ZoneKind zone_kind_from_string(const std::string& name) {
  if (name == "icon") return ZoneKind::icon;
  if (name == "button") return ZoneKind::button;
  if (name == "text-line") return ZoneKind::text_line;
  if (name == "window") return ZoneKind::window;
  return ZoneKind::unknown;
}

bool KindRule::matches(int w, int h, double fill) const {
  if (w < w_min || w > w_max || h < h_min || h > h_max) return false;
  double aspect = static_cast<double>(w) / h;
  if (aspect < aspect_min || aspect > aspect_max) return false;
  return fill >= fill_min && fill <= fill_max;
}

GeometryRules GeometryRules::defaults() {
  GeometryRules r;
  r.rules = {
      {ZoneKind::icon, 0.75, 1.33, 12, 128, 12, 128, 0.0, 1.0},
      {ZoneKind::button, 1.5, 12.0, 1, 1 << 20, 16, 64, 0.0, 1.0},
      {ZoneKind::text_line, 3.0, 1e9, 1, 1 << 20, 6, 32, 0.0, 1.0},
  };
  return r;
}

ZoneKind GeometryRules::classify_shape(int w, int h, double fill) const {
  for (const KindRule& rule : rules)
    if (rule.matches(w, h, fill)) return rule.kind;
  return ZoneKind::unknown;
}

namespace {

// Summed-area table with one guard row/column of zeros.
struct Sat {
  int width, height;
  std::vector<int64_t> sum;

  explicit Sat(const GrayImage& img, bool squared = false)
      : width(img.width), height(img.height),
        sum(static_cast<size_t>(width + 1) * (height + 1), 0) {
    for (int y = 0; y < height; ++y) {
      int64_t row = 0;
      for (int x = 0; x < width; ++x) {
        int64_t v = img.at(x, y);
        if (squared) v *= v;
        row += v;
        sum[idx(x + 1, y + 1)] = sum[idx(x + 1, y)] + row;
      }
    }
  }

  size_t idx(int x, int y) const { return static_cast<size_t>(y) * (width + 1) + x; }

  // Inclusive box [x0,x1] x [y0,y1].
  int64_t box(int x0, int y0, int x1, int y1) const {
    return sum[idx(x1 + 1, y1 + 1)] - sum[idx(x0, y1 + 1)] - sum[idx(x1 + 1, y0)] +
           sum[idx(x0, y0)];
  }
};

} // namespace

Mask adaptive_threshold(const GrayImage& img, int radius, int c) {
  Mask mask(static_cast<size_t>(img.width) * img.height, 0);
  if (img.width == 0 || img.height == 0) return mask;
  Sat sat(img);
  for (int y = 0; y < img.height; ++y) {
    int y0 = std::max(0, y - radius);
    int y1 = std::min(img.height - 1, y + radius);
    for (int x = 0; x < img.width; ++x) {
      int x0 = std::max(0, x - radius);
      int x1 = std::min(img.width - 1, x + radius);
      int64_t count = static_cast<int64_t>(x1 - x0 + 1) * (y1 - y0 + 1);
      int64_t sum = sat.box(x0, y0, x1, y1);
      // v < mean - c, kept in integers: v*count < sum - c*count
      if (static_cast<int64_t>(img.at(x, y)) * count < sum - c * count)
        mask[static_cast<size_t>(y) * img.width + x] = 1;
    }
  }
  return mask;
}

std::vector<Component> connected_components(const Mask& mask, int width, int height) {
  std::vector<Component> out;
  std::vector<int32_t> label(mask.size(), -1);
  std::vector<size_t> stack;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      size_t i = static_cast<size_t>(y) * width + x;
      if (!mask[i] || label[i] >= 0) continue;
      int32_t id = static_cast<int32_t>(out.size());
      Component comp{{x, y, 1, 1}, 0};
      int min_x = x, max_x = x, min_y = y, max_y = y;
      label[i] = id;
      stack.push_back(i);
      while (!stack.empty()) {
        size_t j = stack.back();
        stack.pop_back();
        int cx = static_cast<int>(j % width);
        int cy = static_cast<int>(j / width);
        comp.pixel_count++;
        min_x = std::min(min_x, cx);
        max_x = std::max(max_x, cx);
        min_y = std::min(min_y, cy);
        max_y = std::max(max_y, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || nx >= width || ny < 0 || ny >= height) continue;
            size_t n = static_cast<size_t>(ny) * width + nx;
            if (mask[n] && label[n] < 0) {
              label[n] = id;
              stack.push_back(n);
            }
          }
        }
      }
      comp.rect = {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
      out.push_back(comp);
    }
  }
  std::sort(out.begin(), out.end(), [](const Component& a, const Component& b) {
    if (a.pixel_count != b.pixel_count) return a.pixel_count > b.pixel_count;
    if (a.rect.y != b.rect.y) return a.rect.y < b.rect.y;
    return a.rect.x < b.rect.x;
  });
  return out;
}

ScoreMap match_template_scores(const Frame& frame, const Frame& tmpl) {
  if (tmpl.width > frame.width || tmpl.height > frame.height)
    throw Error(ErrorCode::template_larger_than_frame,
                std::to_string(tmpl.width) + "x" + std::to_string(tmpl.height) +
                    " vs " + std::to_string(frame.width) + "x" +
                    std::to_string(frame.height));

  GrayImage f = to_gray(frame);
  GrayImage t = to_gray(tmpl);
  const int tw = t.width, th = t.height;
  const int64_t n = static_cast<int64_t>(tw) * th;

  int64_t t_sum = 0;
  for (uint8_t v : t.intensities) t_sum += v;
  double t_mean = static_cast<double>(t_sum) / static_cast<double>(n);
  std::vector<double> t_centered(t.intensities.size());
  double t_var = 0.0;
  for (size_t i = 0; i < t.intensities.size(); ++i) {
    t_centered[i] = t.intensities[i] - t_mean;
    t_var += t_centered[i] * t_centered[i];
  }
  bool flat_template = t_var < 1e-9;

  Sat sat(f);
  Sat sat_sq(f, true);

  ScoreMap map;
  map.width = f.width - tw + 1;
  map.height = f.height - th + 1;
  map.scores.resize(static_cast<size_t>(map.width) * map.height);
  for (int y = 0; y + th <= f.height; ++y) {
    for (int x = 0; x + tw <= f.width; ++x) {
      double score;
      if (flat_template) {
        // 1 - mean absolute difference / 255 against the uniform value
        int64_t abs_diff = 0;
        uint8_t tv = t.intensities.empty() ? 0 : t.intensities[0];
        for (int dy = 0; dy < th; ++dy)
          for (int dx = 0; dx < tw; ++dx)
            abs_diff += std::abs(static_cast<int>(f.at(x + dx, y + dy)) - tv);
        score = 1.0 - static_cast<double>(abs_diff) / (static_cast<double>(n) * 255.0);
      } else {
        int64_t w_sum = sat.box(x, y, x + tw - 1, y + th - 1);
        int64_t w_sq = sat_sq.box(x, y, x + tw - 1, y + th - 1);
        double w_var =
            static_cast<double>(w_sq) -
            static_cast<double>(w_sum) * static_cast<double>(w_sum) / static_cast<double>(n);
        if (w_var <= 1e-9) {
          score = 0.0; // flat window cannot correlate
        } else {
          // sum(t_centered) = 0, so sum(f * t_centered) already equals
          // the centered cross term
          double cross = 0.0;
          for (int dy = 0; dy < th; ++dy) {
            const uint8_t* frow = &f.intensities[static_cast<size_t>(y + dy) * f.width + x];
            const double* trow = &t_centered[static_cast<size_t>(dy) * tw];
            for (int dx = 0; dx < tw; ++dx) cross += frow[dx] * trow[dx];
          }
          score = cross / std::sqrt(w_var * t_var);
        }
      }
      map.scores[static_cast<size_t>(y) * map.width + x] = score;
    }
  }
  return map;
}

std::vector<TemplateMatch> match_template(const Frame& frame, const Frame& tmpl,
                                          double threshold) {
  ScoreMap map = match_template_scores(frame, tmpl);
  const int tw = tmpl.width, th = tmpl.height;

  struct Candidate {
    int x, y;
    double score;
  };
  std::vector<Candidate> candidates;
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      if (map.at(x, y) >= threshold) candidates.push_back({x, y, map.at(x, y)});

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  const int rx = tw / 2, ry = th / 2;
  std::vector<TemplateMatch> out;
  for (const Candidate& c : candidates) {
    bool suppressed = false;
    for (const TemplateMatch& kept : out) {
      if (std::abs(c.x - kept.rect.x) <= rx && std::abs(c.y - kept.rect.y) <= ry) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) out.push_back({{c.x, c.y, tw, th}, c.score});
  }
  return out;
}

namespace {

bool text_mergeable(const Component& a, const Component& b, const GeometryRules& rules) {
  if (a.rect.h > rules.merge_max_height || b.rect.h > rules.merge_max_height)
    return false;
  int gap = std::max(a.rect.x, b.rect.x) - std::min(a.rect.right(), b.rect.right());
  if (gap > rules.merge_gap_px) return false;
  int overlap = std::min(a.rect.bottom(), b.rect.bottom()) -
                std::max(a.rect.y, b.rect.y);
  int min_h = std::min(a.rect.h, b.rect.h);
  return overlap > 0 && static_cast<double>(overlap) >= rules.merge_overlap_frac * min_h;
}

std::vector<Component> merge_text_runs(std::vector<Component> comps,
                                       const GeometryRules& rules) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < comps.size() && !changed; ++i) {
      for (size_t j = i + 1; j < comps.size(); ++j) {
        if (!text_mergeable(comps[i], comps[j], rules)) continue;
        comps[i].rect = bounding_union(comps[i].rect, comps[j].rect);
        comps[i].pixel_count += comps[j].pixel_count;
        comps.erase(comps.begin() + static_cast<long>(j));
        changed = true;
        break;
      }
    }
  }
  return comps;
}

} // namespace

std::vector<ZoneOfInterest> detect_zones(const Frame& frame, const GeometryRules& rules,
                                         const ZoneClassifier& classifier) {
  GrayImage gray = to_gray(frame);
  Mask mask = adaptive_threshold(gray, rules.threshold_radius, rules.threshold_c);
  std::vector<Component> comps = connected_components(mask, frame.width, frame.height);
  comps = merge_text_runs(std::move(comps), rules);

  std::vector<ZoneOfInterest> zones;
  for (const Component& comp : comps) {
    double fill = static_cast<double>(comp.pixel_count) /
                  (static_cast<double>(comp.rect.w) * comp.rect.h);
    ZoneKind candidate = rules.classify_shape(comp.rect.w, comp.rect.h, fill);
    auto [kind, confidence] = classifier.classify(frame, comp.rect, candidate);
    if (confidence < 0.5) continue;
    zones.push_back({comp.rect, kind, confidence});
  }
  return zones;
}

void PrototypeClassifier::add_prototype(ZoneKind kind, const Frame& image) {
  Proto proto;
  proto.kind = kind;
  proto.luma.resize(static_cast<size_t>(patch_size) * patch_size);
  GrayImage gray = to_gray(image);
  for (int y = 0; y < patch_size; ++y) {
    for (int x = 0; x < patch_size; ++x) {
      int sx = x * gray.width / patch_size;
      int sy = y * gray.height / patch_size;
      proto.luma[static_cast<size_t>(y) * patch_size + x] = gray.at(sx, sy);
    }
  }
  prototypes_.push_back(std::move(proto));
}

std::pair<ZoneKind, double> PrototypeClassifier::classify_crop(const Frame& frame,
                                                               const Rect& rect) const {
  if (prototypes_.empty())
    throw Error(ErrorCode::empty_prototype_set, "classifier has no prototypes");
  if (rect.empty() || rect.x < 0 || rect.y < 0 || rect.right() > frame.width ||
      rect.bottom() > frame.height)
    throw Error(ErrorCode::out_of_bounds, "zone rect outside frame");

  // Crop, nearest-neighbour scale to the patch, compare by RMS distance
  // normalized to [0,1].
  std::vector<uint8_t> patch(static_cast<size_t>(patch_size) * patch_size);
  GrayImage gray = to_gray(frame);
  for (int y = 0; y < patch_size; ++y) {
    for (int x = 0; x < patch_size; ++x) {
      int sx = rect.x + x * rect.w / patch_size;
      int sy = rect.y + y * rect.h / patch_size;
      patch[static_cast<size_t>(y) * patch_size + x] = gray.at(sx, sy);
    }
  }

  double best = -1.0;
  ZoneKind best_kind = ZoneKind::unknown;
  for (const Proto& proto : prototypes_) {
    double sq = 0.0;
    for (size_t i = 0; i < patch.size(); ++i) {
      double d = static_cast<double>(patch[i]) - proto.luma[i];
      sq += d * d;
    }
    double dist = std::sqrt(sq / static_cast<double>(patch.size())) / 255.0;
    if (best < 0.0 || dist < best) {
      best = dist;
      best_kind = proto.kind;
    }
  }
  return {best_kind, std::exp(-best / tau)};
}

std::pair<ZoneKind, double> PrototypeClassifier::classify(const Frame& frame,
                                                          const Rect& rect,
                                                          ZoneKind) const {
  auto [kind, confidence] = classify_crop(frame, rect);
  if (confidence < 0.5) return {ZoneKind::unknown, confidence};
  return {kind, confidence};
}

std::pair<ZoneKind, double> classify_zone(const Frame& frame, const Rect& rect,
                                          const PrototypeClassifier& model) {
  return model.classify_crop(frame, rect);
}

namespace {

// Dominant luma of the rect grown by one pixel: glyph ink never reaches
// half the area, so the mode is the backing colour whether the line
// sits on the page or on a filled widget.
uint8_t modal_area_luma(const GrayImage& gray, const Rect& rect) {
  int x0 = std::max(0, rect.x - 1);
  int y0 = std::max(0, rect.y - 1);
  int x1 = std::min(gray.width, rect.right() + 1);
  int y1 = std::min(gray.height, rect.bottom() + 1);
  std::array<int, 256> histogram{};
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) histogram[gray.at(x, y)]++;
  int best = 0;
  for (int v = 1; v < 256; ++v)
    if (histogram[v] > histogram[best]) best = v;
  return static_cast<uint8_t>(best);
}

constexpr int kOcrContrast = 40;

} // namespace

std::string ocr_line(const Frame& frame, const Rect& rect) {
  Rect r = rect.intersect({0, 0, frame.width, frame.height});
  if (r.empty()) return "";

  GrayImage gray = to_gray(frame);
  uint8_t bg = modal_area_luma(gray, r);

  auto is_fg = [&](int x, int y) {
    return std::abs(static_cast<int>(gray.at(x, y)) - bg) > kOcrContrast;
  };

  // Column occupancy across the rect; glyph cells are maximal runs of
  // occupied columns (the face guarantees no internal empty column).
  std::vector<uint8_t> occupied(static_cast<size_t>(r.w), 0);
  for (int x = 0; x < r.w; ++x)
    for (int y = r.y; y < r.bottom() && !occupied[x]; ++y)
      if (is_fg(r.x + x, y)) occupied[x] = 1;

  struct Cell {
    int start, end; // inclusive columns within rect
    char ch;
    int lpad, rpad;
  };
  std::vector<Cell> cells;
  int x = 0;
  while (x < r.w) {
    if (!occupied[x]) {
      ++x;
      continue;
    }
    int start = x;
    while (x < r.w && occupied[x]) ++x;
    int end = x - 1;
    Cell cell{start, end, '?', 0, 0};
    int width = end - start + 1;
    if (width <= font5x7::cell_width) {
      int min_y = r.bottom(), max_y = r.y - 1;
      for (int cx = start; cx <= end; ++cx) {
        for (int y = r.y; y < r.bottom(); ++y) {
          if (!is_fg(r.x + cx, y)) continue;
          min_y = std::min(min_y, y);
          max_y = std::max(max_y, y);
        }
      }
      int height = max_y - min_y + 1;
      if (height >= 1 && height <= font5x7::cell_height) {
        std::vector<uint8_t> bits;
        bits.reserve(static_cast<size_t>(width) * height);
        for (int y = min_y; y <= max_y; ++y)
          for (int cx = start; cx <= end; ++cx)
            bits.push_back(is_fg(r.x + cx, y) ? 1 : 0);
        auto hit = font5x7::match_tight(font5x7::make_key(bits, width, height),
                                        width, height);
        if (hit) {
          cell.ch = hit->ch;
          cell.lpad = hit->left_pad;
          cell.rpad = hit->right_pad;
        }
      }
    }
    cells.push_back(cell);
  }

  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) {
      // Gap beyond the glyphs' own padding and the 1 px advance spacing
      // means full empty cells, i.e. spaces.
      int gap = cells[i].start - cells[i - 1].end - 1;
      int base = cells[i - 1].rpad + 1 + cells[i].lpad;
      int spaces = (gap - base + font5x7::advance / 2) / font5x7::advance;
      for (int s = 0; s < spaces; ++s) out.push_back(' ');
    }
    out.push_back(cells[i].ch);
  }
  return out;
}

std::string BitmapFontOcr::read_line(const Frame& frame, const Rect& rect) const {
  return ocr_line(frame, rect);
}

std::vector<LinkHit> find_links(const Frame& frame, Rgb link_colour, int tolerance) {
  Mask mask(static_cast<size_t>(frame.width) * frame.height, 0);
  for (size_t i = 0; i < frame.pixels.size(); ++i) {
    const Rgba& p = frame.pixels[i];
    if (std::abs(p.r - link_colour.r) <= tolerance &&
        std::abs(p.g - link_colour.g) <= tolerance &&
        std::abs(p.b - link_colour.b) <= tolerance)
      mask[i] = 1;
  }
  GeometryRules rules = GeometryRules::defaults();
  std::vector<Component> comps = connected_components(mask, frame.width, frame.height);
  comps = merge_text_runs(std::move(comps), rules);
  std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
    if (a.rect.x != b.rect.x) return a.rect.x < b.rect.x;
    return a.rect.y < b.rect.y;
  });
  std::vector<LinkHit> out;
  for (const Component& comp : comps) {
    std::string text = ocr_line(frame, comp.rect);
    out.push_back({comp.rect, std::move(text)});
  }
  return out;
}

} // namespace usim::vision

#include "signet/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "signet/core/canvas.hpp"
#include "signet/ingest/font.hpp"
#include "signet/ingest/pdf.hpp"
#include "signet/util/image_io.hpp"
#include "signet/util/seed.hpp"

namespace signet::synth {

namespace {

using Rng = std::mt19937_64;
using P2 = std::array<double, 2>;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

P2 catmull_rom(const P2& p0, const P2& p1, const P2& p2, const P2& p3, double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  P2 out{};
  for (int k = 0; k < 2; ++k) {
    out[k] = 0.5 * (2.0 * p1[k] + (-p0[k] + p2[k]) * t + (2.0 * p0[k] - 5.0 * p1[k] + 4.0 * p2[k] - p3[k]) * t2 +
                    (-p0[k] + 3.0 * p1[k] - 3.0 * p2[k] + p3[k]) * t3);
  }
  return out;
}

void stamp_disk(GrayGrid& g, double cx, double cy, double r, float ink) {
  const int x0 = static_cast<int>(std::floor(cx - r - 1));
  const int x1 = static_cast<int>(std::ceil(cx + r + 1));
  const int y0 = static_cast<int>(std::floor(cy - r - 1));
  const int y1 = static_cast<int>(std::ceil(cy + r + 1));
  for (int y = std::max(0, y0); y <= std::min(g.height() - 1, y1); ++y) {
    for (int x = std::max(0, x0); x <= std::min(g.width() - 1, x1); ++x) {
      const double d = std::hypot(x - cx, y - cy);
      const double cov = std::clamp(r + 0.5 - d, 0.0, 1.0);
      if (cov <= 0.0) continue;
      const float v = 1.0F - static_cast<float>(cov) * (1.0F - ink);
      g(x, y) = std::min(g(x, y), v);
    }
  }
}

// Draws a polyline in pixel coordinates with a round pen.
void draw_path(GrayGrid& g, const std::vector<P2>& pts, double r, float ink) {
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double len = std::hypot(pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]);
    const int steps = std::max(1, static_cast<int>(std::ceil(len / 0.5)));
    for (int s = 0; s < steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      stamp_disk(g, pts[i][0] + t * (pts[i + 1][0] - pts[i][0]), pts[i][1] + t * (pts[i + 1][1] - pts[i][1]), r,
                 ink);
    }
  }
  if (!pts.empty()) stamp_disk(g, pts.back()[0], pts.back()[1], r, ink);
}

std::vector<P2> spline(const std::vector<P2>& ctrl, int per_segment) {
  std::vector<P2> out;
  if (ctrl.size() < 2) return ctrl;
  for (std::size_t i = 0; i + 1 < ctrl.size(); ++i) {
    const P2& p0 = ctrl[i == 0 ? 0 : i - 1];
    const P2& p3 = ctrl[std::min(ctrl.size() - 1, i + 2)];
    for (int s = 0; s < per_segment; ++s) {
      out.push_back(catmull_rom(p0, ctrl[i], ctrl[i + 1], p3, static_cast<double>(s) / per_segment));
    }
  }
  out.push_back(ctrl.back());
  return out;
}

// A cursive-like run: forward progress with loops of random height.
Stroke make_run(Rng& rng, double x_begin, double x_end, double baseline, int humps) {
  Stroke s;
  const double step = (x_end - x_begin) / humps;
  s.points.push_back({x_begin, baseline + uniform(rng, -0.05, 0.05)});
  for (int i = 0; i < humps; ++i) {
    const double x = x_begin + step * (i + 0.5);
    const double high = uniform(rng, 0.05, 0.45);
    const bool loop = uniform(rng, 0.0, 1.0) < 0.35;
    s.points.push_back({x + uniform(rng, -0.2, 0.2) * step, high});
    if (loop) s.points.push_back({x - 0.45 * step, high + uniform(rng, 0.1, 0.25)});
    s.points.push_back({x + 0.5 * step, baseline + uniform(rng, -0.08, 0.12)});
  }
  return s;
}

}  // namespace

AuthorStyle make_author(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xa07));
  AuthorStyle a;
  a.aspect = uniform(rng, 2.4, 3.6);
  a.pen_ratio = uniform(rng, 0.005, 0.009);
  a.slant = uniform(rng, -0.25, 0.35);
  const double split = uniform(rng, 0.3, 0.5);
  a.strokes.push_back(make_run(rng, uniform(rng, 0.0, 0.06), split, uniform(rng, 0.65, 0.8), uniform_int(rng, 2, 4)));
  a.strokes.push_back(make_run(rng, split - 0.04, uniform(rng, 0.9, 1.0), uniform(rng, 0.6, 0.85), uniform_int(rng, 3, 6)));
  // Capital-letter flourish or underline.
  Stroke extra;
  if (uniform(rng, 0.0, 1.0) < 0.5) {
    const double x = uniform(rng, 0.02, 0.15);
    extra.points = {{x, 0.95}, {x + 0.03, uniform(rng, 0.0, 0.15)}, {x + uniform(rng, 0.08, 0.15), 0.3},
                    {x + 0.02, 0.55}};
  } else {
    const double y = uniform(rng, 0.88, 0.98);
    extra.points = {{uniform(rng, 0.05, 0.3), y}, {0.55, y + uniform(rng, -0.04, 0.04)},
                    {uniform(rng, 0.8, 0.98), y - uniform(rng, 0.0, 0.08)}};
  }
  a.strokes.push_back(std::move(extra));
  return a;
}

GrayGrid render_signature(const AuthorStyle& author, std::uint64_t instance_seed, int width) {
  Rng rng(mix_seed(instance_seed, 0x51a));
  const int height = std::max(8, static_cast<int>(std::lround(width / author.aspect)));
  GrayGrid g(width, height, 1.0F);
  const double pad = 0.08;
  const double sx = uniform(rng, 0.96, 1.04);
  const double sy = uniform(rng, 0.94, 1.06);
  const double rot = uniform(rng, -2.0, 2.0) * std::numbers::pi / 180.0;
  const double slant = author.slant + uniform(rng, -0.04, 0.04);
  const double r = std::max(0.8, author.pen_ratio * width * uniform(rng, 0.9, 1.1));
  const float ink = static_cast<float>(uniform(rng, 0.0, 0.15));
  std::normal_distribution<double> jitter(0.0, 0.012);

  for (const Stroke& s : author.strokes) {
    std::vector<P2> ctrl;
    for (const P2& p : s.points) {
      double x = p[0] + jitter(rng);
      double y = p[1] + jitter(rng);
      x += slant * (0.5 - y) / author.aspect;
      x = 0.5 + (x - 0.5) * sx;
      y = 0.5 + (y - 0.5) * sy;
      const double rx = 0.5 + (x - 0.5) * std::cos(rot) - (y - 0.5) * std::sin(rot) / author.aspect;
      const double ry = 0.5 + (x - 0.5) * std::sin(rot) * author.aspect + (y - 0.5) * std::cos(rot);
      ctrl.push_back({(pad + rx * (1.0 - 2.0 * pad)) * width, (pad + ry * (1.0 - 2.0 * pad)) * height});
    }
    draw_path(g, spline(ctrl, 12), r, ink);
  }
  return g;
}

BBox ink_bbox(const GrayGrid& g, float level) {
  BBox b = empty_bbox();
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (g(x, y) < level) b.include(x, y);
    }
  }
  return b;
}

SignatureImage signature_canvas(const AuthorStyle& author, std::uint64_t instance_seed, int width) {
  const GrayGrid g = render_signature(author, instance_seed, width);
  BBox box = ink_bbox(g);
  if (!box.valid()) box = BBox{0, 0, g.width() - 1, g.height() - 1};
  return normalize_to_canvas(crop_grid(g, box), Provenance{});
}

GrayGrid render_stamp(std::uint64_t seed, int width, int height) {
  Rng rng(mix_seed(seed, 0x57a));
  GrayGrid g(width, height, 1.0F);
  const float ink = static_cast<float>(uniform(rng, 0.25, 0.6));
  const double r = uniform(rng, 1.0, 2.2);
  std::vector<P2> path;
  if (uniform(rng, 0.0, 1.0) < 0.5) {
    const double cx = (width - 1) / 2.0;
    const double cy = (height - 1) / 2.0;
    const double ax = width / 2.0 - r - 2;
    const double ay = height / 2.0 - r - 2;
    for (int i = 0; i <= 180; ++i) {
      const double a = 2.0 * std::numbers::pi * i / 180;
      path.push_back({cx + ax * std::cos(a), cy + ay * std::sin(a)});
    }
  } else {
    const double m = r + 2;
    path = {{m, m}, {width - 1 - m, m}, {width - 1 - m, height - 1 - m}, {m, height - 1 - m}, {m, m}};
  }
  draw_path(g, path, r, ink);
  const int scale = std::max(1, height / 40);
  const std::string text = random_words(mix_seed(seed, 1), uniform_int(rng, 1, 2));
  const int tw = ingest::text_width(text, scale);
  ingest::draw_text(g, std::max(0, (width - tw) / 2), height / 2 - 3 * scale, text, scale, ink);
  return g;
}

void overlay(GrayGrid& dst, const GrayGrid& src, int x, int y) {
  for (int sy = 0; sy < src.height(); ++sy) {
    for (int sx = 0; sx < src.width(); ++sx) {
      if (dst.contains(x + sx, y + sy)) dst(x + sx, y + sy) *= src(sx, sy);
    }
  }
}

SignatureImage stamped(const SignatureImage& clean, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5e1));
  SignatureImage out = clean;
  const int w = uniform_int(rng, 110, 200);
  const int h = uniform_int(rng, 70, 140);
  overlay(out.pixels, render_stamp(seed, w, h), uniform_int(rng, 0, kCanvasSize - w),
          uniform_int(rng, 40, kCanvasSize - h - 20));
  return out;
}

StampSet stamp_set(int count, std::uint64_t seed, int authors) {
  StampSet set;
  std::vector<AuthorStyle> styles;
  for (int a = 0; a < std::max(1, authors); ++a) styles.push_back(make_author(mix_seed(seed, 100 + a)));
  for (int i = 0; i < count; ++i) {
    const auto& style = styles[static_cast<std::size_t>(i) % styles.size()];
    SignatureImage c = signature_canvas(style, mix_seed(seed, 1000 + i));
    c.provenance.doc_id = "stamp_set";
    c.provenance.page_index = i;
    set.stamped.push_back(stamped(c, mix_seed(seed, 5000 + i)));
    set.clean.push_back(std::move(c));
  }
  return set;
}

std::string random_words(std::uint64_t seed, int words) {
  static const char* const kWords[] = {
      "COMPANY", "DIRECTOR", "ANNUAL",  "RETURN",   "LIMITED", "ADDRESS", "REGISTERED", "OFFICE",
      "DATE",    "SHARES",   "CAPITAL", "SECRETARY", "NAME",   "NUMBER",  "STATEMENT",  "ACCOUNTS",
      "FORM",    "HOLDINGS", "NOTICE",  "CHANGE",   "PARTICULARS", "RESOLUTION", "MEMBER", "LONDON"};
  Rng rng(mix_seed(seed, 0x30d));
  std::string out;
  for (int i = 0; i < words; ++i) {
    if (i > 0) out += ' ';
    out += kWords[uniform_int(rng, 0, static_cast<int>(std::size(kWords)) - 1)];
  }
  return out;
}

SignatureImage clutter_canvas(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xc1u));
  const int kind = uniform_int(rng, 0, 3);
  GrayGrid g;
  switch (kind) {
    case 0: {  // printed words
      const std::string text = random_words(seed, uniform_int(rng, 1, 3));
      const int scale = uniform_int(rng, 2, 3);
      g = GrayGrid(ingest::text_width(text, scale), 7 * scale, 1.0F);
      ingest::draw_text(g, 0, 0, text, scale, static_cast<float>(uniform(rng, 0.0, 0.2)));
      break;
    }
    case 1:
      g = render_stamp(seed, uniform_int(rng, 120, 240), uniform_int(rng, 70, 140));
      break;
    case 2: {  // logo-like filled block with a hole
      const int w = uniform_int(rng, 60, 200);
      const int h = uniform_int(rng, 40, 120);
      g = GrayGrid(w, h, static_cast<float>(uniform(rng, 0.0, 0.3)));
      for (int y = h / 3; y < 2 * h / 3; ++y) {
        for (int x = w / 4; x < 3 * w / 4; ++x) g(x, y) = 1.0F;
      }
      break;
    }
    default: {  // ruled table with entries
      const int cols = uniform_int(rng, 2, 4);
      const int rows = uniform_int(rng, 2, 4);
      const int cw = uniform_int(rng, 50, 80);
      const int rh = 24;
      g = GrayGrid(cols * cw + 1, rows * rh + 1, 1.0F);
      for (int c = 0; c <= cols; ++c) {
        for (int y = 0; y < g.height(); ++y) g(c * cw, y) = 0.1F;
      }
      for (int r = 0; r <= rows; ++r) {
        for (int x = 0; x < g.width(); ++x) g(x, r * rh) = 0.1F;
      }
      for (int r = 0; r < rows; ++r) {
        ingest::draw_text(g, 4, r * rh + 5, random_words(mix_seed(seed, 10 + r), 1).substr(0, 5), 2, 0.1F);
      }
      break;
    }
  }
  BBox box = ink_bbox(g);
  if (!box.valid()) box = BBox{0, 0, g.width() - 1, g.height() - 1};
  return normalize_to_canvas(crop_grid(g, box), Provenance{});
}

SyntheticDocument make_document(const std::string& doc_id, const std::vector<AuthorStyle>& authors,
                                const std::vector<int>& signers, std::uint64_t seed,
                                const DocumentOptions& options) {
  Rng rng(mix_seed(seed, 0xd0c));
  SyntheticDocument doc;
  doc.doc_id = doc_id;
  const int pages = std::max(1, options.pages);
  const int w = options.width;
  const int h = options.height;
  const int margin = w / 12;
  for (int p = 0; p < pages; ++p) {
    GrayGrid page(w, h, 1.0F);
    // Slight paper tone so the page is not perfectly flat.
    for (float& v : page.cells()) v = 0.97F;
    int y = margin;
    ingest::draw_text(page, margin, y, random_words(mix_seed(seed, 100 + p), 3), 3, 0.05F);
    y += 50;
    const int lines = uniform_int(rng, 6, 12);
    for (int l = 0; l < lines; ++l) {
      std::string line = random_words(mix_seed(seed, 1000 * (p + 1) + l), uniform_int(rng, 3, 7));
      while (ingest::text_width(line, 2) > w - 2 * margin && line.find(' ') != std::string::npos) {
        line.erase(line.rfind(' '));
      }
      ingest::draw_text(page, margin, y, line, 2, 0.1F);
      y += 26;
    }
    if (options.filed_notice) ingest::draw_text(page, margin, h - margin, "ELECTRONICALLY FILED", 2, 0.1F);
    doc.pages.push_back(std::move(page));
    doc.signatures.emplace_back();
  }

  // Signature blocks stack from below the body text on each page.
  std::vector<int> cursor(static_cast<std::size_t>(pages), margin + 50 + 26 * 12 + 30);
  for (std::size_t i = 0; i < signers.size(); ++i) {
    const int p = static_cast<int>(i % static_cast<std::size_t>(pages));
    GrayGrid& page = doc.pages[static_cast<std::size_t>(p)];
    int& yy = cursor[static_cast<std::size_t>(p)];
    ingest::draw_text(page, margin, yy, "SIGNED", 2, 0.1F);
    yy += 14 + 40;
    const AuthorStyle& author = authors.at(static_cast<std::size_t>(signers[i]));
    const GrayGrid sig = render_signature(author, mix_seed(seed, 50000 + i), uniform_int(rng, 220, 280));
    const int x = margin + uniform_int(rng, 0, w / 3);
    if (yy + sig.height() > h - 2 * margin) break;
    overlay(page, sig, x, yy);
    BBox ink = ink_bbox(sig);
    if (ink.valid()) {
      doc.signatures[static_cast<std::size_t>(p)].push_back(
          {BBox{x + ink.x_min, yy + ink.y_min, x + ink.x_max, yy + ink.y_max}, signers[i]});
    }
    yy += sig.height() + 60;
  }
  return doc;
}

std::filesystem::path write_document(const SyntheticDocument& doc, const std::filesystem::path& root,
                                     FileKind kind, int dpi) {
  const std::filesystem::path path = root / doc.doc_id;
  switch (kind) {
    case FileKind::kPng:
      io::write_png(path, doc.pages.front());
      break;
    case FileKind::kTiff:
      io::write_tiff(path, doc.pages);
      break;
    case FileKind::kPdf:
      io::write_bytes(path, ingest::pdf::write_raster_pdf(doc.pages, dpi));
      break;
  }
  return path;
}

}  // namespace signet::synth

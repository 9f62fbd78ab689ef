#include "signet/ingest/ocr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "signet/ingest/font.hpp"

namespace signet::ingest {

namespace {

constexpr float kInkLevel = 0.5F;

struct Run {
  int begin;
  int end;  // exclusive
};

std::vector<Run> runs_of(const std::vector<int>& profile) {
  std::vector<Run> runs;
  int start = -1;
  for (int i = 0; i <= static_cast<int>(profile.size()); ++i) {
    const bool on = i < static_cast<int>(profile.size()) && profile[static_cast<std::size_t>(i)] > 0;
    if (on && start < 0) start = i;
    if (!on && start >= 0) {
      runs.push_back({start, i});
      start = -1;
    }
  }
  return runs;
}

// Glyph bitmap with blank columns trimmed from both sides.
struct Template {
  char ch;
  int width;
  std::vector<bool> cells;  // row-major, width x kGlyphRows
};

const std::vector<Template>& templates() {
  static const std::vector<Template> table = [] {
    std::vector<Template> out;
    for (const auto& g : glyph_table()) {
      int lo = kGlyphCols;
      int hi = -1;
      for (int c = 0; c < kGlyphCols; ++c) {
        for (int r = 0; r < kGlyphRows; ++r) {
          if (g.ink(c, r)) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
          }
        }
      }
      Template t{g.ch, hi - lo + 1, {}};
      for (int r = 0; r < kGlyphRows; ++r) {
        for (int c = lo; c <= hi; ++c) t.cells.push_back(g.ink(c, r));
      }
      out.push_back(std::move(t));
    }
    return out;
  }();
  return table;
}

char match_glyph(const GrayGrid& px, int x0, int top, int cols, int scale) {
  const Template* best = nullptr;
  int best_dist = 0;
  for (const auto& t : templates()) {
    if (t.width != cols) continue;
    int dist = 0;
    for (int r = 0; r < kGlyphRows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const int sx = x0 + c * scale + scale / 2;
        const int sy = top + r * scale + scale / 2;
        const bool ink = px.contains(sx, sy) && px(sx, sy) < kInkLevel;
        dist += ink != t.cells[static_cast<std::size_t>(r * cols + c)] ? 1 : 0;
      }
    }
    if (best == nullptr || dist < best_dist) {
      best = &t;
      best_dist = dist;
    }
  }
  if (best == nullptr || best_dist * 4 > cols * kGlyphRows) return '?';
  return best->ch;
}

}  // namespace

std::string GlyphOcr::extract_text(const PageImage& page) {
  const GrayGrid& px = page.pixels;
  std::vector<int> rows(static_cast<std::size_t>(px.height()), 0);
  for (int y = 0; y < px.height(); ++y) {
    for (int x = 0; x < px.width(); ++x) rows[static_cast<std::size_t>(y)] += px(x, y) < kInkLevel;
  }

  std::string text;
  for (const Run& band : runs_of(rows)) {
    const int h = band.end - band.begin;
    const int scale = static_cast<int>(std::lround(h / static_cast<double>(kGlyphRows)));
    if (scale < 1 || h != scale * kGlyphRows) continue;

    std::vector<int> cols(static_cast<std::size_t>(px.width()), 0);
    for (int y = band.begin; y < band.end; ++y) {
      for (int x = 0; x < px.width(); ++x) cols[static_cast<std::size_t>(x)] += px(x, y) < kInkLevel;
    }
    std::string line;
    int prev_end = -1;
    for (const Run& glyph : runs_of(cols)) {
      if (prev_end >= 0 && glyph.begin - prev_end >= 6 * scale) line += ' ';
      const int n_cols = static_cast<int>(std::lround((glyph.end - glyph.begin) / double(scale)));
      line += n_cols >= 1 && n_cols <= kGlyphCols
                  ? match_glyph(px, glyph.begin, band.begin, n_cols, scale)
                  : '?';
      prev_end = glyph.end;
    }
    if (!line.empty()) {
      if (!text.empty()) text += '\n';
      text += line;
    }
  }
  return text;
}

std::string SidecarOcr::extract_text(const PageImage& page) {
  for (const auto& name : {page.doc_id + ".p" + std::to_string(page.page_index) + ".txt",
                           page.doc_id + ".txt"}) {
    std::ifstream in(root_ / name);
    if (in) {
      std::stringstream ss;
      ss << in.rdbuf();
      return ss.str();
    }
  }
  return {};
}

std::unique_ptr<OcrEngine> make_ocr_engine(const std::string& name,
                                           const std::filesystem::path& source_root) {
  if (name == "glyph") return std::make_unique<GlyphOcr>();
  if (name == "sidecar") return std::make_unique<SidecarOcr>(source_root);
  if (name == "none") return std::make_unique<NullOcr>();
  throw InvalidInput("unknown OCR engine '" + name + "'");
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c) != 0) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

GateDecision gate_text(std::string text, std::span<const std::string> keywords) {
  GateDecision d;
  const std::string haystack = normalize_text(text);
  d.ocr_text = std::move(text);
  for (const auto& kw : keywords) {
    const std::string needle = normalize_text(kw);
    if (!needle.empty() && haystack.find(needle) != std::string::npos) {
      d.accepted = false;
      d.matched_keyword = kw;
      break;
    }
  }
  return d;
}

GateDecision ocr_gate(const PageImage& page, std::span<const std::string> keywords,
                      OcrEngine& engine) {
  std::string text;
  try {
    text = engine.extract_text(page);
  } catch (const std::exception& e) {
    spdlog::warn("OCR failed on {} page {}: {}; accepting page", page.doc_id, page.page_index,
                 e.what());
    return GateDecision{};
  }
  return gate_text(std::move(text), keywords);
}

}  // namespace signet::ingest

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "signet/core/types.hpp"

namespace signet::ingest {

/// Page to text. Implementations may throw; the gate treats that as "no text".
class OcrEngine {
 public:
  virtual ~OcrEngine() = default;
  virtual std::string extract_text(const PageImage& page) = 0;
};

/// Template-matching reader for pages typeset in the bundled 5x7 glyph font
/// at any integer scale. Lines are found by row projection and characters by
/// column projection; bands whose height is not a whole glyph are skipped.
class GlyphOcr final : public OcrEngine {
 public:
  std::string extract_text(const PageImage& page) override;
};

/// Reads pre-extracted text from `<root>/<doc_id>.p<page>.txt`, falling back
/// to `<root>/<doc_id>.txt`. Missing files yield empty text.
class SidecarOcr final : public OcrEngine {
 public:
  explicit SidecarOcr(std::filesystem::path root) : root_(std::move(root)) {}
  std::string extract_text(const PageImage& page) override;

 private:
  std::filesystem::path root_;
};

class NullOcr final : public OcrEngine {
 public:
  std::string extract_text(const PageImage&) override { return {}; }
};

/// Builds the engine named in the config ("glyph", "sidecar", "none").
std::unique_ptr<OcrEngine> make_ocr_engine(const std::string& name,
                                           const std::filesystem::path& source_root);

struct GateDecision {
  bool accepted = true;
  std::optional<std::string> matched_keyword;
  std::string ocr_text;
};

/// Lower-cases and collapses whitespace runs to single spaces.
std::string normalize_text(std::string_view text);

/// Pure keyword decision: rejected iff a keyword occurs in the normalized text.
GateDecision gate_text(std::string text, std::span<const std::string> keywords);

/// Runs OCR and applies gate_text. OCR failures are logged and the page is
/// accepted.
GateDecision ocr_gate(const PageImage& page, std::span<const std::string> keywords,
                      OcrEngine& engine);

}  // namespace signet::ingest

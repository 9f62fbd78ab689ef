#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "signet/core/types.hpp"

// Procedural test data: parametric "authors" whose signatures vary per
// instance, stamps, printed clutter and whole form pages with ground truth.

namespace signet::synth {

struct Stroke {
  std::vector<std::array<double, 2>> points;  // unit box, y down
};

struct AuthorStyle {
  std::vector<Stroke> strokes;
  double aspect = 3.0;        // width / height of the signature box
  double pen_ratio = 0.012;   // pen radius as a fraction of the box width
  double slant = 0.0;         // shear x += slant * (0.5 - y)
};

AuthorStyle make_author(std::uint64_t seed);

/// One handwritten instance, `width` pixels wide, white background.
GrayGrid render_signature(const AuthorStyle& author, std::uint64_t instance_seed, int width);

/// Tight box around pixels darker than `level`; empty_bbox() if none.
BBox ink_bbox(const GrayGrid& g, float level = 0.5F);

/// Instance cropped to its ink and normalized to the canvas, as extraction would.
SignatureImage signature_canvas(const AuthorStyle& author, std::uint64_t instance_seed, int width = 300);

/// Rectangular or elliptical stamp outline with text, on white.
GrayGrid render_stamp(std::uint64_t seed, int width, int height);

/// Multiplies `src` onto `dst` with its top-left corner at (x, y).
void overlay(GrayGrid& dst, const GrayGrid& src, int x, int y);

/// `clean` with a stamp printed across it.
SignatureImage stamped(const SignatureImage& clean, std::uint64_t seed);

/// clean[i] is a signature by one of `authors` writers; stamped[i] is the
/// same canvas with a stamp laid over it.
struct StampSet {
  std::vector<SignatureImage> clean;
  std::vector<SignatureImage> stamped;
};
StampSet stamp_set(int count, std::uint64_t seed, int authors = 4);

/// Canvas-sized non-signature crop: printed text, stamp, logo block or ruled table.
SignatureImage clutter_canvas(std::uint64_t seed);

/// Random upper-case words.
std::string random_words(std::uint64_t seed, int words);

struct PlacedSignature {
  BBox bbox;
  int author = 0;
};

struct SyntheticDocument {
  std::string doc_id;
  std::vector<GrayGrid> pages;
  std::vector<std::vector<PlacedSignature>> signatures;  // per page
};

struct DocumentOptions {
  int width = 850;
  int height = 1100;
  int pages = 1;
  bool filed_notice = false;  // print "ELECTRONICALLY FILED" in the footer
};

/// Form page(s) with printed text and one signature per entry of
/// `signers` (author indices into `authors`), spread over the pages.
SyntheticDocument make_document(const std::string& doc_id, const std::vector<AuthorStyle>& authors,
                                const std::vector<int>& signers, std::uint64_t seed,
                                const DocumentOptions& options = {});

enum class FileKind { kPng, kTiff, kPdf };

/// Writes the document under root/<doc_id> in the given container.
std::filesystem::path write_document(const SyntheticDocument& doc, const std::filesystem::path& root,
                                     FileKind kind, int dpi = 100);

}  // namespace signet::synth

#include "signet/ingest/source.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>

#include <spdlog/spdlog.h>

#include "signet/core/canvas.hpp"
#include "signet/ingest/pdf.hpp"
#include "signet/util/image_io.hpp"

namespace signet::ingest {

namespace fs = std::filesystem;

namespace {

std::optional<DocumentFormat> format_of(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".pdf") return DocumentFormat::kPdf;
  if (ext == ".tif" || ext == ".tiff") return DocumentFormat::kTiff;
  if (ext == ".png") return DocumentFormat::kPng;
  if (ext == ".jpg" || ext == ".jpeg") return DocumentFormat::kJpeg;
  return std::nullopt;
}

}  // namespace

std::vector<DocumentRef> DirectorySource::list() const {
  std::error_code ec;
  if (!fs::is_directory(root_, ec)) {
    throw SourceError("document source is not a readable directory: " + root_.string());
  }
  std::vector<DocumentRef> docs;
  fs::recursive_directory_iterator it(root_, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw SourceError("cannot read " + root_.string() + ": " + ec.message());
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) throw SourceError("cannot read " + root_.string() + ": " + ec.message());
    if (!it->is_regular_file()) continue;
    const fs::path rel = fs::relative(it->path(), root_);
    if (auto fmt = format_of(it->path())) {
      docs.push_back({rel.generic_string(), fs::absolute(it->path()).string(), *fmt});
    } else {
      spdlog::info("skipping unsupported file {}", rel.generic_string());
    }
  }
  std::sort(docs.begin(), docs.end(),
            [](const DocumentRef& a, const DocumentRef& b) { return a.doc_id < b.doc_id; });
  return docs;
}

std::vector<DocumentRef> list_documents(const fs::path& source_root) {
  return DirectorySource(source_root).list();
}

std::vector<PageImage> render_pages(const DocumentRef& doc, int dpi) {
  if (dpi <= 0) throw InvalidInput("dpi must be positive");
  std::vector<GrayGrid> grids;
  try {
    switch (doc.format) {
      case DocumentFormat::kPdf: {
        const auto bytes = io::read_bytes(doc.uri);
        for (auto& page : pdf::read_raster_pdf(bytes)) {
          GrayGrid g = std::move(page.pixels);
          if (page.width_pt > 0 && page.height_pt > 0) {
            const int w = std::max(1, static_cast<int>(std::lround(page.width_pt / 72.0 * dpi)));
            const int h = std::max(1, static_cast<int>(std::lround(page.height_pt / 72.0 * dpi)));
            g = resample_area(g, w, h);
          }
          grids.push_back(std::move(g));
        }
        break;
      }
      case DocumentFormat::kTiff:
        grids = io::read_gray_pages(doc.uri);
        break;
      case DocumentFormat::kPng:
      case DocumentFormat::kJpeg: {
        GrayGrid g = io::decode_gray(io::read_bytes(doc.uri));
        if (!g.empty()) grids.push_back(std::move(g));
        break;
      }
    }
  } catch (const pdf::PdfError& e) {
    throw DecodeError(doc.doc_id, e.what());
  } catch (const InvalidInput& e) {
    throw DecodeError(doc.doc_id, e.what());
  }
  if (grids.empty()) throw DecodeError(doc.doc_id, "no decodable pages");

  std::vector<PageImage> pages;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    pages.push_back(PageImage{doc.doc_id, static_cast<int>(i), std::move(grids[i]), dpi});
  }
  return pages;
}

}  // namespace signet::ingest

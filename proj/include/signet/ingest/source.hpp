#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "signet/core/types.hpp"

namespace signet::ingest {

enum class DocumentFormat { kPdf, kTiff, kPng, kJpeg };

struct DocumentRef {
  std::string doc_id;  // path relative to the source root, '/' separated
  std::string uri;     // absolute location
  DocumentFormat format = DocumentFormat::kPng;

  friend bool operator==(const DocumentRef&, const DocumentRef&) = default;
};

/// Pluggable supplier of documents.
class DocumentSource {
 public:
  virtual ~DocumentSource() = default;
  virtual std::vector<DocumentRef> list() const = 0;
};

/// One document per file below a root directory. Files with unsupported
/// extensions are skipped with a log line.
class DirectorySource final : public DocumentSource {
 public:
  explicit DirectorySource(std::filesystem::path root) : root_(std::move(root)) {}
  std::vector<DocumentRef> list() const override;
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
};

/// Every supported document under `source_root`, sorted by doc_id.
/// Throws SourceError when the root is missing or unreadable.
std::vector<DocumentRef> list_documents(const std::filesystem::path& source_root);

/// Renders each page as grayscale at `dpi`. PDF pages are resampled from their
/// page size; raster files are taken as scanned at `dpi`. Page indices run
/// from 0. Throws DecodeError carrying the doc_id on corrupt input.
std::vector<PageImage> render_pages(const DocumentRef& doc, int dpi);

}  // namespace signet::ingest

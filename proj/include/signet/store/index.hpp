#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "signet/core/types.hpp"

namespace signet::embed {
class EncoderModel;
}

namespace signet::store {

inline constexpr std::uint16_t kIndexVersion = 1;
inline constexpr std::size_t kIndexHeaderBytes = 10;  // "SGNT", u16 version, u32 count

/// An embedding as 8-bit affine codes: value_i ~ offset + scale * codes[i].
struct EmbeddingRecord {
  std::string signature_id;  // format_signature_id of the source region
  double scale = 0.0;
  double offset = 0.0;
  std::vector<std::uint8_t> codes;

  Vector dequantize() const;
  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// offset = min, scale = (max - min) / 255, codes rounded to nearest.
EmbeddingRecord quantize(const Embedding& e);

/// Bytes one record occupies on disk.
std::size_t record_bytes(const EmbeddingRecord& r) noexcept;
/// Exact size of the file save_index writes.
std::size_t index_bytes(std::span<const EmbeddingRecord> records) noexcept;

std::vector<std::uint8_t> encode_index(std::span<const EmbeddingRecord> records);
/// FormatError on bad magic or version, CorruptIndexError on truncation or
/// trailing bytes; never returns a partial record list.
std::vector<EmbeddingRecord> decode_index(std::span<const std::uint8_t> bytes);

/// Writes through a temporary file and renames it into place.
void save_index(std::span<const EmbeddingRecord> records, const std::filesystem::path& path);
std::vector<EmbeddingRecord> load_index(const std::filesystem::path& path);

/// Gzip copy of a file, for archival next to the uncompressed index.
void gzip_file(const std::filesystem::path& src, const std::filesystem::path& dst);

struct SearchHit {
  std::string signature_id;
  double distance = 0.0;
  int rank = 0;
};

/// Every record within cosine distance t of the query, nearest first
/// (ties by index position).
std::vector<SearchHit> search(std::span<const float> query, std::span<const EmbeddingRecord> index, double t);
std::vector<SearchHit> search(const SignatureImage& query, std::span<const EmbeddingRecord> index,
                              const embed::EncoderModel& encoder, double t);

}  // namespace signet::store

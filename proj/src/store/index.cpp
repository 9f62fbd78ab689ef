#include "signet/store/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <zlib.h>

#include "signet/cluster/cluster.hpp"
#include "signet/core/errors.hpp"
#include "signet/embed/embed.hpp"
#include "signet/util/binary.hpp"
#include "signet/util/image_io.hpp"

namespace signet::store {

namespace {

constexpr std::string_view kMagic = "SGNT";

}  // namespace

Vector EmbeddingRecord::dequantize() const {
  Vector v(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    v[i] = static_cast<float>(offset + scale * static_cast<double>(codes[i]));
  }
  return v;
}

EmbeddingRecord quantize(const Embedding& e) {
  const Vector& v = e.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  EmbeddingRecord r;
  r.signature_id = e.signature_id();
  r.offset = *lo;
  r.scale = (static_cast<double>(*hi) - static_cast<double>(*lo)) / 255.0;
  r.codes.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double q = r.scale > 0.0 ? std::round((static_cast<double>(v[i]) - r.offset) / r.scale) : 0.0;
    r.codes[i] = static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
  }
  return r;
}

std::size_t record_bytes(const EmbeddingRecord& r) noexcept {
  return 2 + r.signature_id.size() + 16 + static_cast<std::size_t>(kEmbeddingDim);
}

std::size_t index_bytes(std::span<const EmbeddingRecord> records) noexcept {
  std::size_t n = kIndexHeaderBytes;
  for (const auto& r : records) n += record_bytes(r);
  return n;
}

std::vector<std::uint8_t> encode_index(std::span<const EmbeddingRecord> records) {
  if (records.size() > 0xffffffffULL) throw StoreError("too many records for one index");
  binary::Writer w;
  w.bytes().reserve(index_bytes(records));
  w.raw(kMagic);
  w.u16(kIndexVersion);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    if (r.signature_id.size() > 0xffff) throw StoreError("signature id longer than 65535 bytes");
    if (r.codes.size() != static_cast<std::size_t>(kEmbeddingDim)) throw StoreError("record must hold 4096 codes");
    w.u16(static_cast<std::uint16_t>(r.signature_id.size()));
    w.raw(r.signature_id);
    w.f64(r.scale);
    w.f64(r.offset);
    w.raw(r.codes);
  }
  return std::move(w.bytes());
}

std::vector<EmbeddingRecord> decode_index(std::span<const std::uint8_t> bytes) {
  binary::Reader rd(bytes);
  const std::string magic = rd.str(4);
  if (!rd.ok()) throw CorruptIndexError("index shorter than its header");
  if (magic != kMagic) throw FormatError("not a signature index (bad magic)");
  const std::uint16_t version = rd.u16();
  const std::uint32_t count = rd.u32();
  if (!rd.ok()) throw CorruptIndexError("index shorter than its header");
  if (version != kIndexVersion) throw FormatError("unsupported index version " + std::to_string(version));
  std::vector<EmbeddingRecord> out;
  out.reserve(std::min<std::size_t>(count, bytes.size() / (18 + kEmbeddingDim) + 1));
  for (std::uint32_t i = 0; i < count; ++i) {
    EmbeddingRecord r;
    const std::uint16_t len = rd.u16();
    r.signature_id = rd.str(len);
    r.scale = rd.f64();
    r.offset = rd.f64();
    const auto codes = rd.span(static_cast<std::size_t>(kEmbeddingDim));
    if (!rd.ok()) throw CorruptIndexError("index truncated in record " + std::to_string(i));
    r.codes.assign(codes.begin(), codes.end());
    out.push_back(std::move(r));
  }
  if (rd.remaining() != 0) throw CorruptIndexError("trailing bytes after the last record");
  return out;
}

void save_index(std::span<const EmbeddingRecord> records, const std::filesystem::path& path) {
  const auto bytes = encode_index(records);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  try {
    io::write_bytes(tmp, bytes);
    std::filesystem::rename(tmp, path);
  } catch (const std::exception& e) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw StoreError("cannot write index " + path.string() + ": " + e.what());
  }
}

std::vector<EmbeddingRecord> load_index(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw StoreError("index not found: " + path.string());
  return decode_index(io::read_bytes(path));
}

void gzip_file(const std::filesystem::path& src, const std::filesystem::path& dst) {
  const auto bytes = io::read_bytes(src);
  gzFile f = gzopen(dst.string().c_str(), "wb9");
  if (f == nullptr) throw StoreError("cannot open " + dst.string());
  const int written = bytes.empty() ? 0 : gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  const int closed = gzclose(f);
  if (written != static_cast<int>(bytes.size()) || closed != Z_OK) throw StoreError("gzip failed for " + dst.string());
}

std::vector<SearchHit> search(std::span<const float> query, std::span<const EmbeddingRecord> index, double t) {
  std::vector<SearchHit> hits;
  for (const auto& r : index) {
    const Vector v = r.dequantize();
    const double d = cluster::cosine_distance(query, v);
    if (d <= t) hits.push_back({r.signature_id, d, 0});
  }
  std::stable_sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) { return a.distance < b.distance; });
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = static_cast<int>(i);
  return hits;
}

std::vector<SearchHit> search(const SignatureImage& query, std::span<const EmbeddingRecord> index,
                              const embed::EncoderModel& encoder, double t) {
  if (index.empty()) return {};
  const Embedding e = embed::embed(encoder, query);
  return search(e.values(), index, t);
}

}  // namespace signet::store

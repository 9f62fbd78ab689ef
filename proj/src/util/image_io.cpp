#include "signet/util/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace signet::io {

namespace {

GrayGrid from_mat(const cv::Mat& input) {
  if (input.empty()) return {};
  cv::Mat gray;
  if (input.channels() == 3) {
    cv::cvtColor(input, gray, cv::COLOR_BGR2GRAY);
  } else if (input.channels() == 4) {
    cv::cvtColor(input, gray, cv::COLOR_BGRA2GRAY);
  } else {
    gray = input;
  }
  cv::Mat f;
  const double scale = gray.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  gray.convertTo(f, CV_32F, scale);
  GrayGrid out(f.cols, f.rows);
  for (int y = 0; y < f.rows; ++y) {
    const float* row = f.ptr<float>(y);
    for (int x = 0; x < f.cols; ++x) out(x, y) = std::clamp(row[x], 0.0F, 1.0F);
  }
  return out;
}

cv::Mat to_mat(const GrayGrid& grid) {
  cv::Mat m(grid.height(), grid.width(), CV_8UC1);
  for (int y = 0; y < grid.height(); ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < grid.width(); ++x) row[x] = to_byte(grid(x, y));
  }
  return m;
}

}  // namespace

std::uint8_t to_byte(float v) noexcept {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0F, 1.0F) * 255.0F));
}

GrayGrid decode_gray(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) return {};
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1,
              const_cast<std::uint8_t*>(bytes.data()));
  return from_mat(cv::imdecode(buf, cv::IMREAD_UNCHANGED));
}

std::vector<GrayGrid> read_gray_pages(const std::filesystem::path& path) {
  std::vector<cv::Mat> mats;
  std::vector<GrayGrid> pages;
  try {
    if (!cv::imreadmulti(path.string(), mats, cv::IMREAD_UNCHANGED)) return pages;
  } catch (const cv::Exception&) {
    return pages;
  }
  for (const auto& m : mats) {
    auto g = from_mat(m);
    if (!g.empty()) pages.push_back(std::move(g));
  }
  return pages;
}

GrayGrid read_gray(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  auto g = decode_gray(bytes);
  if (g.empty()) throw InvalidInput("not a decodable image: " + path.string());
  return g;
}

std::vector<std::uint8_t> encode_png(const GrayGrid& grid) {
  std::vector<std::uint8_t> out;
  // Fixed compression level keeps the encoded bytes reproducible.
  cv::imencode(".png", to_mat(grid), out, {cv::IMWRITE_PNG_COMPRESSION, 6});
  return out;
}

void write_png(const std::filesystem::path& path, const GrayGrid& grid) {
  write_bytes(path, encode_png(grid));
}

void write_tiff(const std::filesystem::path& path, std::span<const GrayGrid> pages) {
  std::vector<cv::Mat> mats;
  for (const auto& p : pages) mats.push_back(to_mat(p));
  if (!cv::imwrite(path.string(), mats)) throw InvalidInput("cannot write " + path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("short write to " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace signet::io

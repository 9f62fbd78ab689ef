#include "signet/ingest/pdf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <zlib.h>

#include "signet/util/image_io.hpp"

namespace signet::ingest::pdf {

namespace {

struct Object;
using Dict = std::map<std::string, Object>;
using Array = std::vector<Object>;

struct Name {
  std::string value;
};
struct String {
  std::string value;
};
struct Ref {
  int num = 0;
  int gen = 0;
};
struct Stream {
  Dict dict;
  std::vector<std::uint8_t> data;
};

struct Object {
  std::variant<std::monostate, bool, double, Name, String, Ref, std::shared_ptr<Array>,
               std::shared_ptr<Dict>, std::shared_ptr<Stream>>
      value;

  bool is_null() const { return std::holds_alternative<std::monostate>(value); }
  const double* number() const { return std::get_if<double>(&value); }
  const Name* name() const { return std::get_if<Name>(&value); }
  const Ref* ref() const { return std::get_if<Ref>(&value); }
  const Array* array() const {
    auto p = std::get_if<std::shared_ptr<Array>>(&value);
    return p ? p->get() : nullptr;
  }
  const Dict* dict() const {
    if (auto p = std::get_if<std::shared_ptr<Dict>>(&value)) return p->get();
    if (auto s = std::get_if<std::shared_ptr<Stream>>(&value)) return &(*s)->dict;
    return nullptr;
  }
  const Stream* stream() const {
    auto p = std::get_if<std::shared_ptr<Stream>>(&value);
    return p ? p->get() : nullptr;
  }
};

bool is_space(std::uint8_t c) {
  return c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == 0;
}
bool is_delim(std::uint8_t c) {
  return std::strchr("()<>[]{}/%", c) != nullptr && c != 0;
}

class Parser {
 public:
  explicit Parser(std::span<const std::uint8_t> bytes) : buf_(bytes) {}

  void parse_file() {
    if (buf_.size() < 5 || std::memcmp(buf_.data(), "%PDF-", 5) != 0) {
      throw PdfError("missing %PDF header");
    }
    while (true) {
      skip_ws();
      if (pos_ >= buf_.size()) break;
      if (peek_keyword("xref")) {
        skip_xref();
      } else if (peek_keyword("trailer")) {
        pos_ += 7;
        Object t = parse_object();
        if (const Dict* d = t.dict()) {
          for (const auto& [k, v] : *d) trailer_.try_emplace(k, v);
        }
      } else if (peek_keyword("startxref")) {
        pos_ += 9;
        parse_object();
      } else {
        parse_indirect();
      }
    }
  }

  const Object& resolve(const Object& o, int depth = 0) const {
    static const Object kNull{};
    if (const Ref* r = o.ref()) {
      if (depth > 32) throw PdfError("reference cycle");
      auto it = objects_.find(r->num);
      return it == objects_.end() ? kNull : resolve(it->second, depth + 1);
    }
    return o;
  }

  const Object* lookup(const Dict& d, const std::string& key) const {
    auto it = d.find(key);
    if (it == d.end()) return nullptr;
    const Object& o = resolve(it->second);
    return o.is_null() ? nullptr : &o;
  }

  std::optional<Object> root() const {
    if (auto it = trailer_.find("Root"); it != trailer_.end()) return resolve(it->second);
    for (const auto& [num, obj] : objects_) {
      const Dict* d = obj.dict();
      if (d == nullptr) continue;
      if (auto t = lookup(*d, "Type"); t && t->name() && t->name()->value == "Catalog") {
        return obj;
      }
    }
    return std::nullopt;
  }

 private:
  bool peek_keyword(const char* kw) const {
    const std::size_t n = std::strlen(kw);
    return pos_ + n <= buf_.size() && std::memcmp(buf_.data() + pos_, kw, n) == 0 &&
           (pos_ + n == buf_.size() || is_space(buf_[pos_ + n]) || is_delim(buf_[pos_ + n]));
  }

  void skip_ws() {
    while (pos_ < buf_.size()) {
      if (is_space(buf_[pos_])) {
        ++pos_;
      } else if (buf_[pos_] == '%') {
        while (pos_ < buf_.size() && buf_[pos_] != '\n' && buf_[pos_] != '\r') ++pos_;
      } else {
        break;
      }
    }
  }

  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw PdfError("unexpected end of file");
  }

  std::string read_token() {
    skip_ws();
    std::string tok;
    while (pos_ < buf_.size() && !is_space(buf_[pos_]) && !is_delim(buf_[pos_])) {
      tok += static_cast<char>(buf_[pos_++]);
    }
    return tok;
  }

  void skip_xref() {
    pos_ += 4;
    while (true) {
      skip_ws();
      need(1);
      if (peek_keyword("trailer")) return;
      read_token();
    }
  }

  void parse_indirect() {
    const std::string num = read_token();
    const std::string gen = read_token();
    const std::string kw = read_token();
    if (num.empty() || gen.empty() || kw != "obj") throw PdfError("expected indirect object");
    Object obj = parse_object();
    skip_ws();
    if (peek_keyword("stream")) {
      pos_ += 6;
      if (pos_ < buf_.size() && buf_[pos_] == '\r') ++pos_;
      if (pos_ < buf_.size() && buf_[pos_] == '\n') ++pos_;
      const Dict* d = obj.dict();
      if (d == nullptr) throw PdfError("stream without dictionary");
      auto s = std::make_shared<Stream>();
      s->dict = *d;
      std::size_t len = 0;
      const Object* len_obj = lookup(*d, "Length");
      if (len_obj != nullptr && len_obj->number() != nullptr) {
        len = static_cast<std::size_t>(*len_obj->number());
      } else {
        const char* marker = "endstream";
        auto it = std::search(buf_.begin() + static_cast<std::ptrdiff_t>(pos_), buf_.end(),
                              marker, marker + 9);
        if (it == buf_.end()) throw PdfError("unterminated stream");
        len = static_cast<std::size_t>(it - buf_.begin()) - pos_;
        while (len > 0 && (buf_[pos_ + len - 1] == '\n' || buf_[pos_ + len - 1] == '\r')) --len;
      }
      need(len);
      s->data.assign(buf_.begin() + static_cast<std::ptrdiff_t>(pos_),
                     buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
      pos_ += len;
      skip_ws();
      if (!peek_keyword("endstream")) throw PdfError("missing endstream");
      pos_ += 9;
      obj.value = s;
    }
    skip_ws();
    if (!peek_keyword("endobj")) throw PdfError("missing endobj");
    pos_ += 6;
    objects_[std::stoi(num)] = std::move(obj);
  }

  Object parse_object() {
    skip_ws();
    need(1);
    const std::uint8_t c = buf_[pos_];
    if (c == '<' && pos_ + 1 < buf_.size() && buf_[pos_ + 1] == '<') {
      pos_ += 2;
      auto d = std::make_shared<Dict>();
      while (true) {
        skip_ws();
        need(2);
        if (buf_[pos_] == '>' && buf_[pos_ + 1] == '>') {
          pos_ += 2;
          break;
        }
        Object key = parse_object();
        if (key.name() == nullptr) throw PdfError("dictionary key is not a name");
        (*d)[key.name()->value] = parse_object();
      }
      return Object{d};
    }
    if (c == '<') {
      ++pos_;
      std::string hex;
      while (true) {
        need(1);
        if (buf_[pos_] == '>') break;
        hex += static_cast<char>(buf_[pos_++]);
      }
      ++pos_;
      return Object{String{hex}};
    }
    if (c == '[') {
      ++pos_;
      auto a = std::make_shared<Array>();
      while (true) {
        skip_ws();
        need(1);
        if (buf_[pos_] == ']') {
          ++pos_;
          break;
        }
        a->push_back(parse_object());
      }
      return Object{a};
    }
    if (c == '(') {
      ++pos_;
      int depth = 1;
      std::string s;
      while (depth > 0) {
        need(1);
        const std::uint8_t ch = buf_[pos_++];
        if (ch == '\\') {
          need(1);
          s += static_cast<char>(buf_[pos_++]);
          continue;
        }
        if (ch == '(') ++depth;
        if (ch == ')' && --depth == 0) break;
        s += static_cast<char>(ch);
      }
      return Object{String{s}};
    }
    if (c == '/') {
      ++pos_;
      std::string n;
      while (pos_ < buf_.size() && !is_space(buf_[pos_]) && !is_delim(buf_[pos_])) {
        n += static_cast<char>(buf_[pos_++]);
      }
      return Object{Name{n}};
    }
    const std::string tok = read_token();
    if (tok.empty()) throw PdfError("unexpected character in object");
    if (tok == "true") return Object{true};
    if (tok == "false") return Object{false};
    if (tok == "null") return Object{};
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw PdfError("bad token '" + tok + "'");
    // "num gen R" is a reference.
    const std::size_t save = pos_;
    const bool integral = tok.find_first_of(".eE") == std::string::npos;
    if (integral) {
      const std::string gen = read_token();
      const std::string r = read_token();
      if (!gen.empty() && r == "R" && gen.find_first_not_of("0123456789") == std::string::npos) {
        return Object{Ref{static_cast<int>(v), std::stoi(gen)}};
      }
    }
    pos_ = save;
    return Object{v};
  }

  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::map<int, Object> objects_;
  Dict trailer_;
};

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> in) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw PdfError("zlib init failed");
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 15];
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof chunk;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw PdfError("corrupt Flate stream");
    }
    out.insert(out.end(), chunk, chunk + (sizeof chunk - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw PdfError("truncated Flate stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

// Undo PNG row predictors (Predictor >= 10).
std::vector<std::uint8_t> unpredict_png(const std::vector<std::uint8_t>& in, int colors,
                                        int bpc, int columns) {
  const int bpp = std::max(1, colors * bpc / 8);
  const std::size_t row_len = (static_cast<std::size_t>(columns) * colors * bpc + 7) / 8;
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> prev(row_len, 0);
  for (std::size_t off = 0; off + row_len + 1 <= in.size(); off += row_len + 1) {
    const int type = in[off];
    std::vector<std::uint8_t> row(in.begin() + static_cast<std::ptrdiff_t>(off + 1),
                                  in.begin() + static_cast<std::ptrdiff_t>(off + 1 + row_len));
    for (std::size_t i = 0; i < row_len; ++i) {
      const int a = i >= static_cast<std::size_t>(bpp) ? row[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
      int pred = 0;
      switch (type) {
        case 0: pred = 0; break;
        case 1: pred = a; break;
        case 2: pred = b; break;
        case 3: pred = (a + b) / 2; break;
        case 4: {
          const int p = a + b - c;
          const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
          pred = (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
          break;
        }
        default: throw PdfError("unknown PNG predictor");
      }
      row[i] = static_cast<std::uint8_t>(row[i] + pred);
    }
    out.insert(out.end(), row.begin(), row.end());
    prev = std::move(row);
  }
  return out;
}

class PageWalker {
 public:
  explicit PageWalker(const Parser& p) : p_(p) {}

  std::vector<RasterPage> walk(const Object& root) {
    const Dict* cat = root.dict();
    if (cat == nullptr) throw PdfError("catalog is not a dictionary");
    const Object* pages = p_.lookup(*cat, "Pages");
    if (pages == nullptr) throw PdfError("catalog has no page tree");
    visit(*pages, nullptr, nullptr, 0);
    if (out_.empty()) throw PdfError("document has no pages");
    return std::move(out_);
  }

 private:
  void visit(const Object& node, const Object* resources, const Object* media, int depth) {
    if (depth > 64) throw PdfError("page tree too deep");
    const Dict* d = node.dict();
    if (d == nullptr) throw PdfError("page tree node missing");
    if (const Object* r = p_.lookup(*d, "Resources")) resources = r;
    if (const Object* m = p_.lookup(*d, "MediaBox")) media = m;
    const Object* type = p_.lookup(*d, "Type");
    const bool is_pages = type != nullptr && type->name() && type->name()->value == "Pages";
    if (is_pages || p_.lookup(*d, "Kids") != nullptr) {
      const Object* kids = p_.lookup(*d, "Kids");
      if (kids == nullptr || kids->array() == nullptr) throw PdfError("Pages node without Kids");
      for (const Object& k : *kids->array()) visit(p_.resolve(k), resources, media, depth + 1);
      return;
    }
    out_.push_back(render_page(resources, media));
  }

  RasterPage render_page(const Object* resources, const Object* media) {
    RasterPage page;
    if (media != nullptr && media->array() != nullptr && media->array()->size() == 4) {
      std::array<double, 4> box{};
      for (std::size_t i = 0; i < 4; ++i) {
        const Object& v = p_.resolve((*media->array())[i]);
        if (v.number() == nullptr) throw PdfError("bad MediaBox");
        box[i] = *v.number();
      }
      page.width_pt = std::abs(box[2] - box[0]);
      page.height_pt = std::abs(box[3] - box[1]);
    }
    const Stream* best = nullptr;
    if (resources != nullptr && resources->dict() != nullptr) {
      if (const Object* xo = p_.lookup(*resources->dict(), "XObject"); xo && xo->dict()) {
        double best_area = -1;
        for (const auto& [name, ref] : *xo->dict()) {
          const Object& o = p_.resolve(ref);
          const Stream* s = o.stream();
          if (s == nullptr) continue;
          const Object* sub = p_.lookup(s->dict, "Subtype");
          if (sub == nullptr || !sub->name() || sub->name()->value != "Image") continue;
          const double area = number_or(s->dict, "Width", 0) * number_or(s->dict, "Height", 0);
          if (area > best_area) {
            best_area = area;
            best = s;
          }
        }
      }
    }
    if (best == nullptr) throw PdfError("page has no raster image");
    page.pixels = decode_image(*best);
    return page;
  }

  double number_or(const Dict& d, const std::string& key, double fallback) const {
    const Object* o = p_.lookup(d, key);
    return (o != nullptr && o->number() != nullptr) ? *o->number() : fallback;
  }

  GrayGrid decode_image(const Stream& s) const {
    const int width = static_cast<int>(number_or(s.dict, "Width", 0));
    const int height = static_cast<int>(number_or(s.dict, "Height", 0));
    if (width <= 0 || height <= 0) throw PdfError("image without dimensions");

    std::vector<std::string> filters;
    if (const Object* f = p_.lookup(s.dict, "Filter")) {
      if (f->name() != nullptr) filters.push_back(f->name()->value);
      if (f->array() != nullptr) {
        for (const auto& e : *f->array()) {
          if (e.name() != nullptr) filters.push_back(e.name()->value);
        }
      }
    }
    std::vector<std::uint8_t> data = s.data;
    for (const auto& f : filters) {
      if (f == "FlateDecode" || f == "Fl") {
        data = inflate_bytes(data);
        if (const Object* parms = p_.lookup(s.dict, "DecodeParms"); parms && parms->dict()) {
          const double pred = number_or(*parms->dict(), "Predictor", 1);
          if (pred >= 10) {
            data = unpredict_png(data, static_cast<int>(number_or(*parms->dict(), "Colors", 1)),
                                 static_cast<int>(number_or(*parms->dict(), "BitsPerComponent", 8)),
                                 static_cast<int>(number_or(*parms->dict(), "Columns", width)));
          }
        }
      } else if (f == "DCTDecode" || f == "DCT") {
        GrayGrid g = io::decode_gray(data);
        if (g.empty()) throw PdfError("corrupt JPEG image");
        return g;
      } else {
        throw PdfError("unsupported image filter " + f);
      }
    }

    int comps = 1;
    if (const Object* cs = p_.lookup(s.dict, "ColorSpace")) {
      std::string space;
      if (cs->name() != nullptr) space = cs->name()->value;
      if (cs->array() != nullptr && !cs->array()->empty()) {
        const Object& head = p_.resolve(cs->array()->front());
        if (head.name() != nullptr) space = head.name()->value;
        if (space == "ICCBased" && cs->array()->size() > 1) {
          const Object& icc = p_.resolve((*cs->array())[1]);
          if (icc.dict() != nullptr) comps = static_cast<int>(number_or(*icc.dict(), "N", 1));
        }
      }
      if (space == "DeviceRGB" || space == "CalRGB") comps = 3;
      if (space == "DeviceCMYK") comps = 4;
      if (space == "Indexed") throw PdfError("indexed colour images are not supported");
    }
    const int bpc = static_cast<int>(number_or(s.dict, "BitsPerComponent", 8));
    if (bpc != 8 && bpc != 1) throw PdfError("unsupported bits per component");
    if (bpc == 1 && comps != 1) throw PdfError("1-bit colour images are not supported");
    bool invert = false;
    if (const Object* dec = p_.lookup(s.dict, "Decode"); dec && dec->array() &&
                                                         dec->array()->size() >= 2) {
      const Object& lo = p_.resolve((*dec->array())[0]);
      invert = lo.number() != nullptr && *lo.number() == 1.0;
    }

    const std::size_t row_bytes = (static_cast<std::size_t>(width) * comps * bpc + 7) / 8;
    if (data.size() < row_bytes * static_cast<std::size_t>(height)) {
      throw PdfError("image data shorter than its dimensions");
    }
    GrayGrid g(width, height);
    for (int y = 0; y < height; ++y) {
      const std::uint8_t* row = data.data() + row_bytes * static_cast<std::size_t>(y);
      for (int x = 0; x < width; ++x) {
        double v = 0.0;
        if (bpc == 1) {
          v = ((row[x / 8] >> (7 - x % 8)) & 1U) ? 1.0 : 0.0;
        } else if (comps == 1) {
          v = row[x] / 255.0;
        } else if (comps == 3) {
          const std::uint8_t* p = row + 3 * x;
          v = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
        } else {
          const std::uint8_t* p = row + static_cast<std::ptrdiff_t>(comps) * x;
          const double k = p[3] / 255.0;
          const double r = (1 - p[0] / 255.0) * (1 - k);
          const double gg = (1 - p[1] / 255.0) * (1 - k);
          const double b = (1 - p[2] / 255.0) * (1 - k);
          v = 0.299 * r + 0.587 * gg + 0.114 * b;
        }
        if (invert) v = 1.0 - v;
        g(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
    return g;
  }

  const Parser& p_;
  std::vector<RasterPage> out_;
};

void append(std::vector<std::uint8_t>& out, const std::string& s) {
  out.insert(out.end(), s.begin(), s.end());
}

std::string fmt_pt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::vector<RasterPage> read_raster_pdf(std::span<const std::uint8_t> bytes) {
  Parser parser(bytes);
  parser.parse_file();
  const auto root = parser.root();
  if (!root) throw PdfError("no document catalog");
  return PageWalker(parser).walk(*root);
}

std::vector<std::uint8_t> write_raster_pdf(std::span<const GrayGrid> pages, int dpi) {
  if (dpi <= 0) throw InvalidInput("dpi must be positive");
  std::vector<std::uint8_t> out;
  std::vector<std::size_t> offsets;  // by object number - 1
  const auto begin_obj = [&](int num) {
    offsets.resize(std::max<std::size_t>(offsets.size(), static_cast<std::size_t>(num)));
    offsets[static_cast<std::size_t>(num - 1)] = out.size();
    append(out, std::to_string(num) + " 0 obj\n");
  };

  append(out, "%PDF-1.4\n%\xE2\xE3\xCF\xD3\n");
  begin_obj(1);
  append(out, "<< /Type /Catalog /Pages 2 0 R >>\nendobj\n");
  std::string kids;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    kids += std::to_string(3 + 3 * i) + " 0 R ";
  }
  begin_obj(2);
  append(out, "<< /Type /Pages /Kids [" + kids + "] /Count " + std::to_string(pages.size()) +
                  " >>\nendobj\n");

  for (std::size_t i = 0; i < pages.size(); ++i) {
    const GrayGrid& g = pages[i];
    const int base = static_cast<int>(3 + 3 * i);
    const std::string w_pt = fmt_pt(g.width() * 72.0 / dpi);
    const std::string h_pt = fmt_pt(g.height() * 72.0 / dpi);

    begin_obj(base);
    append(out, "<< /Type /Page /Parent 2 0 R /MediaBox [0 0 " + w_pt + " " + h_pt +
                    "] /Resources << /XObject << /Im0 " + std::to_string(base + 2) +
                    " 0 R >> >> /Contents " + std::to_string(base + 1) + " 0 R >>\nendobj\n");

    const std::string content = "q " + w_pt + " 0 0 " + h_pt + " 0 0 cm /Im0 Do Q\n";
    begin_obj(base + 1);
    append(out, "<< /Length " + std::to_string(content.size()) + " >>\nstream\n" + content +
                    "endstream\nendobj\n");

    std::vector<std::uint8_t> raw(g.size());
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) {
        raw[static_cast<std::size_t>(y) * g.width() + x] = io::to_byte(g(x, y));
      }
    }
    uLongf packed_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> packed(packed_len);
    if (compress2(packed.data(), &packed_len, raw.data(), static_cast<uLong>(raw.size()), 6) !=
        Z_OK) {
      throw InvalidInput("zlib compression failed");
    }
    packed.resize(packed_len);
    begin_obj(base + 2);
    append(out, "<< /Type /XObject /Subtype /Image /Width " + std::to_string(g.width()) +
                    " /Height " + std::to_string(g.height()) +
                    " /ColorSpace /DeviceGray /BitsPerComponent 8 /Filter /FlateDecode /Length " +
                    std::to_string(packed.size()) + " >>\nstream\n");
    out.insert(out.end(), packed.begin(), packed.end());
    append(out, "\nendstream\nendobj\n");
  }

  const std::size_t xref_at = out.size();
  append(out, "xref\n0 " + std::to_string(offsets.size() + 1) + "\n0000000000 65535 f \n");
  for (std::size_t off : offsets) {
    char line[32];
    std::snprintf(line, sizeof line, "%010zu 00000 n \n", off);
    append(out, line);
  }
  append(out, "trailer\n<< /Size " + std::to_string(offsets.size() + 1) +
                  " /Root 1 0 R >>\nstartxref\n" + std::to_string(xref_at) + "\n%%EOF\n");
  return out;
}

}  // namespace signet::ingest::pdf

#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "raster.hpp"

namespace psikit {

// Malformed persistent data. The message always names what failed and where;
// parsers never abort the process on bad input.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Locale-independent float formatting. %.17g round-trips doubles exactly.
inline std::string format_double(double v, const char* fmt = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw FormatError("bad numeric value: '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw FormatError("bad integer value: '" + s + "'");
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bytes
// ---------------------------------------------------------------------------

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  explicit ByteReader(const std::vector<std::uint8_t>& v) : ByteReader(v.data(), v.size()) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (n > remaining())
      throw FormatError(std::string("unexpected end of ") + what + ": expected " +
                        std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                        ", got " + std::to_string(remaining()));
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  std::uint8_t u8(const char* what) { return *take(1, what); }

  std::uint32_t u32_be(const char* what) {
    const std::uint8_t* p = take(4, what);
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
  }

  std::uint16_t u16_le(const char* what) {
    const std::uint8_t* p = take(2, what);
    return static_cast<std::uint16_t>(p[0] | (std::uint16_t(p[1]) << 8));
  }

  std::uint32_t u32_le(const char* what) {
    const std::uint8_t* p = take(4, what);
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
  }

  float f32_le(const char* what) {
    const std::uint32_t bits = u32_le(what);
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  std::vector<std::uint8_t> bytes;

  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16_le(std::uint16_t v) {
    bytes.push_back(static_cast<std::uint8_t>(v));
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32_le(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32_be(std::uint32_t v) {
    for (int i = 3; i >= 0; --i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32_le(float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    u32_le(bits);
  }
};

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t n,
                           std::uint32_t crc = 0xffffffffu) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, const void* data, std::size_t n) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path.string());
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& b) {
  write_file(path, b.data(), b.size());
}

inline void write_file(const std::filesystem::path& path, const std::string& s) {
  write_file(path, s.data(), s.size());
}

// ---------------------------------------------------------------------------
// IDX (MNIST container format). Multi-byte integers are big-endian.
// ---------------------------------------------------------------------------

inline constexpr std::uint8_t kIdxUnsignedByte = 0x08;

struct IdxImages {
  int count = 0, height = 0, width = 0;
  std::vector<std::uint8_t> data;  // count * height * width bytes

  GrayImage image(int i) const {
    GrayImage img(width, height);
    const std::size_t base = static_cast<std::size_t>(i) * height * width;
    for (std::size_t k = 0; k < img.pixels.size(); ++k)
      img.pixels[k] = static_cast<float>(data[base + k]) / 255.0f;
    return img;
  }
};

inline IdxImages read_idx_images(const std::uint8_t* data, std::size_t size) {
  ByteReader r(data, size);
  const std::uint8_t* magic = r.take(4, "IDX header");
  if (magic[0] != 0 || magic[1] != 0) throw FormatError("not IDX: bad magic prefix");
  if (magic[2] != kIdxUnsignedByte)
    throw FormatError("not IDX: unsupported dtype code " + std::to_string(magic[2]));
  if (magic[3] != 3) throw FormatError("not an image file: rank " + std::to_string(magic[3]));
  const std::uint64_t n = r.u32_be("IDX dims");
  const std::uint64_t h = r.u32_be("IDX dims");
  const std::uint64_t w = r.u32_be("IDX dims");
  if (n > (1u << 24) || h > 65535 || w > 65535)
    throw FormatError("IDX dims: implausibly large dimension");
  const std::uint64_t expected = n * h * w;
  if (r.remaining() != expected)
    throw FormatError("IDX payload: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(r.remaining()));
  if (h == 0 || w == 0 || n == 0) throw FormatError("IDX dims: zero-sized dimension");
  IdxImages out;
  out.count = static_cast<int>(n);
  out.height = static_cast<int>(h);
  out.width = static_cast<int>(w);
  const std::uint8_t* p = r.take(expected, "IDX payload");
  out.data.assign(p, p + expected);
  return out;
}

inline IdxImages read_idx_images(const std::vector<std::uint8_t>& bytes) {
  return read_idx_images(bytes.data(), bytes.size());
}

inline std::vector<int> read_idx_labels(const std::uint8_t* data, std::size_t size) {
  ByteReader r(data, size);
  const std::uint8_t* magic = r.take(4, "IDX header");
  if (magic[0] != 0 || magic[1] != 0) throw FormatError("not IDX: bad magic prefix");
  if (magic[2] != kIdxUnsignedByte)
    throw FormatError("not IDX: unsupported dtype code " + std::to_string(magic[2]));
  if (magic[3] != 1) throw FormatError("not a label file: rank " + std::to_string(magic[3]));
  const std::uint64_t n = r.u32_be("IDX dims");
  if (r.remaining() != n)
    throw FormatError("IDX payload: expected " + std::to_string(n) + " bytes, got " +
                      std::to_string(r.remaining()));
  const std::uint8_t* p = r.take(n, "IDX payload");
  return std::vector<int>(p, p + n);
}

inline std::vector<int> read_idx_labels(const std::vector<std::uint8_t>& bytes) {
  return read_idx_labels(bytes.data(), bytes.size());
}

inline std::uint8_t quantize_intensity(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline std::vector<std::uint8_t> write_idx_images(const std::vector<GrayImage>& images) {
  if (images.empty()) throw std::invalid_argument("cannot write an empty image set");
  const int h = images.front().height, w = images.front().width;
  for (const auto& img : images)
    if (img.height != h || img.width != w)
      throw std::invalid_argument("cannot write IDX: mixed image sizes");
  ByteWriter out;
  out.u32_be(0x00000803u);
  out.u32_be(static_cast<std::uint32_t>(images.size()));
  out.u32_be(static_cast<std::uint32_t>(h));
  out.u32_be(static_cast<std::uint32_t>(w));
  for (const auto& img : images)
    for (float v : img.pixels) out.u8(quantize_intensity(v));
  return std::move(out.bytes);
}

inline std::vector<std::uint8_t> write_idx_labels(const std::vector<int>& labels) {
  if (labels.empty()) throw std::invalid_argument("cannot write an empty label set");
  ByteWriter out;
  out.u32_be(0x00000801u);
  out.u32_be(static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    if (l < 0 || l > 255) throw std::invalid_argument("label out of byte range");
    out.u8(static_cast<std::uint8_t>(l));
  }
  return std::move(out.bytes);
}

// ---------------------------------------------------------------------------
// Manifest: one record per line, "index,class,kind,key=value,...". Values are
// comma- and newline-free by construction; keys sort lexicographically.
// ---------------------------------------------------------------------------

inline std::string write_manifest(const std::vector<int>& labels,
                                  const std::vector<VariantTag>& tags) {
  if (labels.size() != tags.size())
    throw std::invalid_argument("manifest: labels/tags size mismatch");
  std::string out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += std::to_string(labels[i]);
    out += ',';
    out += to_string(tags[i].kind);
    for (const auto& [k, v] : tags[i].params) {
      if (k.find_first_of(",=\n") != std::string::npos ||
          v.find_first_of(",\n") != std::string::npos)
        throw std::invalid_argument("manifest: key/value contains a reserved character: " + k +
                                    "=" + v);
      out += ',';
      out += k;
      out += '=';
      out += v;
    }
    out += '\n';
  }
  return out;
}

inline std::string write_manifest(const LabeledDataset& ds) {
  return write_manifest(ds.labels, ds.tags);
}

struct ManifestRecord {
  int label = 0;
  VariantTag tag;
};

inline std::vector<ManifestRecord> parse_manifest(const std::string& text) {
  std::vector<ManifestRecord> records;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::size_t f = 0;
    while (true) {
      const std::size_t c = line.find(',', f);
      fields.push_back(line.substr(f, c == std::string::npos ? c : c - f));
      if (c == std::string::npos) break;
      f = c + 1;
    }
    if (fields.size() < 3)
      throw FormatError("manifest line " + std::to_string(line_no) + ": fewer than 3 fields");
    const long index = detail::parse_long(fields[0]);
    if (index != static_cast<long>(records.size()))
      throw FormatError("manifest line " + std::to_string(line_no) + ": index " +
                        std::to_string(index) + " out of order (expected " +
                        std::to_string(records.size()) + ")");
    ManifestRecord rec;
    rec.label = static_cast<int>(detail::parse_long(fields[1]));
    rec.tag.kind = variant_kind_from_string(fields[2]);
    for (std::size_t i = 3; i < fields.size(); ++i) {
      const std::size_t eq = fields[i].find('=');
      if (eq == std::string::npos)
        throw FormatError("manifest line " + std::to_string(line_no) +
                          ": malformed key=value pair '" + fields[i] + "'");
      rec.tag.params[fields[i].substr(0, eq)] = fields[i].substr(eq + 1);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// PGM (P5, 8-bit)
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> write_pgm(const GrayImage& img) {
  std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                       "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.pixels.size());
  for (float v : img.pixels) out.push_back(quantize_intensity(v));
  return out;
}

inline GrayImage read_pgm(const std::uint8_t* data, std::size_t size) {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < size) {
      if (data[pos] == '#') {
        while (pos < size && data[pos] != '\n') ++pos;
      } else if (std::isspace(data[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* what) -> long {
    skip_ws();
    std::size_t start = pos;
    while (pos < size && std::isdigit(data[pos])) ++pos;
    if (pos == start)
      throw FormatError(std::string("PGM: expected ") + what + " at offset " +
                        std::to_string(start));
    long v = 0;
    for (std::size_t i = start; i < pos; ++i) v = v * 10 + (data[i] - '0');
    return v;
  };

  if (size < 2 || data[0] != 'P' || data[1] != '5') throw FormatError("not a P5 PGM");
  pos = 2;
  const long w = read_int("width");
  const long h = read_int("height");
  const long maxval = read_int("maxval");
  if (w <= 0 || h <= 0 || w > 1 << 20 || h > 1 << 20) throw FormatError("PGM: bad dimensions");
  if (maxval <= 0 || maxval > 255) throw FormatError("PGM: only 8-bit maxval supported");
  if (pos >= size || !std::isspace(data[pos]))
    throw FormatError("PGM: missing whitespace after maxval");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (size - pos < need)
    throw FormatError("PGM payload: expected " + std::to_string(need) + " bytes, got " +
                      std::to_string(size - pos));
  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < need; ++i)
    img.pixels[i] = static_cast<float>(data[pos + i]) / static_cast<float>(maxval);
  return img;
}

inline GrayImage read_pgm(const std::vector<std::uint8_t>& bytes) {
  return read_pgm(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// CSV. Fields are never quoted; all toolkit-controlled values are comma-free.
// ---------------------------------------------------------------------------

struct EpochCsvRow {
  int epoch = 0;  // 1-based in files
  std::string split;
  double accuracy = 0.0;
};

inline std::string write_epoch_csv(const std::vector<EpochCsvRow>& rows) {
  std::string out = "epoch,split,accuracy\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch);
    out += ',';
    out += r.split;
    out += ',';
    out += detail::format_double(r.accuracy, "%.6f");
    out += '\n';
  }
  return out;
}

inline std::vector<EpochCsvRow> read_epoch_csv(const std::string& text) {
  std::vector<EpochCsvRow> rows;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("epoch,", 0) == 0) continue;  // header
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw FormatError("epoch CSV line " + std::to_string(line_no) + ": expected 3 fields");
    EpochCsvRow r;
    r.epoch = static_cast<int>(detail::parse_long(line.substr(0, c1)));
    r.split = line.substr(c1 + 1, c2 - c1 - 1);
    r.accuracy = detail::parse_double(line.substr(c2 + 1));
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// SVG line charts (polyline, line, text elements only).
// ---------------------------------------------------------------------------

struct ChartSeries {
  std::string name;
  std::vector<Vec2> points;  // data coordinates
};

struct ChartSpec {
  std::string title;
  std::string x_label, y_label;
  std::vector<ChartSeries> series;
  std::optional<double> dashed_hline;  // e.g. the 50% collapse threshold line
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  int width = 720, height = 480;
};

inline std::string svg_line_chart(const ChartSpec& spec) {
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  const double ml = 64, mr = 132, mt = 40, mb = 48;
  const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
  const double xspan = spec.x_max - spec.x_min, yspan = spec.y_max - spec.y_min;
  auto sx = [&](double x) { return ml + (x - spec.x_min) / xspan * pw; };
  auto sy = [&](double y) { return mt + ph - (y - spec.y_min) / yspan * ph; };
  auto num = [](double v) { return detail::format_double(v, "%.4g"); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
       std::to_string(spec.width) + "\" height=\"" + std::to_string(spec.height) + "\">\n";
  s += "<text x=\"" + num(spec.width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"15\">" + spec.title + "</text>\n";
  // axes
  s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt) + "\" x2=\"" + num(ml) + "\" y2=\"" +
       num(mt + ph) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(mt + ph) + "\" x2=\"" + num(ml + pw) +
       "\" y2=\"" + num(mt + ph) + "\" stroke=\"black\"/>\n";
  // ticks
  for (int i = 0; i <= 5; ++i) {
    const double xv = spec.x_min + xspan * i / 5.0;
    const double yv = spec.y_min + yspan * i / 5.0;
    s += "<line x1=\"" + num(sx(xv)) + "\" y1=\"" + num(mt + ph) + "\" x2=\"" + num(sx(xv)) +
         "\" y2=\"" + num(mt + ph + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(sx(xv)) + "\" y=\"" + num(mt + ph + 18) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
         detail::format_double(xv, "%.2f") + "</text>\n";
    s += "<line x1=\"" + num(ml - 5) + "\" y1=\"" + num(sy(yv)) + "\" x2=\"" + num(ml) +
         "\" y2=\"" + num(sy(yv)) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(sy(yv) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
         detail::format_double(yv, "%.2f") + "</text>\n";
  }
  s += "<text x=\"" + num(ml + pw / 2) + "\" y=\"" + num(spec.height - 10.0) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + spec.x_label +
       "</text>\n";
  s += "<text x=\"16\" y=\"" + num(mt + ph / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " +
       num(mt + ph / 2) + ")\">" + spec.y_label + "</text>\n";

  if (spec.dashed_hline) {
    const double y = sy(*spec.dashed_hline);
    s += "<line x1=\"" + num(ml) + "\" y1=\"" + num(y) + "\" x2=\"" + num(ml + pw) + "\" y2=\"" +
         num(y) + "\" stroke=\"red\" stroke-dasharray=\"6,4\"/>\n";
  }

  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const char* color = kPalette[i % 10];
    std::string pts;
    for (const Vec2& p : spec.series[i].points)
      pts += num(sx(p.x)) + "," + num(sy(p.y)) + " ";
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" "
         "points=\"" + pts + "\"/>\n";
    const double ly = mt + 14.0 * static_cast<double>(i + 1);
    s += "<line x1=\"" + num(ml + pw + 8) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
         num(ml + pw + 28) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + num(ml + pw + 32) + "\" y=\"" + num(ly) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + spec.series[i].name + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace psikit

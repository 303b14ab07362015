#include "otmask/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "otmask/errors.hpp"

namespace otmask {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write failed for " + path.string());
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Header cursor over the ASCII preamble of PFM/PGM/PPM files.
class HeaderReader {
 public:
  HeaderReader(const std::string& bytes, const fs::path& path, bool allow_comments)
      : bytes_(bytes), path_(path), allow_comments_(allow_comments) {}

  std::string token() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < bytes_.size() && !is_space(bytes_[pos_])) ++pos_;
    if (start == pos_) fail("truncated header");
    return bytes_.substr(start, pos_ - start);
  }

  long integer() {
    const std::string t = token();
    try {
      std::size_t used = 0;
      const long v = std::stol(t, &used);
      if (used != t.size()) fail("bad integer '" + t + "' in header");
      return v;
    } catch (const std::logic_error&) {
      fail("bad integer '" + t + "' in header");
    }
  }

  double real() {
    const std::string t = token();
    try {
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      if (used != t.size()) fail("bad number '" + t + "' in header");
      return v;
    } catch (const std::logic_error&) {
      fail("bad number '" + t + "' in header");
    }
  }

  // The binary payload starts after exactly one whitespace byte.
  std::size_t payload_offset() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) fail("truncated header");
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(path_.string() + ": " + what);
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (allow_comments_ && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  const fs::path& path_;
  bool allow_comments_;
  std::size_t pos_ = 0;
};

struct FloatPlane {
  int width = 0;
  int height = 0;
  std::vector<float> data;
};

FloatPlane read_pfm(const fs::path& path) {
  const std::string bytes = read_file(path);
  HeaderReader header(bytes, path, false);
  const std::string magic = header.token();
  if (magic != "Pf") header.fail("expected grayscale PFM magic 'Pf', got '" + magic + "'");
  const long width = header.integer();
  const long height = header.integer();
  if (width <= 0 || height <= 0 || width > 1 << 20 || height > 1 << 20) {
    header.fail("invalid dimensions");
  }
  const double scale = header.real();
  if (scale == 0.0 || !std::isfinite(scale)) header.fail("invalid scale field");
  const bool little = scale < 0.0;
  const std::size_t offset = header.payload_offset();
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() - offset != count * 4) {
    std::ostringstream out;
    out << "payload has " << bytes.size() - offset << " bytes, expected " << count * 4;
    header.fail(out.str());
  }
  FloatPlane plane{static_cast<int>(width), static_cast<int>(height), std::vector<float>(count)};
  for (std::size_t k = 0; k < count; ++k) {
    std::uint8_t b[4];
    std::memcpy(b, bytes.data() + offset + 4 * k, 4);
    const std::uint32_t bits =
        little ? (std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
                  std::uint32_t{b[3]} << 24)
               : (std::uint32_t{b[3]} | std::uint32_t{b[2]} << 8 | std::uint32_t{b[1]} << 16 |
                  std::uint32_t{b[0]} << 24);
    plane.data[k] = std::bit_cast<float>(bits);
  }
  return plane;
}

void write_pfm(const fs::path& path, int width, int height, const std::vector<float>& data) {
  std::string bytes = "Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
  const std::size_t header = bytes.size();
  bytes.resize(header + data.size() * 4);
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto bits = std::bit_cast<std::uint32_t>(data[k]);
    for (int i = 0; i < 4; ++i) bytes[header + 4 * k + i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  }
  write_file(path, bytes);
}

int read_channel_count(const fs::path& map_path) {
  const fs::path sidecar = channels_sidecar(map_path);
  if (!fs::exists(sidecar)) return 1;
  std::istringstream in(read_file(sidecar));
  std::string line;
  std::getline(in, line);
  while (!line.empty() && is_space(line.back())) line.pop_back();
  constexpr std::string_view key = "channels=";
  if (line.rfind(key, 0) != 0) {
    throw ValidationError(sidecar.string() + ": expected 'channels=N'");
  }
  try {
    std::size_t used = 0;
    const int n = std::stoi(line.substr(key.size()), &used);
    if (used != line.size() - key.size() || n < 1) throw std::invalid_argument("bad");
    return n;
  } catch (const std::logic_error&) {
    throw ValidationError(sidecar.string() + ": invalid channel count");
  }
}

void check_finite(const FloatPlane& plane, int height, const fs::path& path) {
  for (std::size_t k = 0; k < plane.data.size(); ++k) {
    if (!std::isfinite(plane.data[k])) {
      const std::size_t pixel = k % (static_cast<std::size_t>(plane.width) * height);
      std::ostringstream out;
      out << path.string() << ": non-finite value at pixel " << pixel << " (x="
          << pixel % plane.width << ", y=" << pixel / plane.width << ")";
      throw ValidationError(out.str());
    }
  }
}

SemanticMap semantic_from_plane(const FloatPlane& plane, int channels, const fs::path& path) {
  if (plane.height % channels != 0) {
    throw ValidationError(path.string() + ": height " + std::to_string(plane.height) +
                          " is not a multiple of channels=" + std::to_string(channels));
  }
  const int h = plane.height / channels;
  check_finite(plane, h, path);
  SemanticMap map(h, plane.width, channels);
  const std::size_t n = map.pixel_count();
  for (int c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < n; ++p) map.at(p, c) = plane.data[c * n + p];
  }
  try {
    map.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return map;
}

BoundaryMap boundary_from_plane(const FloatPlane& plane, const fs::path& path) {
  check_finite(plane, plane.height, path);
  BoundaryMap map(plane.height, plane.width);
  for (std::size_t p = 0; p < map.pixel_count(); ++p) map.values[p] = plane.data[p];
  try {
    map.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return map;
}

std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

}  // namespace

fs::path channels_sidecar(const fs::path& map_path) {
  return fs::path(map_path.string() + ".channels");
}

fs::path labels_sidecar(const fs::path& mask_path) {
  return fs::path(mask_path.string() + ".labels");
}

void write_semantic_map(const SemanticMap& map, const fs::path& path) {
  if (map.channels < 1 || map.values.size() != map.pixel_count() * map.channels) {
    throw ShapeError("semantic map payload does not match its shape");
  }
  const std::size_t n = map.pixel_count();
  std::vector<float> data(n * map.channels);
  for (int c = 0; c < map.channels; ++c) {
    for (std::size_t p = 0; p < n; ++p) data[c * n + p] = static_cast<float>(map.at(p, c));
  }
  write_pfm(path, map.width, map.height * map.channels, data);
  write_file(channels_sidecar(path), "channels=" + std::to_string(map.channels) + "\n");
}

SemanticMap read_semantic_map(const fs::path& path) {
  const FloatPlane plane = read_pfm(path);
  return semantic_from_plane(plane, read_channel_count(path), path);
}

void write_boundary_map(const BoundaryMap& map, const fs::path& path) {
  if (map.values.size() != map.pixel_count()) {
    throw ShapeError("boundary map payload does not match its shape");
  }
  std::vector<float> data(map.values.begin(), map.values.end());
  write_pfm(path, map.width, map.height, data);
  write_file(channels_sidecar(path), "channels=1\n");
}

BoundaryMap read_boundary_map(const fs::path& path) {
  const int channels = read_channel_count(path);
  if (channels != 1) {
    throw ValidationError(path.string() + ": boundary map must have one channel, found " +
                          std::to_string(channels));
  }
  return boundary_from_plane(read_pfm(path), path);
}

std::variant<SemanticMap, BoundaryMap> read_map(const fs::path& path) {
  const int channels = read_channel_count(path);
  const FloatPlane plane = read_pfm(path);
  if (channels == 1) return boundary_from_plane(plane, path);
  return semantic_from_plane(plane, channels, path);
}

PointSet read_points(const fs::path& path, int height, int width) {
  std::istringstream in(read_file(path));
  PointSet points;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream line(strip_comment(raw));
    std::string first;
    if (!(line >> first)) continue;
    PointAnnotation p;
    std::string kind;
    std::istringstream rest(strip_comment(raw));
    if (!(rest >> p.target_id >> p.class_id >> kind >> p.x >> p.y)) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 'target_id class_id kind x y'");
    }
    std::string extra;
    if (rest >> extra) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": unexpected trailing token '" + extra + "'");
    }
    try {
      p.kind = parse_target_kind(kind);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    points.push_back(p);
  }
  try {
    validate_points(points, height, width);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return points;
}

void write_points(std::span<const PointAnnotation> points, const fs::path& path) {
  std::ostringstream out;
  out << "# target_id class_id kind x y\n";
  for (const auto& p : points) {
    out << p.target_id << ' ' << p.class_id << ' ' << to_string(p.kind) << ' ' << p.x << ' '
        << p.y << '\n';
  }
  write_file(path, out.str());
}

void write_mask(const PseudoMask& mask, const fs::path& path) {
  mask.validate();
  std::string bytes =
      "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n65535\n";
  const std::size_t header = bytes.size();
  bytes.resize(header + mask.target.size() * 2);
  for (std::size_t p = 0; p < mask.target.size(); ++p) {
    const int id = mask.target[p];
    if (id > 65535) throw ValidationError("target id " + std::to_string(id) + " exceeds 65535");
    bytes[header + 2 * p] = static_cast<char>((id >> 8) & 0xff);
    bytes[header + 2 * p + 1] = static_cast<char>(id & 0xff);
  }
  write_file(path, bytes);

  std::ostringstream labels;
  for (const auto& [id, info] : mask.lookup) {
    labels << id << ' ' << info.class_id << ' ' << to_string(info.kind) << '\n';
  }
  write_file(labels_sidecar(path), labels.str());
}

PseudoMask read_mask(const fs::path& path) {
  const std::string bytes = read_file(path);
  HeaderReader header(bytes, path, true);
  if (header.token() != "P5") header.fail("expected binary PGM magic 'P5'");
  const long width = header.integer();
  const long height = header.integer();
  const long maxval = header.integer();
  if (width <= 0 || height <= 0 || width > 1 << 20 || height > 1 << 20) {
    header.fail("invalid dimensions");
  }
  if (maxval != 65535) header.fail("mask maxval must be 65535");
  const std::size_t offset = header.payload_offset();
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() - offset != count * 2) header.fail("payload length mismatch");

  PseudoMask mask;
  mask.width = static_cast<int>(width);
  mask.height = static_cast<int>(height);
  mask.target.resize(count);
  for (std::size_t p = 0; p < count; ++p) {
    const auto hi = static_cast<std::uint8_t>(bytes[offset + 2 * p]);
    const auto lo = static_cast<std::uint8_t>(bytes[offset + 2 * p + 1]);
    mask.target[p] = hi << 8 | lo;
  }

  const fs::path sidecar = labels_sidecar(path);
  std::istringstream in(read_file(sidecar));
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream line(strip_comment(raw));
    std::string first;
    if (!(line >> first)) continue;
    std::istringstream rest(strip_comment(raw));
    int id = 0;
    TargetInfo info;
    std::string kind;
    if (!(rest >> id >> info.class_id >> kind)) {
      throw ValidationError(sidecar.string() + ":" + std::to_string(line_no) +
                            ": expected 'target_id class_id kind'");
    }
    info.kind = parse_target_kind(kind);
    if (id < 1 || !mask.lookup.emplace(id, info).second) {
      throw ValidationError(sidecar.string() + ": invalid or duplicate target id " +
                            std::to_string(id));
    }
  }
  try {
    mask.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return mask;
}

void write_image(const RgbImage& image, const fs::path& path) {
  std::string bytes =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  const std::size_t header = bytes.size();
  bytes.resize(header + image.values.size());
  for (std::size_t k = 0; k < image.values.size(); ++k) {
    const double v = std::clamp(image.values[k], 0.0, 1.0);
    bytes[header + k] = static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  }
  write_file(path, bytes);
}

RgbImage read_image(const fs::path& path) {
  const std::string bytes = read_file(path);
  HeaderReader header(bytes, path, true);
  if (header.token() != "P6") header.fail("expected binary PPM magic 'P6'");
  const long width = header.integer();
  const long height = header.integer();
  const long maxval = header.integer();
  if (width <= 0 || height <= 0 || width > 1 << 20 || height > 1 << 20) {
    header.fail("invalid dimensions");
  }
  if (maxval < 1 || maxval > 255) header.fail("only 8-bit PPM images are supported");
  const std::size_t offset = header.payload_offset();
  RgbImage image(static_cast<int>(height), static_cast<int>(width));
  if (bytes.size() - offset != image.values.size()) header.fail("payload length mismatch");
  for (std::size_t k = 0; k < image.values.size(); ++k) {
    image.values[k] = static_cast<std::uint8_t>(bytes[offset + k]) / static_cast<double>(maxval);
  }
  return image;
}

}  // namespace otmask

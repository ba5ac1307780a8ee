#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "gistnet/data.hpp"

namespace gist {

Image8::Image8(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0) {}

std::uint8_t to_byte(double v) {
  const double scaled = std::round(v * 255.0);
  if (!(scaled > 0.0)) return 0;
  if (scaled >= 255.0) return 255;
  return static_cast<std::uint8_t>(scaled);
}

Tensor image_to_tensor(const Image8& image) {
  const std::size_t plane = image.width * image.height;
  std::vector<float> out(3 * plane);
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = static_cast<float>(image.rgb[i * 3 + c]) / 255.0f;
  return Tensor(Shape{3, image.height, image.width}, std::move(out));
}

std::vector<std::uint8_t> encode_ppm(const Image8& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

namespace {

class HeaderCursor {
 public:
  HeaderCursor(const std::vector<std::uint8_t>& bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  std::size_t next_number(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 24)) fail(std::string(field) + " is too large", start);
      ++pos_;
    }
    if (pos_ == start) fail(std::string("expected ") + field, start);
    return value;
  }

  void expect_magic() {
    if (bytes_.size() < 2 || bytes_[0] != 'P' || bytes_[1] != '6') fail("missing P6 magic", 0);
    pos_ = 2;
  }

  /// Exactly one whitespace byte separates maxval from the raster.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("expected whitespace after maxval", pos_);
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

  [[noreturn]] void fail(const std::string& what, std::size_t offset) const {
    throw FormatError(source_ + ": " + what + " at byte " + std::to_string(offset));
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

}  // namespace

Image8 decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  HeaderCursor cur(bytes, source);
  cur.expect_magic();
  const std::size_t w = cur.next_number("width");
  const std::size_t h = cur.next_number("height");
  const std::size_t maxval = cur.next_number("maxval");
  if (w == 0 || h == 0) cur.fail("zero image extent", cur.pos());
  if (maxval != 255) cur.fail("only maxval 255 is supported, got " + std::to_string(maxval), cur.pos());
  cur.end_header();
  const std::size_t need = w * h * 3;
  if (bytes.size() - cur.pos() < need)
    cur.fail("truncated raster: need " + std::to_string(need) + " bytes, have " +
                 std::to_string(bytes.size() - cur.pos()),
             cur.pos());
  Image8 img(w, h);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos()),
            bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos() + need), img.rgb.begin());
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image8& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto bytes = encode_ppm(image);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Image8 read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_ppm(bytes, path.string());
}

}  // namespace gist

#include <algorithm>
#include <cmath>

#include "gistnet/data.hpp"

namespace gist {

namespace {

// Source taps for one output coordinate under the half-pixel convention.
struct Tap {
  std::size_t i0 = 0;
  std::size_t i1 = 0;
  float frac = 0.0f;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    taps[o] = {i0, std::min(i0 + 1, in - 1), static_cast<float>(src - static_cast<double>(i0))};
  }
  return taps;
}

// a + f*(b - a) keeps constant regions exactly constant.
inline float lerp(float a, float b, float f) { return a + f * (b - a); }

template <typename Fetch>
Tensor resize_with(std::size_t channels, std::size_t in_h, std::size_t in_w, std::size_t out_h, std::size_t out_w,
                   Fetch fetch) {
  if (out_h == 0 || out_w == 0) throw ArgumentError("resize: output extent must be positive");
  const auto ty = bilinear_taps(in_h, out_h);
  const auto tx = bilinear_taps(in_w, out_w);
  std::vector<float> out(channels * out_h * out_w);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const Tap& vy = ty[y];
      float* row = out.data() + (c * out_h + y) * out_w;
      for (std::size_t x = 0; x < out_w; ++x) {
        const Tap& vx = tx[x];
        const float top = lerp(fetch(c, vy.i0, vx.i0), fetch(c, vy.i0, vx.i1), vx.frac);
        const float bottom = lerp(fetch(c, vy.i1, vx.i0), fetch(c, vy.i1, vx.i1), vx.frac);
        row[x] = lerp(top, bottom, vy.frac);
      }
    }
  }
  return Tensor(Shape{channels, out_h, out_w}, std::move(out));
}

}  // namespace

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw ShapeError("resize: expected [C,H,W], got " + image.shape().to_string());
  const std::size_t h = image.dim(1), w = image.dim(2);
  const float* d = image.data();
  return resize_with(image.dim(0), h, w, out_h, out_w,
                     [&](std::size_t c, std::size_t y, std::size_t x) { return d[(c * h + y) * w + x]; });
}

Tensor resize_region(const Image8& image, const Rect& region, std::size_t out_h, std::size_t out_w) {
  if (region.w < 1 || region.h < 1 || region.x < 0 || region.y < 0 ||
      region.x + region.w > static_cast<std::int64_t>(image.width) ||
      region.y + region.h > static_cast<std::int64_t>(image.height))
    throw ValidationError("resize_region: region outside the image or empty");
  const auto x0 = static_cast<std::size_t>(region.x), y0 = static_cast<std::size_t>(region.y);
  return resize_with(3, static_cast<std::size_t>(region.h), static_cast<std::size_t>(region.w), out_h, out_w,
                     [&](std::size_t c, std::size_t y, std::size_t x) {
                       return static_cast<float>(image.at(x0 + x, y0 + y, c)) / 255.0f;
                     });
}

Rect expanded_box(const SceneSample& sample, double margin) {
  if (margin < 0.0) throw ArgumentError("crop margin must be non-negative");
  const Rect& b = sample.bbox;
  if (b.w < 1 || b.h < 1) throw ValidationError("degenerate bbox");
  const double pad = margin * static_cast<double>(std::max(b.w, b.h));
  const auto x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(b.x - pad)));
  const auto y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(b.y - pad)));
  const auto x1 = std::min<std::int64_t>(static_cast<std::int64_t>(sample.image.width),
                                         static_cast<std::int64_t>(std::ceil(b.x + b.w + pad)));
  const auto y1 = std::min<std::int64_t>(static_cast<std::int64_t>(sample.image.height),
                                         static_cast<std::int64_t>(std::ceil(b.y + b.h + pad)));
  if (x1 <= x0 || y1 <= y0) throw ValidationError("crop box is empty after clipping to the image");
  return Rect{x0, y0, x1 - x0, y1 - y0};
}

Tensor crop_minimal_context(const SceneSample& sample, std::size_t out_side, double margin) {
  return resize_region(sample.image, expanded_box(sample, margin), out_side, out_side);
}

Rect scaled_bbox(const SceneSample& sample, std::size_t out_side) {
  const auto side = static_cast<std::int64_t>(out_side);
  auto map_edges = [side](std::int64_t lo, std::int64_t len, std::size_t extent) {
    const double s = static_cast<double>(side) / static_cast<double>(extent);
    std::int64_t a = std::clamp<std::int64_t>(std::llround(static_cast<double>(lo) * s), 0, side);
    std::int64_t b = std::clamp<std::int64_t>(std::llround(static_cast<double>(lo + len) * s), 0, side);
    if (b <= a) {
      if (a >= side) a = side - 1;
      b = a + 1;
    }
    return std::pair{a, b};
  };
  const auto [x0, x1] = map_edges(sample.bbox.x, sample.bbox.w, sample.image.width);
  const auto [y0, y1] = map_edges(sample.bbox.y, sample.bbox.h, sample.image.height);
  return Rect{x0, y0, x1 - x0, y1 - y0};
}

Tensor make_context_input(const SceneSample& sample, std::size_t out_side) {
  const Rect full{0, 0, static_cast<std::int64_t>(sample.image.width), static_cast<std::int64_t>(sample.image.height)};
  Tensor resized = resize_region(sample.image, full, out_side, out_side);
  return region_fill(resized, scaled_bbox(sample, out_side), 0.0f);
}

double context_object_ratio(std::size_t width, std::size_t height, const Rect& bbox) {
  const double object = static_cast<double>(bbox.w) * static_cast<double>(bbox.h);
  if (!(object >= 1.0)) throw ArgumentError("context_object_ratio: object has no pixels");
  return (static_cast<double>(width) * static_cast<double>(height) - object) / object;
}

double context_object_ratio(const SceneSample& sample) {
  return context_object_ratio(sample.image.width, sample.image.height, sample.bbox);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0)) throw ArgumentError("blur sigma must be non-negative");
  if (sigma == 0.0) return {1.0};
  const auto r = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double total = 0.0;
  for (std::ptrdiff_t i = -r; i <= r; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

namespace {

// Mirror about the edge pixels: -1 -> 1, n -> n-2. Repeats for long kernels.
std::size_t mirror(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

// Horizontal pass over one row. Taps are the outer loop so the pixel loop
// vectorizes; each output still sums its taps in ascending order.
void blur_row(const float* src, float* dst, std::size_t len, const std::vector<double>& k, std::vector<double>& line,
              std::vector<double>& acc) {
  const auto r = static_cast<std::ptrdiff_t>(k.size() / 2);
  line.resize(len + 2 * static_cast<std::size_t>(r));
  for (std::ptrdiff_t i = -r; i < static_cast<std::ptrdiff_t>(len) + r; ++i)
    line[static_cast<std::size_t>(i + r)] = src[mirror(i, len)];
  acc.assign(len, 0.0);
  for (std::size_t t = 0; t < k.size(); ++t) {
    const double kt = k[t];
    const double* w = line.data() + t;
    for (std::size_t i = 0; i < len; ++i) acc[i] += kt * w[i];
  }
  for (std::size_t i = 0; i < len; ++i) dst[i] = static_cast<float>(acc[i]);
}

// Vertical pass producing output row y of an h x w plane.
void blur_column_row(const float* plane, float* dst, std::size_t y, std::size_t h, std::size_t w,
                     const std::vector<double>& k, std::vector<double>& acc) {
  const auto r = static_cast<std::ptrdiff_t>(k.size() / 2);
  acc.assign(w, 0.0);
  for (std::size_t t = 0; t < k.size(); ++t) {
    const double kt = k[t];
    const float* row = plane + mirror(static_cast<std::ptrdiff_t>(y) + static_cast<std::ptrdiff_t>(t) - r, h) * w;
    for (std::size_t x = 0; x < w; ++x) acc[x] += kt * row[x];
  }
  for (std::size_t x = 0; x < w; ++x) dst[x] = static_cast<float>(acc[x]);
}

}  // namespace

Tensor blur_context(const Tensor& context, const Rect& object, double sigma) {
  if (!(sigma >= 0.0)) throw ArgumentError("blur sigma must be non-negative");
  if (context.rank() != 3) throw ShapeError("blur_context: expected [C,H,W], got " + context.shape().to_string());
  if (sigma == 0.0) return context;
  const auto k = gaussian_kernel(sigma);
  const std::size_t channels = context.dim(0), h = context.dim(1), w = context.dim(2);
  const auto [lo_it, hi_it] = std::minmax_element(context.values().begin(), context.values().end());
  const float lo = *lo_it, hi = *hi_it;

  std::vector<float> tmp(context.size());
  std::vector<float> out(context.size());
  std::vector<double> line, acc;
  for (std::size_t c = 0; c < channels; ++c) {
    const float* plane = context.data() + c * h * w;
    float* t = tmp.data() + c * h * w;
    float* o = out.data() + c * h * w;
    for (std::size_t y = 0; y < h; ++y) blur_row(plane + y * w, t + y * w, w, k, line, acc);
    for (std::size_t y = 0; y < h; ++y) blur_column_row(t, o + y * w, y, h, w, k, acc);
  }
  for (float& v : out) v = std::clamp(v, lo, hi);
  return region_fill(Tensor(context.shape(), std::move(out)), object, 0.0f);
}

BlurSchedule BlurSchedule::linear(std::size_t context_side, std::size_t count, double step) {
  BlurSchedule s;
  const double unit = step * static_cast<double>(context_side) / 128.0;
  for (std::size_t j = 0; j < count; ++j) s.levels.push_back(static_cast<double>(j) * unit);
  s.validate();
  return s;
}

void BlurSchedule::validate() const {
  if (levels.empty() || levels.front() != 0.0) throw ConfigError("blur schedule must start at sigma 0");
  for (std::size_t j = 1; j < levels.size(); ++j)
    if (!(levels[j] > levels[j - 1])) throw ConfigError("blur schedule must be strictly increasing");
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, SeededRng& rng) {
  if (batch_size == 0) throw ArgumentError("batch size must be at least 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return batches;
}

}  // namespace gist

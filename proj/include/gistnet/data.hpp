#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gistnet/rng.hpp"
#include "gistnet/tensor.hpp"

namespace gist {

// ---------------------------------------------------------------------------
// Images

/// 8-bit interleaved RGB image, the storage form of every dataset picture.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  /// Row-major RGB triples, size width*height*3.
  std::vector<std::uint8_t> rgb;

  Image8() = default;
  Image8(std::size_t w, std::size_t h);

  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }
  void set(std::size_t x, std::size_t y, std::size_t c, std::uint8_t v) { rgb[(y * width + x) * 3 + c] = v; }

  friend bool operator==(const Image8&, const Image8&) = default;
};

/// Rounds v*255 to the nearest byte, clamping to [0, 255].
std::uint8_t to_byte(double v);

/// [3,H,W] float tensor with values byte/255.
Tensor image_to_tensor(const Image8& image);

/// Binary PPM (P6, maxval 255). Comments and arbitrary whitespace between
/// header fields are accepted on decode.
std::vector<std::uint8_t> encode_ppm(const Image8& image);
Image8 decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");
void write_ppm(const std::filesystem::path& path, const Image8& image);
Image8 read_ppm(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Manifest

struct CategoryEntry {
  std::int64_t id = 0;
  std::string name;
  friend bool operator==(const CategoryEntry&, const CategoryEntry&) = default;
};

struct ImageEntry {
  std::int64_t id = 0;
  std::string file;
  std::int64_t width = 0;
  std::int64_t height = 0;
  friend bool operator==(const ImageEntry&, const ImageEntry&) = default;
};

struct AnnotationEntry {
  std::int64_t image_id = 0;
  Rect bbox;
  std::int64_t category_id = 0;
  std::optional<std::int64_t> scene_class;
  std::optional<std::int64_t> scene_superclass;
  friend bool operator==(const AnnotationEntry&, const AnnotationEntry&) = default;
};

/// COCO-style index of a dataset. Image paths are relative to the manifest's
/// directory unless absolute.
struct DatasetManifest {
  std::vector<CategoryEntry> categories;
  std::vector<ImageEntry> images;
  std::vector<AnnotationEntry> annotations;

  /// Throws ValidationError naming the first annotation that references a
  /// missing image or category or whose bbox leaves the image.
  void validate() const;

  /// Position of a category id in `categories`; this is the class index.
  std::size_t category_index(std::int64_t category_id) const;
  const ImageEntry& image(std::int64_t image_id) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Parses a manifest document. Throws ParseError with line and field context.
DatasetManifest parse_manifest(const std::string& text, const std::string& source = "<memory>");
std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Samples

struct SceneSample {
  Image8 image;
  Rect bbox;
  /// Class index in [0, K).
  std::size_t category = 0;
  std::int64_t scene_class = -1;
  std::int64_t scene_superclass = -1;
};

/// Decodes the images referenced by a manifest one annotation at a time.
class ManifestReader {
 public:
  /// Loads and validates the manifest; images are read lazily.
  explicit ManifestReader(const std::filesystem::path& manifest_path);
  ManifestReader(DatasetManifest manifest, std::filesystem::path base_dir);

  const DatasetManifest& manifest() const { return manifest_; }
  std::size_t size() const { return manifest_.annotations.size(); }
  std::size_t num_classes() const { return manifest_.categories.size(); }

  /// Throws IoError naming the file when it cannot be read, and
  /// ValidationError when the decoded size disagrees with the manifest.
  SceneSample sample(std::size_t index) const;
  std::vector<SceneSample> load_all() const;

 private:
  DatasetManifest manifest_;
  std::filesystem::path base_dir_;
  std::vector<std::size_t> image_index_;
  std::vector<std::size_t> class_index_;
};

/// Writes every sample as `<prefix>_<index>.ppm` under `dir` plus a manifest
/// at `dir/manifest_name`; categories are named by `category_names`.
DatasetManifest write_dataset(const std::filesystem::path& dir, const std::string& manifest_name,
                              const std::string& prefix, const std::vector<SceneSample>& samples,
                              const std::vector<std::string>& category_names);

// ---------------------------------------------------------------------------
// Transforms

/// Bilinear resize of [C,H,W] with half-pixel centers and edge clamping.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

/// Resizes the pixels of `region` to out_h x out_w; samples outside the region
/// are clamped to its edge, so nothing outside it leaks in.
Tensor resize_region(const Image8& image, const Rect& region, std::size_t out_h, std::size_t out_w);

/// The bbox grown by margin*max(w,h) on every side (outward to whole pixels)
/// and clipped to the image.
Rect expanded_box(const SceneSample& sample, double margin);

/// Object crop resized to out_side x out_side. Aspect ratio is not kept.
Tensor crop_minimal_context(const SceneSample& sample, std::size_t out_side, double margin);

/// bbox mapped onto an out_side grid: edges scaled and rounded to the nearest
/// pixel, clamped inside, at least one pixel wide and tall.
Rect scaled_bbox(const SceneSample& sample, std::size_t out_side);

/// Whole scene resized to out_side x out_side with the scaled bbox set to 0.
Tensor make_context_input(const SceneSample& sample, std::size_t out_side);

/// (H*W - w*h) / (w*h).
double context_object_ratio(std::size_t width, std::size_t height, const Rect& bbox);
double context_object_ratio(const SceneSample& sample);

/// Normalized Gaussian taps for offsets -r..r with r = ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with mirror padding, then `object` is zeroed
/// again. sigma = 0 returns the input unchanged. Results are clamped to the
/// input's value range. Throws ArgumentError when sigma < 0.
Tensor blur_context(const Tensor& context, const Rect& object, double sigma);

struct BlurSchedule {
  std::vector<double> levels;

  /// sigma_j = j * step * (context_side / 128) for j = 0..count-1.
  static BlurSchedule linear(std::size_t context_side, std::size_t count = 40, double step = 0.25);
  /// sigma_0 = 0 and strictly increasing; throws ConfigError otherwise.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Synthetic scenes

/// Scenes whose background class predicts which member of an ambiguous
/// object pair is present.
///
/// Each scene draws a context class g; classes [0, G/2) form superclass 0
/// and the rest superclass 1. The background is a grid of colored cells; each
/// cell takes its superclass palette with probability `context_purity` and
/// the other palette otherwise, and faint stripes whose orientation and
/// frequency depend on g are laid on top. The object is a gray tile carrying
/// a black glyph that identifies its pair. With probability `fidelity` the
/// member is the superclass' preferred one ((pair + superclass) mod 2),
/// otherwise it is uniform over the pair.
struct SyntheticConfig {
  std::size_t num_pairs = 4;
  std::size_t num_context_classes = 4;
  double fidelity = 0.9;
  double context_purity = 0.65;
  std::size_t scene_side = 128;
  std::size_t grid_cells = 8;
  double stripe_amplitude = 0.06;
  std::size_t object_min = 12;
  std::size_t object_max = 112;
  std::size_t train_count = 10000;
  std::size_t test_count = 2000;
  std::uint64_t seed = 1;

  std::size_t num_classes() const { return 2 * num_pairs; }
  void validate() const;
};

inline constexpr std::size_t kMaxGlyphs = 8;

std::vector<std::string> synthetic_category_names(const SyntheticConfig& cfg);

/// Superclass of a context class.
std::size_t superclass_of(const SyntheticConfig& cfg, std::size_t context_class);
/// Member preferred by a superclass within `pair`.
std::size_t preferred_member(std::size_t pair, std::size_t superclass);

/// Sample `index` of a split; a pure function of (cfg, split, index).
SceneSample synthetic_sample(const SyntheticConfig& cfg, const std::string& split, std::size_t index);

struct SyntheticDataset {
  std::vector<SceneSample> train;
  std::vector<SceneSample> test;
};

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg);

/// A seeded permutation of [0, n) cut into batches; the last one may be
/// short. Throws ArgumentError when batch_size is 0.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, SeededRng& rng);

}  // namespace gist

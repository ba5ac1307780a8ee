#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "gistnet/data.hpp"

using namespace gist;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gistnet_test_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SceneSample solid_sample(std::size_t w, std::size_t h, Rect bbox, std::uint8_t value = 200) {
  SceneSample s;
  s.image = Image8(w, h);
  std::fill(s.image.rgb.begin(), s.image.rgb.end(), value);
  s.bbox = bbox;
  return s;
}

SceneSample noise_sample(SeededRng& rng, std::size_t w, std::size_t h, Rect bbox) {
  SceneSample s = solid_sample(w, h, bbox);
  for (auto& b : s.image.rgb) b = static_cast<std::uint8_t>(rng.uniform_index(256));
  return s;
}

DatasetManifest small_manifest() {
  DatasetManifest m;
  m.categories = {{3, "cup"}, {7, "mug"}};
  m.images = {{10, "a.ppm", 4, 3}, {11, "b.ppm", 5, 5}};
  m.annotations = {{10, Rect{0, 0, 2, 2}, 7, 1, 0}, {11, Rect{1, 1, 4, 4}, 3, std::nullopt, std::nullopt}};
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// PPM

TEST(Ppm, DecodesHandWrittenFixture) {
  const std::string header = "P6\n# fixture\n2 2\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  const std::vector<std::uint8_t> pixels{255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30};
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  const Image8 img = decode_ppm(bytes);
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.height, 2u);
  EXPECT_EQ(img.rgb, pixels);
  EXPECT_EQ(img.at(1, 1, 2), 30);
  EXPECT_EQ(img.at(1, 0, 1), 255);
}

TEST(Ppm, EncodeDecodeRoundTrip) {
  SeededRng rng(1);
  Image8 img(7, 5);
  for (auto& b : img.rgb) b = static_cast<std::uint8_t>(rng.uniform_index(256));
  EXPECT_EQ(decode_ppm(encode_ppm(img)), img);
  const fs::path dir = scratch_dir("ppm");
  write_ppm(dir / "x.ppm", img);
  EXPECT_EQ(read_ppm(dir / "x.ppm"), img);
}

TEST(Ppm, MalformedInputsAreFormatErrors) {
  const auto bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
  EXPECT_THROW(decode_ppm(bytes("P3\n1 1\n255\n   ")), FormatError);
  EXPECT_THROW(decode_ppm(bytes("P6\n2 2\n255\nabc")), FormatError);
  EXPECT_THROW(decode_ppm(bytes("P6\n1 1\n65535\nabcdef")), FormatError);
  EXPECT_THROW(decode_ppm(bytes("")), FormatError);
}

TEST(Ppm, MissingFileIsIoError) { EXPECT_THROW(read_ppm("/nonexistent/dir/x.ppm"), IoError); }

TEST(ImageTensor, ScalesBytes) {
  Image8 img(1, 1);
  img.rgb = {0, 255, 51};
  const Tensor t = image_to_tensor(img);
  EXPECT_EQ(t.shape(), (Shape{3, 1, 1}));
  EXPECT_FLOAT_EQ(t[1], 1.0f);
  EXPECT_FLOAT_EQ(t[2], 0.2f);
  EXPECT_EQ(to_byte(1.7), 255);
  EXPECT_EQ(to_byte(-0.1), 0);
  EXPECT_EQ(to_byte(0.5), 128);
}

// ---------------------------------------------------------------------------
// Manifest

TEST(Manifest, RoundTripFieldIdentical) {
  const DatasetManifest m = small_manifest();
  EXPECT_EQ(parse_manifest(serialize_manifest(m)), m);
  const fs::path dir = scratch_dir("manifest");
  save_manifest(m, dir / "m.json");
  EXPECT_EQ(load_manifest(dir / "m.json"), m);
}

TEST(Manifest, ExactFieldNamesAndUnknownFieldsIgnored) {
  const std::string text = R"({"categories":[{"id":1,"name":"a","extra":true}],
    "images":[{"id":5,"file":"x.ppm","width":10,"height":8,"license":3}],
    "annotations":[{"image_id":5,"bbox":[1,2,3,4],"category_id":1,"scene_class":2,"scene_superclass":1,"area":12}],
    "info":{}})";
  const DatasetManifest m = parse_manifest(text);
  ASSERT_EQ(m.annotations.size(), 1u);
  EXPECT_EQ(m.annotations[0].bbox, (Rect{1, 2, 3, 4}));
  EXPECT_EQ(m.annotations[0].scene_class, 2);
  EXPECT_EQ(m.annotations[0].scene_superclass, 1);
  EXPECT_EQ(m.images[0].file, "x.ppm");
}

TEST(Manifest, MalformedIsParseErrorWithContext) {
  try {
    parse_manifest("{\n\"categories\": [\n{\"id\": 1,, }]}", "m.json");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("m.json"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  try {
    parse_manifest(R"({"categories":[{"id":"one","name":"a"}],"images":[],"annotations":[]})", "m.json");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("id"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_manifest(R"({"categories":[],"images":[]})"), ParseError);
}

TEST(Manifest, OutOfBoundsBboxIsValidationErrorNamingAnnotation) {
  DatasetManifest m = small_manifest();
  m.annotations[1].bbox = Rect{2, 0, 4, 1};  // x + w = 6 > 5
  try {
    m.validate();
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("annotation 1"), std::string::npos) << e.what();
  }
}

TEST(Manifest, DanglingReferencesAreValidationErrors) {
  DatasetManifest m = small_manifest();
  m.annotations[0].image_id = 99;
  EXPECT_THROW(m.validate(), ValidationError);
  m = small_manifest();
  m.annotations[0].category_id = 99;
  EXPECT_THROW(m.validate(), ValidationError);
}

TEST(ManifestReader, EmptyAnnotationsIsEmpty) {
  const fs::path dir = scratch_dir("empty");
  DatasetManifest m;
  m.categories = {{0, "a"}};
  save_manifest(m, dir / "m.json");
  const ManifestReader reader(dir / "m.json");
  EXPECT_EQ(reader.size(), 0u);
  EXPECT_TRUE(reader.load_all().empty());
}

TEST(ManifestReader, MissingImageIsIoErrorNamingFile) {
  const fs::path dir = scratch_dir("missing");
  save_manifest(small_manifest(), dir / "m.json");
  const ManifestReader reader(dir / "m.json");
  try {
    reader.sample(0);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("a.ppm"), std::string::npos) << e.what();
  }
}

TEST(ManifestReader, WriteDatasetRoundTrip) {
  const fs::path dir = scratch_dir("dataset");
  SeededRng rng(3);
  std::vector<SceneSample> samples;
  for (std::size_t i = 0; i < 5; ++i) {
    SceneSample s = noise_sample(rng, 6 + i, 4, Rect{1, 1, 2, 2});
    s.category = i % 2;
    s.scene_class = static_cast<std::int64_t>(i);
    s.scene_superclass = static_cast<std::int64_t>(i % 2);
    samples.push_back(s);
  }
  write_dataset(dir, "m.json", "img", samples, {"even", "odd"});
  const ManifestReader reader(dir / "m.json");
  ASSERT_EQ(reader.size(), samples.size());
  EXPECT_EQ(reader.num_classes(), 2u);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SceneSample s = reader.sample(i);
    EXPECT_EQ(s.image, samples[i].image);
    EXPECT_EQ(s.bbox, samples[i].bbox);
    EXPECT_EQ(s.category, samples[i].category);
    EXPECT_EQ(s.scene_class, samples[i].scene_class);
    EXPECT_EQ(s.scene_superclass, samples[i].scene_superclass);
  }
}

// ---------------------------------------------------------------------------
// Crops and context

TEST(Crop, WholeImageBoxIsPlainResize) {
  SeededRng rng(4);
  const SceneSample s = noise_sample(rng, 10, 8, Rect{0, 0, 10, 8});
  EXPECT_EQ(crop_minimal_context(s, 16, 0.0), resize_bilinear(image_to_tensor(s.image), 16, 16));
}

TEST(Crop, ConstantPatchStaysConstant) {
  const SceneSample s = solid_sample(2, 2, Rect{0, 0, 2, 2}, 77);
  const Tensor t = crop_minimal_context(s, 4, 0.0);
  EXPECT_EQ(t.shape(), (Shape{3, 4, 4}));
  for (float v : t.values()) EXPECT_FLOAT_EQ(v, 77.0f / 255.0f);
}

TEST(Crop, MarginExpandsAndClips) {
  const SceneSample s = solid_sample(100, 100, Rect{40, 40, 20, 10});
  EXPECT_EQ(expanded_box(s, 0.0), (Rect{40, 40, 20, 10}));
  EXPECT_EQ(expanded_box(s, 0.25), (Rect{35, 35, 30, 20}));
  EXPECT_EQ(expanded_box(s, 10.0), (Rect{0, 0, 100, 100}));
}

TEST(Crop, DegenerateBoxIsValidationError) {
  const SceneSample s = solid_sample(10, 10, Rect{3, 3, 0, 2});
  EXPECT_THROW(crop_minimal_context(s, 8, 0.0), ValidationError);
}

TEST(ContextInput, FullCoverIsAllZero) {
  const SceneSample s = solid_sample(30, 20, Rect{0, 0, 30, 20});
  EXPECT_EQ(make_context_input(s, 16), Tensor::zeros(Shape{3, 16, 16}));
}

TEST(ContextInput, MaskExactInsideAndPlainResizeOutside) {
  SeededRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t w = 20 + rng.uniform_index(200), h = 20 + rng.uniform_index(200);
    const auto bw = static_cast<std::int64_t>(1 + rng.uniform_index(w)), bh = static_cast<std::int64_t>(1 + rng.uniform_index(h));
    const Rect box{static_cast<std::int64_t>(rng.uniform_index(w - bw + 1)),
                   static_cast<std::int64_t>(rng.uniform_index(h - bh + 1)), bw, bh};
    const SceneSample s = noise_sample(rng, w, h, box);
    const std::size_t side = 64;
    const Tensor ctx = make_context_input(s, side);
    const Tensor plain = resize_bilinear(image_to_tensor(s.image), side, side);
    const Rect r = scaled_bbox(s, side);
    double masked_sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::int64_t y = 0; y < 64; ++y)
        for (std::int64_t x = 0; x < 64; ++x) {
          const std::size_t i = (c * side + y) * side + x;
          if (x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h) {
            EXPECT_EQ(ctx[i], 0.0f);
            masked_sum += ctx[i];
          } else {
            ASSERT_EQ(ctx[i], plain[i]);
          }
        }
    EXPECT_EQ(masked_sum, 0.0);
    const double frac_scaled = static_cast<double>(r.area()) / static_cast<double>(side * side);
    const double frac_orig = static_cast<double>(box.area()) / static_cast<double>(w * h);
    EXPECT_LE(std::abs(frac_scaled - frac_orig), 2.0 / static_cast<double>(side));
  }
}

TEST(ContextInput, PlainResizeMatchesBilinearOracle) {
  // Half-pixel centres: output pixel i samples input coordinate (i + 0.5) * in/out - 0.5.
  Image8 img(2, 1);
  img.rgb = {0, 0, 0, 255, 255, 255};
  const Tensor t = resize_bilinear(image_to_tensor(img), 1, 4);
  const double expect[4] = {0.0, 0.25, 0.75, 1.0};  // clamped at both ends
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(t[i], expect[i], 1e-6);
}

// ---------------------------------------------------------------------------
// Ratio

TEST(Ratio, AverageSizes) {
  const double r = context_object_ratio(468, 585, Rect{0, 0, 154, 151});
  EXPECT_DOUBLE_EQ(r, 250526.0 / 23254.0);
  EXPECT_NEAR(r, 10.77, 0.005);
  EXPECT_EQ(468 * 585 - 154 * 151, 250526);
}

TEST(Ratio, Extremes) {
  EXPECT_EQ(context_object_ratio(50, 40, Rect{0, 0, 50, 40}), 0.0);
  EXPECT_EQ(context_object_ratio(200, 200, Rect{3, 3, 1, 1}), 39999.0);
}

TEST(Ratio, ScaleInvariant) {
  SeededRng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t w = 2 + rng.uniform_index(300), h = 2 + rng.uniform_index(300);
    const Rect b{0, 0, static_cast<std::int64_t>(1 + rng.uniform_index(w)), static_cast<std::int64_t>(1 + rng.uniform_index(h))};
    const std::int64_t f = 1 + static_cast<std::int64_t>(rng.uniform_index(5));
    EXPECT_DOUBLE_EQ(context_object_ratio(w, h, b),
                     context_object_ratio(w * f, h * f, Rect{0, 0, b.w * f, b.h * f}));
  }
}

// ---------------------------------------------------------------------------
// Blur

TEST(Blur, KernelNormalizedWithRadiusThreeSigma) {
  for (double sigma : {0.3, 1.0, 2.5, 9.75}) {
    const auto k = gaussian_kernel(sigma);
    EXPECT_EQ(k.size(), 2 * static_cast<std::size_t>(std::ceil(3 * sigma)) + 1);
    double total = 0.0;
    for (double v : k) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_NEAR(k.front(), k.back(), 1e-15);
  }
}

TEST(Blur, ZeroSigmaIsBitwiseIdentity) {
  SeededRng rng(7);
  const Tensor t = random_normal<float>(rng, Shape{3, 12, 9}, 0.5, 0.3);
  EXPECT_EQ(blur_context(t, Rect{0, 0, 1, 1}, 0.0), t);
}

TEST(Blur, NegativeSigmaIsArgumentError) {
  EXPECT_THROW(blur_context(Tensor::zeros(Shape{3, 4, 4}), Rect{0, 0, 1, 1}, -0.5), ArgumentError);
}

TEST(Blur, ConstantImageUnchangedOutsideObject) {
  const Tensor t = Tensor::full(Shape{3, 17, 23}, 0.625f);
  const Rect obj{5, 5, 3, 4};
  for (double sigma : {0.5, 2.0, 9.75}) {
    const Tensor b = blur_context(t, obj, sigma);
    EXPECT_EQ(b, region_fill(t, obj, 0.0f)) << "sigma " << sigma;
  }
}

TEST(Blur, ImpulseMatchesDirect2DConvolution) {
  const std::size_t n = 21, c = 10;
  Tensor t = Tensor::zeros(Shape{1, n, n});
  t[c * n + c] = 1.0f;
  const Tensor b = blur_context(t, Rect{0, 0, 1, 1}, 1.0);
  const auto k = gaussian_kernel(1.0);
  const std::size_t r = k.size() / 2;
  EXPECT_NEAR(b[c * n + c], k[r] * k[r], 1e-6);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      if (x == 0 && y == 0) continue;
      const auto dy = static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(c);
      const auto dx = static_cast<std::ptrdiff_t>(x) - static_cast<std::ptrdiff_t>(c);
      double expect = 0.0;
      if (std::abs(dy) <= static_cast<std::ptrdiff_t>(r) && std::abs(dx) <= static_cast<std::ptrdiff_t>(r))
        expect = k[static_cast<std::size_t>(dy + static_cast<std::ptrdiff_t>(r))] *
                 k[static_cast<std::size_t>(dx + static_cast<std::ptrdiff_t>(r))];
      EXPECT_NEAR(b[y * n + x], expect, 1e-6) << x << "," << y;
    }
  EXPECT_EQ(b[0], 0.0f);
}

TEST(Blur, StaysWithinInputRangeAndZeroesObject) {
  SeededRng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor t = Tensor::zeros(Shape{3, 32, 32});
    for (auto& v : t.mutable_values()) v = static_cast<float>(rng.uniform());
    const Rect obj{4, 6, 10, 7};
    t = region_fill(t, obj, 0.0f);
    const auto [lo, hi] = std::minmax_element(t.values().begin(), t.values().end());
    const Tensor b = blur_context(t, obj, 0.5 + 3.0 * rng.uniform());
    for (std::size_t i = 0; i < b.size(); ++i) {
      EXPECT_GE(b[i], *lo);
      EXPECT_LE(b[i], *hi);
    }
    EXPECT_EQ(b, region_fill(b, obj, 0.0f));
  }
}

TEST(BlurSchedule, LinearDefault) {
  const BlurSchedule s = BlurSchedule::linear(128);
  ASSERT_EQ(s.levels.size(), 40u);
  EXPECT_EQ(s.levels[0], 0.0);
  EXPECT_DOUBLE_EQ(s.levels[39], 39 * 0.25);
  EXPECT_DOUBLE_EQ(BlurSchedule::linear(448).levels[1], 0.25 * 448.0 / 128.0);
  for (std::size_t j = 1; j < 40; ++j) EXPECT_GT(s.levels[j], s.levels[j - 1]);
}

TEST(BlurSchedule, InvalidSchedules) {
  EXPECT_THROW((BlurSchedule{{0.5, 1.0}}.validate()), ConfigError);
  EXPECT_THROW((BlurSchedule{{0.0, 1.0, 1.0}}.validate()), ConfigError);
}

// ---------------------------------------------------------------------------
// Synthetic generator

TEST(Synthetic, BayesLimitsFromDefinition) {
  // With fidelity rho the context-aware optimum picks the preferred member:
  // correct with probability rho + (1 - rho)/2. Without context it is a coin flip.
  const double rho = 0.9;
  EXPECT_DOUBLE_EQ(rho + (1 - rho) / 2, 0.95);
}

TEST(Synthetic, SuperclassAndPreferredMember) {
  SyntheticConfig cfg;
  EXPECT_EQ(superclass_of(cfg, 0), 0u);
  EXPECT_EQ(superclass_of(cfg, 1), 0u);
  EXPECT_EQ(superclass_of(cfg, 2), 1u);
  EXPECT_EQ(superclass_of(cfg, 3), 1u);
  for (std::size_t p = 0; p < 4; ++p) EXPECT_NE(preferred_member(p, 0), preferred_member(p, 1));
  EXPECT_EQ(synthetic_category_names(cfg).size(), 8u);
}

TEST(Synthetic, InvalidConfigs) {
  SyntheticConfig cfg;
  cfg.fidelity = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SyntheticConfig{};
  cfg.num_context_classes = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SyntheticConfig{};
  cfg.num_context_classes = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Synthetic, SamplesAreWellFormedAndDeterministic) {
  SyntheticConfig cfg;
  for (std::size_t i = 0; i < 50; ++i) {
    const SceneSample s = synthetic_sample(cfg, "train", i);
    EXPECT_EQ(s.image.width, cfg.scene_side);
    EXPECT_GE(s.bbox.x, 0);
    EXPECT_GE(s.bbox.y, 0);
    EXPECT_LE(s.bbox.x + s.bbox.w, static_cast<std::int64_t>(cfg.scene_side));
    EXPECT_LE(s.bbox.y + s.bbox.h, static_cast<std::int64_t>(cfg.scene_side));
    EXPECT_GE(s.bbox.w, static_cast<std::int64_t>(cfg.object_min));
    EXPECT_LE(s.bbox.w, static_cast<std::int64_t>(cfg.object_max));
    EXPECT_LT(s.category, 8u);
    EXPECT_EQ(static_cast<std::size_t>(s.scene_superclass), superclass_of(cfg, static_cast<std::size_t>(s.scene_class)));
    const SceneSample again = synthetic_sample(cfg, "train", i);
    EXPECT_EQ(again.image, s.image);
    EXPECT_EQ(again.bbox, s.bbox);
  }
  EXPECT_FALSE(synthetic_sample(cfg, "train", 0).image == synthetic_sample(cfg, "test", 0).image);
}

TEST(Synthetic, GenerateIsBitwiseReproducible) {
  SyntheticConfig cfg;
  cfg.train_count = 30;
  cfg.test_count = 10;
  const auto a = generate_synthetic(cfg);
  const auto b = generate_synthetic(cfg);
  ASSERT_EQ(a.train.size(), 30u);
  ASSERT_EQ(a.test.size(), 10u);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(a.train[i].image, b.train[i].image);
}

class SyntheticStats : public ::testing::Test {
 protected:
  using Key = std::tuple<std::size_t, std::size_t, std::size_t>;  // (pair, context class, member)
  struct Counts {
    std::map<Key, double> joint;
    std::map<std::pair<std::size_t, std::size_t>, double> pair_context, pair_member;
    std::map<std::size_t, double> pair, category;
    std::map<std::pair<std::size_t, std::size_t>, double> preferred;  // (superclass, hit)
    double n = 0;
  };

  static Counts tally(double fidelity, std::size_t n) {
    SyntheticConfig cfg;
    cfg.fidelity = fidelity;
    Counts c;
    for (std::size_t i = 0; i < n; ++i) {
      const SceneSample s = synthetic_sample(cfg, "train", i);
      const auto g = static_cast<std::size_t>(s.scene_class);
      const std::size_t pair = s.category / 2, member = s.category % 2;
      c.joint[{pair, g, member}] += 1;
      c.pair_context[{pair, g}] += 1;
      c.pair_member[{pair, member}] += 1;
      c.pair[pair] += 1;
      c.category[s.category] += 1;
      c.preferred[{superclass_of(cfg, g), member == preferred_member(pair, superclass_of(cfg, g)) ? 1u : 0u}] += 1;
      c.n += 1;
    }
    return c;
  }

  // Plug-in conditional mutual information I(context class; member | pair)
  // in bits.
  static double mutual_information(const Counts& c) {
    double mi = 0.0;
    for (const auto& [key, nxyz] : c.joint) {
      const auto [pair, g, member] = key;
      const double nz = c.pair.at(pair);
      mi += nxyz / c.n *
            std::log2(nxyz * nz / (c.pair_context.at({pair, g}) * c.pair_member.at({pair, member})));
    }
    return mi;
  }
};

TEST_F(SyntheticStats, ZeroFidelityCarriesNoContextInformation) {
  const Counts c = tally(0.0, 10000);
  EXPECT_LE(mutual_information(c), 0.01);
}

TEST_F(SyntheticStats, HighFidelityPreferredRateAndBalance) {
  const Counts c = tally(0.9, 10000);
  const double hits = c.preferred.count({0, 1}) ? c.preferred.at({0, 1}) + c.preferred.at({1, 1}) : 0.0;
  EXPECT_NEAR(hits / c.n, 0.95, 0.01);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(c.category.at(k) / c.n, 1.0 / 8.0, 0.02) << "category " << k;
  // 1 - H(0.95) bits when the member is preferred with probability 0.95.
  const double h = -(0.95 * std::log2(0.95) + 0.05 * std::log2(0.05));
  EXPECT_NEAR(mutual_information(c), 1.0 - h, 0.03);
}

TEST(ShuffledBatches, SizesAndPermutation) {
  SeededRng rng(1);
  const auto batches = shuffled_batches(10, 3, rng);
  ASSERT_EQ(batches.size(), 4u);
  EXPECT_EQ(batches[0].size(), 3u);
  EXPECT_EQ(batches[3].size(), 1u);
  std::vector<std::size_t> all;
  for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
}

TEST(ShuffledBatches, SeededOrder) {
  SeededRng a(5), b(5), c(6);
  EXPECT_EQ(shuffled_batches(50, 7, a), shuffled_batches(50, 7, b));
  EXPECT_NE(shuffled_batches(50, 7, a), shuffled_batches(50, 7, c));
  EXPECT_THROW(shuffled_batches(5, 0, a), ArgumentError);
}

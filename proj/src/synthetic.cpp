#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "gistnet/data.hpp"

namespace gist {

void SyntheticConfig::validate() const {
  if (num_pairs < 1 || num_pairs > kMaxGlyphs)
    throw ConfigError("synthetic: num_pairs must lie in [1, " + std::to_string(kMaxGlyphs) + "]");
  if (num_context_classes < 2 || num_context_classes % 2 != 0)
    throw ConfigError("synthetic: num_context_classes must be even and at least 2");
  if (!(fidelity >= 0.0 && fidelity <= 1.0)) throw ConfigError("synthetic: fidelity must lie in [0, 1]");
  if (!(context_purity >= 0.5 && context_purity <= 1.0))
    throw ConfigError("synthetic: context_purity must lie in [0.5, 1]");
  if (scene_side < 8) throw ConfigError("synthetic: scene_side must be at least 8");
  if (grid_cells < 1 || grid_cells > scene_side) throw ConfigError("synthetic: grid_cells must lie in [1, scene_side]");
  if (!(stripe_amplitude >= 0.0 && stripe_amplitude <= 0.5))
    throw ConfigError("synthetic: stripe_amplitude must lie in [0, 0.5]");
  if (object_min < 2 || object_min > object_max || object_max > scene_side)
    throw ConfigError("synthetic: need 2 <= object_min <= object_max <= scene_side");
}

std::vector<std::string> synthetic_category_names(const SyntheticConfig& cfg) {
  static const char* const kGlyphs[kMaxGlyphs] = {"disk", "plus", "triangle", "ring", "square", "cross", "bar", "diamond"};
  std::vector<std::string> names;
  for (std::size_t p = 0; p < cfg.num_pairs; ++p)
    for (const char* member : {"a", "b"}) names.push_back(std::string(kGlyphs[p]) + "_" + member);
  return names;
}

std::size_t superclass_of(const SyntheticConfig& cfg, std::size_t context_class) {
  return context_class < cfg.num_context_classes / 2 ? 0 : 1;
}

std::size_t preferred_member(std::size_t pair, std::size_t superclass) { return (pair + superclass) % 2; }

namespace {

using Rgb = std::array<double, 3>;

// Warm palette for superclass 0, cool palette for superclass 1.
constexpr std::array<std::array<Rgb, 3>, 2> kPalettes{{
    {{{0.86, 0.42, 0.22}, {0.80, 0.62, 0.20}, {0.74, 0.30, 0.36}}},
    {{{0.22, 0.42, 0.86}, {0.20, 0.66, 0.70}, {0.36, 0.32, 0.80}}},
}};

// Whether normalized tile coordinate (u, v) in [0,1)^2 is inked for `glyph`.
bool glyph_ink(std::size_t glyph, double u, double v) {
  const double dx = u - 0.5, dy = v - 0.5;
  const double r = std::sqrt(dx * dx + dy * dy);
  switch (glyph) {
    case 0:  // disk
      return r < 0.34;
    case 1:  // plus
      return (std::fabs(dx) < 0.11 && std::fabs(dy) < 0.38) || (std::fabs(dy) < 0.11 && std::fabs(dx) < 0.38);
    case 2:  // triangle, apex up
      return v > 0.18 && v < 0.82 && std::fabs(dx) < 0.36 * (v - 0.18) / 0.64;
    case 3:  // ring
      return r > 0.22 && r < 0.38;
    case 4:  // square outline
      return std::max(std::fabs(dx), std::fabs(dy)) < 0.36 && std::max(std::fabs(dx), std::fabs(dy)) > 0.22;
    case 5:  // diagonal cross
      return (std::fabs(dx - dy) < 0.14 || std::fabs(dx + dy) < 0.14) && r < 0.42;
    case 6:  // horizontal bar
      return std::fabs(dy) < 0.13 && std::fabs(dx) < 0.40;
    default:  // diamond
      return std::fabs(dx) + std::fabs(dy) < 0.36;
  }
}

std::uint64_t split_tag(const std::string& split) { return stream_id_for(("synthetic." + split).c_str()); }

}  // namespace

SceneSample synthetic_sample(const SyntheticConfig& cfg, const std::string& split, std::size_t index) {
  SeededRng rng(cfg.seed, SeededRng::mix64(split_tag(split) + index));
  const std::size_t side = cfg.scene_side;
  SceneSample s;
  s.image = Image8(side, side);

  const std::size_t g = static_cast<std::size_t>(rng.uniform_index(cfg.num_context_classes));
  const std::size_t sc = superclass_of(cfg, g);
  const std::size_t pair = static_cast<std::size_t>(rng.uniform_index(cfg.num_pairs));
  const std::size_t member =
      rng.bernoulli(cfg.fidelity) ? preferred_member(pair, sc) : static_cast<std::size_t>(rng.uniform_index(2));
  s.category = 2 * pair + member;
  s.scene_class = static_cast<std::int64_t>(g);
  s.scene_superclass = static_cast<std::int64_t>(sc);

  // Background cells.
  const std::size_t cells = cfg.grid_cells;
  std::vector<Rgb> cell_color(cells * cells);
  for (auto& color : cell_color) {
    const std::size_t palette = rng.bernoulli(cfg.context_purity) ? sc : 1 - sc;
    const Rgb& base = kPalettes[palette][rng.uniform_index(3)];
    for (std::size_t c = 0; c < 3; ++c) color[c] = base[c] + rng.uniform(-0.05, 0.05);
  }

  // Stripes: orientation and frequency come from the class index within the
  // superclass; the phase is per scene.
  const std::size_t per_super = cfg.num_context_classes / 2;
  const std::size_t within = g % per_super;
  const double angle = std::numbers::pi * static_cast<double>(within) / static_cast<double>(per_super);
  const double period = 6.0 + 4.0 * static_cast<double>(within % 3);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ca = std::cos(angle), sa = std::sin(angle);

  for (std::size_t y = 0; y < side; ++y) {
    const std::size_t cy = y * cells / side;
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t cx = x * cells / side;
      const Rgb& color = cell_color[cy * cells + cx];
      const double t = (static_cast<double>(x) * ca + static_cast<double>(y) * sa) / period;
      const double stripe = cfg.stripe_amplitude * std::sin(2.0 * std::numbers::pi * t + phase);
      for (std::size_t c = 0; c < 3; ++c) s.image.set(x, y, c, to_byte(color[c] + stripe));
    }
  }

  // Object tile.
  const double log_lo = std::log(static_cast<double>(cfg.object_min));
  const double log_hi = std::log(static_cast<double>(cfg.object_max));
  const double size = std::exp(rng.uniform(log_lo, log_hi));
  const double aspect = std::exp(rng.uniform(-0.2, 0.2));
  auto extent = [&](double v) {
    return static_cast<std::int64_t>(std::clamp(std::round(v), static_cast<double>(cfg.object_min),
                                                static_cast<double>(cfg.object_max)));
  };
  const std::int64_t w = extent(size * aspect);
  const std::int64_t h = extent(size / aspect);
  const auto sx = static_cast<std::int64_t>(side);
  const std::int64_t x0 = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(sx - w + 1)));
  const std::int64_t y0 = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(sx - h + 1)));
  s.bbox = Rect{x0, y0, w, h};
  for (std::int64_t y = 0; y < h; ++y) {
    const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
    for (std::int64_t x = 0; x < w; ++x) {
      const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(w);
      const std::uint8_t level = glyph_ink(pair, u, v) ? 15 : 128;
      for (std::size_t c = 0; c < 3; ++c)
        s.image.set(static_cast<std::size_t>(x0 + x), static_cast<std::size_t>(y0 + y), c, level);
    }
  }
  return s;
}

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  SyntheticDataset d;
  d.train.reserve(cfg.train_count);
  d.test.reserve(cfg.test_count);
  for (std::size_t i = 0; i < cfg.train_count; ++i) d.train.push_back(synthetic_sample(cfg, "train", i));
  for (std::size_t i = 0; i < cfg.test_count; ++i) d.test.push_back(synthetic_sample(cfg, "test", i));
  return d;
}

}  // namespace gist

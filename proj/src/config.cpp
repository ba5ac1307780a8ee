#include "gistnet/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gist {

using Json = nlohmann::ordered_json;

GistNetConfig RunConfig::network() const {
  GistNetConfig cfg = model.base == "full" ? GistNetConfig::full_scale() : GistNetConfig::desk();
  cfg.fovea.num_classes = model.num_classes;
  return model.scale == 1.0 ? cfg : cfg.scaled(model.scale);
}

Model RunConfig::describe_model() const {
  const GistNetConfig cfg = network();
  return model.kind == "fovea" ? describe_fovea(cfg.fovea) : describe_gistnet(cfg);
}

ConfigDigest RunConfig::model_digest() const {
  const GistNetConfig cfg = network();
  Json j;
  j["kind"] = model.kind;
  j["fovea"] = {{"channels", cfg.fovea.channels}, {"side", cfg.fovea.side},   {"conv_plan", cfg.fovea.conv_plan},
                {"kernel", cfg.fovea.kernel},     {"fc1", cfg.fovea.fc1},     {"fc2", cfg.fovea.fc2},
                {"num_classes", cfg.fovea.num_classes}};
  if (model.kind != "fovea") {
    Json layers = Json::array();
    for (const auto& l : cfg.periphery.layers) layers.push_back({l.out_channels, l.kernel, l.stride});
    j["periphery"] = {{"channels", cfg.periphery.channels}, {"side", cfg.periphery.side}, {"layers", layers}};
  }
  return sha256_digest(j.dump());
}

TrainConfig RunConfig::train_config() const {
  if (!train.seed) throw ConfigError("train.seed is required");
  TrainConfig c = train.config;
  c.seed = *train.seed;
  return c;
}

void RunConfig::validate() const {
  if (model.kind != "gistnet" && model.kind != "fovea")
    throw ConfigError("model.kind must be \"gistnet\" or \"fovea\", got \"" + model.kind + "\"");
  if (model.base != "desk" && model.base != "full")
    throw ConfigError("model.base must be \"desk\" or \"full\", got \"" + model.base + "\"");
  if (!(model.scale > 0.0)) throw ConfigError("model.scale must be positive");
  if (model.num_classes < 2) throw ConfigError("model.num_classes must be at least 2");
  network().validate();
  if (!train.seed) throw ConfigError("train.seed is required");
  if (train.dtype != "float32" && train.dtype != "float64")
    throw ConfigError("train.dtype must be \"float32\" or \"float64\"");
  train_config().validate();
  data.synthetic.validate();
  for (const std::string* p : {&data.train_manifest, &data.test_manifest})
    if (!p->empty() && !std::filesystem::exists(*p)) throw IoError("manifest not found: " + *p);
  if (eval.ks.empty()) throw ConfigError("eval.ks must not be empty");
  for (std::size_t k : eval.ks)
    if (k == 0 || k > model.num_classes)
      throw ConfigError("eval.ks entry " + std::to_string(k) + " outside [1, num_classes]");
  if (eval.blur_levels < 1) throw ConfigError("eval.blur_levels must be at least 1");
  if (!(eval.blur_step > 0.0)) throw ConfigError("eval.blur_step must be positive");
  if (eval.ratio_bins < 1) throw ConfigError("eval.ratio_bins must be at least 1");
  if (!(eval.probe.train_fraction > 0.0 && eval.probe.train_fraction < 1.0))
    throw ConfigError("eval.probe.train_fraction must lie in (0, 1)");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

RunConfig preset_config(const std::string& preset) {
  RunConfig c;
  if (preset == "desk") return c;
  if (preset != "paper") throw ConfigError("unknown preset \"" + preset + "\" (expected desk or paper)");
  c.model.base = "full";
  c.model.num_classes = 80;
  c.train.config.adam.learning_rate = 1e-6;
  return c;
}

namespace {

Json to_json(const RunConfig& c) {
  const auto& t = c.train.config;
  const auto& s = c.data.synthetic;
  Json j;
  j["model"] = {{"kind", c.model.kind}, {"base", c.model.base}, {"scale", c.model.scale},
                {"num_classes", c.model.num_classes}};
  j["train"] = {{"seed", c.train.seed ? Json(*c.train.seed) : Json(nullptr)},
                {"dtype", c.train.dtype},
                {"learning_rate", t.adam.learning_rate},
                {"beta1", t.adam.beta1},
                {"beta2", t.adam.beta2},
                {"epsilon", t.adam.epsilon},
                {"batch_size", t.batch_size},
                {"epochs", t.epochs},
                {"max_iterations", t.max_iterations},
                {"checkpoint_every", c.train.checkpoint_every},
                {"crop_margin", t.input.crop_margin}};
  j["data"] = {{"train_manifest", c.data.train_manifest},
               {"test_manifest", c.data.test_manifest},
               {"synthetic",
                {{"num_pairs", s.num_pairs},
                 {"num_context_classes", s.num_context_classes},
                 {"fidelity", s.fidelity},
                 {"context_purity", s.context_purity},
                 {"scene_side", s.scene_side},
                 {"grid_cells", s.grid_cells},
                 {"stripe_amplitude", s.stripe_amplitude},
                 {"object_min", s.object_min},
                 {"object_max", s.object_max},
                 {"train_count", s.train_count},
                 {"test_count", s.test_count},
                 {"seed", s.seed}}}};
  j["eval"] = {{"ks", c.eval.ks},
               {"blur_levels", c.eval.blur_levels},
               {"blur_step", c.eval.blur_step},
               {"ratio_bins", c.eval.ratio_bins},
               {"limit", c.eval.limit},
               {"embedding_samples", c.eval.embedding_samples},
               {"perplexity", c.eval.perplexity},
               {"tsne_iterations", c.eval.tsne_iterations},
               {"probe",
                {{"train_fraction", c.eval.probe.train_fraction},
                 {"epochs", c.eval.probe.epochs},
                 {"learning_rate", c.eval.probe.learning_rate},
                 {"seed", c.eval.probe.seed}}},
               {"saliency_samples", c.eval.saliency_samples}};
  j["output_dir"] = c.output_dir;
  return j;
}

// Every key of `input` must exist in `reference`, recursively for objects.
void check_keys(const Json& input, const Json& reference, const std::string& path) {
  if (!input.is_object()) {
    if (reference.is_object()) throw ConfigError("config key \"" + path + "\" must be an object");
    return;
  }
  if (!reference.is_object()) throw ConfigError("config key \"" + path + "\" must not be an object");
  for (const auto& [key, value] : input.items()) {
    const std::string sub = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw ConfigError("unknown config key \"" + sub + "\"");
    check_keys(value, reference[key], sub);
  }
}

template <typename U>
void read(const Json& j, const char* key, U& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<U>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key \"" + path + "." + key + "\" has the wrong type: " + j.at(key).dump());
  }
}

RunConfig from_json(const Json& j, RunConfig c) {
  check_keys(j, to_json(c), "");
  if (j.contains("model")) {
    const Json& m = j["model"];
    read(m, "kind", c.model.kind, "model");
    read(m, "base", c.model.base, "model");
    read(m, "scale", c.model.scale, "model");
    read(m, "num_classes", c.model.num_classes, "model");
  }
  if (j.contains("train")) {
    const Json& t = j["train"];
    auto& tc = c.train.config;
    if (t.contains("seed")) {
      if (t["seed"].is_null())
        c.train.seed.reset();
      else {
        std::uint64_t seed = 0;
        read(t, "seed", seed, "train");
        c.train.seed = seed;
      }
    }
    read(t, "dtype", c.train.dtype, "train");
    read(t, "learning_rate", tc.adam.learning_rate, "train");
    read(t, "beta1", tc.adam.beta1, "train");
    read(t, "beta2", tc.adam.beta2, "train");
    read(t, "epsilon", tc.adam.epsilon, "train");
    read(t, "batch_size", tc.batch_size, "train");
    read(t, "epochs", tc.epochs, "train");
    read(t, "max_iterations", tc.max_iterations, "train");
    read(t, "checkpoint_every", c.train.checkpoint_every, "train");
    read(t, "crop_margin", tc.input.crop_margin, "train");
  }
  if (j.contains("data")) {
    const Json& d = j["data"];
    read(d, "train_manifest", c.data.train_manifest, "data");
    read(d, "test_manifest", c.data.test_manifest, "data");
    if (d.contains("synthetic")) {
      const Json& s = d["synthetic"];
      auto& sc = c.data.synthetic;
      const std::string p = "data.synthetic";
      read(s, "num_pairs", sc.num_pairs, p);
      read(s, "num_context_classes", sc.num_context_classes, p);
      read(s, "fidelity", sc.fidelity, p);
      read(s, "context_purity", sc.context_purity, p);
      read(s, "scene_side", sc.scene_side, p);
      read(s, "grid_cells", sc.grid_cells, p);
      read(s, "stripe_amplitude", sc.stripe_amplitude, p);
      read(s, "object_min", sc.object_min, p);
      read(s, "object_max", sc.object_max, p);
      read(s, "train_count", sc.train_count, p);
      read(s, "test_count", sc.test_count, p);
      read(s, "seed", sc.seed, p);
    }
  }
  if (j.contains("eval")) {
    const Json& e = j["eval"];
    read(e, "ks", c.eval.ks, "eval");
    read(e, "blur_levels", c.eval.blur_levels, "eval");
    read(e, "blur_step", c.eval.blur_step, "eval");
    read(e, "ratio_bins", c.eval.ratio_bins, "eval");
    read(e, "limit", c.eval.limit, "eval");
    read(e, "embedding_samples", c.eval.embedding_samples, "eval");
    read(e, "perplexity", c.eval.perplexity, "eval");
    read(e, "tsne_iterations", c.eval.tsne_iterations, "eval");
    read(e, "saliency_samples", c.eval.saliency_samples, "eval");
    if (e.contains("probe")) {
      const Json& p = e["probe"];
      read(p, "train_fraction", c.eval.probe.train_fraction, "eval.probe");
      read(p, "epochs", c.eval.probe.epochs, "eval.probe");
      read(p, "learning_rate", c.eval.probe.learning_rate, "eval.probe");
      read(p, "seed", c.eval.probe.seed, "eval.probe");
    }
  }
  read(j, "output_dir", c.output_dir, "");
  return c;
}

Json parse_json(const std::string& text, const std::string& source) {
  try {
    Json j = Json::parse(text);
    if (!j.is_object()) throw ConfigError(source + ": config must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override \"" + assignment + "\" must look like section.key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  Json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key \"" + key + "\" has an empty component");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    Json& next = (*node)[part];
    if (next.is_null()) next = Json::object();
    if (!next.is_object()) throw ConfigError("override key \"" + key + "\": \"" + part + "\" is not a section");
    node = &next;
    start = dot + 1;
  }
}

}  // namespace

std::string serialize_run_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

RunConfig resolve_run_config(const std::string& preset, const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides) {
  const RunConfig base = preset_config(preset);
  Json doc = Json::object();
  if (file) {
    std::ifstream f(*file);
    if (!f) throw IoError("cannot open config " + file->string());
    std::ostringstream ss;
    ss << f.rdbuf();
    doc = parse_json(ss.str(), file->string());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc, base);
}

RunConfig parse_run_config(const std::string& text, const std::string& source, const std::string& preset) {
  return from_json(parse_json(text, source), preset_config(preset));
}

}  // namespace gist

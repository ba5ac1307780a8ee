#include "gistnet/commands.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace gist {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<std::size_t> labels_of(const std::vector<SceneSample>& data) {
  std::vector<std::size_t> labels;
  labels.reserve(data.size());
  for (const auto& s : data) labels.push_back(s.category);
  return labels;
}

std::vector<SceneSample> limited(std::vector<SceneSample> data, std::size_t limit) {
  if (limit && data.size() > limit) data.resize(limit);
  return data;
}

Json probe_json(const ProbeResult& p) {
  return {{"train_accuracy", p.train_accuracy}, {"test_accuracy", p.test_accuracy}, {"num_classes", p.num_classes},
          {"n_train", p.n_train},               {"n_test", p.n_test}};
}

std::string coords_csv(const Tensor64& coords, const std::vector<std::size_t>& superclass,
                       const std::vector<std::size_t>& category) {
  std::string out = "x,y,superclass,category\n";
  char line[128];
  for (std::size_t i = 0; i < superclass.size(); ++i) {
    std::snprintf(line, sizeof line, "%.9g,%.9g,%zu,%zu\n", coords[2 * i], coords[2 * i + 1], superclass[i],
                  category[i]);
    out += line;
  }
  return out;
}

}  // namespace

DataBundle load_data(const RunConfig& config, bool need_train, bool need_test) {
  DataBundle b;
  const bool from_disk = !config.data.train_manifest.empty() || !config.data.test_manifest.empty();
  if (!from_disk) {
    SyntheticConfig s = config.data.synthetic;
    if (!need_train) s.train_count = 0;
    if (!need_test) s.test_count = 0;
    SyntheticDataset d = generate_synthetic(s);
    b.train = std::move(d.train);
    b.test = std::move(d.test);
    b.category_names = synthetic_category_names(s);
  } else {
    auto read = [&](const std::string& path, std::vector<SceneSample>& out, const char* split) {
      if (path.empty()) throw ConfigError(std::string("data.") + split + "_manifest is required for this command");
      ManifestReader reader{fs::path(path)};
      out = reader.load_all();
      std::vector<std::string> names;
      for (const auto& c : reader.manifest().categories) names.push_back(c.name);
      if (!b.category_names.empty() && b.category_names != names)
        throw ValidationError("train and test manifests list different categories");
      b.category_names = std::move(names);
    };
    if (need_train) read(config.data.train_manifest, b.train, "train");
    if (need_test) read(config.data.test_manifest, b.test, "test");
  }
  if (b.category_names.size() != config.model.num_classes)
    throw ValidationError("data has " + std::to_string(b.category_names.size()) +
                          " categories but model.num_classes is " + std::to_string(config.model.num_classes));
  return b;
}

GenDataResult cmd_gen_data(const RunConfig& config) {
  config.data.synthetic.validate();
  const SyntheticConfig& s = config.data.synthetic;
  const fs::path dir = fs::path(config.output_dir) / "data";
  ensure_dir(dir);
  const SyntheticDataset d = generate_synthetic(s);
  const auto names = synthetic_category_names(s);
  write_dataset(dir, "train.json", "train", d.train, names);
  write_dataset(dir, "test.json", "test", d.test, names);
  Json report{{"train_count", d.train.size()},
              {"test_count", d.test.size()},
              {"num_classes", names.size()},
              {"fidelity", s.fidelity},
              {"context_purity", s.context_purity},
              {"seed", s.seed},
              {"categories", names}};
  GenDataResult r{dir / "train.json", dir / "test.json", dir / "gen_report.json", d.train.size(), d.test.size()};
  write_text(r.report, report.dump(2) + "\n");
  return r;
}

RunConfig with_kind(const RunConfig& config, const std::string& kind) {
  RunConfig c = config;
  c.model.kind = kind;
  return c;
}

TrainOutcome cmd_train(const RunConfig& config, std::ostream* progress) {
  config.validate();
  if (config.train.dtype != "float32")
    throw ConfigError("training runs in float32; float64 is only used by gradcheck");
  if (config.model.base == "full" && progress)
    *progress << "warning: the full-scale preset is meant for shape and parameter checks, not desk training\n";
  const fs::path out = config.output_dir;
  ensure_dir(out);
  const DataBundle data = load_data(config, true, false);
  const Model model = config.describe_model();
  const TrainConfig tc = config.train_config();
  ModelParams<float> init = init_model_params<float>(model.parameterized_layers(), tc.seed);
  const ConfigDigest digest = config.model_digest();
  const std::string kind = config.model.kind;

  auto on_step = [&](const TrainLogRow& row, const ModelParams<float>& params) {
    if (progress && (row.iteration % 25 == 0 || row.iteration == 1))
      *progress << kind << " iteration " << row.iteration << " epoch " << row.epoch << " loss " << row.loss
                << " batch_acc " << row.batch_accuracy << "\n";
    if (config.train.checkpoint_every && row.iteration % config.train.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_iter_%06zu.gstn", kind.c_str(), row.iteration);
      save_checkpoint(out / name, params_to_checkpoint(params, digest));
    }
  };
  TrainOutcome o;
  o.result = train_model(model, std::move(init), data.train, tc, on_step);
  o.checkpoint = out / (kind + ".gstn");
  save_checkpoint(o.checkpoint, params_to_checkpoint(o.result.params, digest));

  std::string log = "iteration,epoch,loss,batch_accuracy\n";
  char line[128];
  for (const auto& r : o.result.log) {
    std::snprintf(line, sizeof line, "%zu,%zu,%.9g,%.6g\n", r.iteration, r.epoch, r.loss, r.batch_accuracy);
    log += line;
  }
  o.log = out / (kind + "_train_log.csv");
  write_text(o.log, log);
  write_text(out / (kind + "_config.json"), serialize_run_config(config));
  return o;
}

ModelParams<float> load_params(const RunConfig& config, const fs::path& path, bool force) {
  const Checkpoint c = load_checkpoint(path);
  check_digest(c, config.model_digest(), force, path.string());
  return checkpoint_to_params(c, config.describe_model());
}

EvalOutcome cmd_eval(const RunConfig& config, const fs::path& checkpoint, const std::optional<fs::path>& baseline,
                     bool force) {
  config.validate();
  const fs::path out = config.output_dir;
  ensure_dir(out);
  const DataBundle data = load_data(config, false, true);
  const auto test = limited(data.test, config.eval.limit);
  const auto labels = labels_of(test);
  const InputSpec spec = config.train.config.input;

  const Model model = config.describe_model();
  const auto params = load_params(config, checkpoint, force);
  EvalOutcome o;
  o.report = make_report(predict_logits(model, params, test, spec), labels, model.num_classes, config.eval.ks,
                         data.category_names);
  if (baseline) {
    const RunConfig bc = with_kind(config, "fovea");
    const Model bm = bc.describe_model();
    const auto bp = load_params(bc, *baseline, force);
    const EvalReport base =
        make_report(predict_logits(bm, bp, test, spec), labels, bm.num_classes, config.eval.ks, data.category_names);
    compare_reports(o.report, base);
  }
  const std::string stem = "eval_" + config.model.kind;
  o.json = out / (stem + ".json");
  o.csv = out / (stem + "_per_category.csv");
  write_text(o.json, report_json(o.report));
  write_text(o.csv, report_csv(o.report));
  return o;
}

ExperimentsOutcome cmd_experiments(const RunConfig& config, const fs::path& gistnet_checkpoint,
                                   const fs::path& fovea_checkpoint, bool force, std::ostream* progress) {
  config.validate();
  for (const fs::path& p : {gistnet_checkpoint, fovea_checkpoint})
    if (p.empty() || !fs::exists(p)) throw ArgumentError("checkpoint not found: " + p.string());
  ExperimentsOutcome o;
  o.dir = fs::path(config.output_dir) / "experiments";
  ensure_dir(o.dir);
  auto note = [&](const std::string& msg) {
    if (progress) *progress << msg << "\n";
  };

  const RunConfig gc = with_kind(config, "gistnet"), fc = with_kind(config, "fovea");
  const Model gm = gc.describe_model(), fm = fc.describe_model();
  const auto gp = load_params(gc, gistnet_checkpoint, force);
  const auto fp = load_params(fc, fovea_checkpoint, force);
  const DataBundle data = load_data(config, false, true);
  const auto test = limited(data.test, config.eval.limit);
  const InputSpec spec = config.train.config.input;
  const std::size_t n = test.size();

  // Ratio curve from per-sample top-1 hits of both models.
  const auto g_logits = predict_logits(gm, gp, test, spec);
  const auto f_logits = predict_logits(fm, fp, test, spec);
  std::vector<double> ratios(n);
  std::vector<bool> g_hit(n), f_hit(n);
  std::size_t g_hits = 0, f_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ratios[i] = context_object_ratio(test[i]);
    g_hit[i] = topk_hit(g_logits[i], test[i].category, 1);
    f_hit[i] = topk_hit(f_logits[i], test[i].category, 1);
    g_hits += g_hit[i];
    f_hits += f_hit[i];
  }
  o.gistnet_accuracy = static_cast<double>(g_hits) / static_cast<double>(n);
  o.fovea_accuracy = static_cast<double>(f_hits) / static_cast<double>(n);
  o.ratio = ratio_curve(ratios, g_hit, f_hit, config.eval.ratio_bins);
  write_text(o.dir / "ratio_curve.csv", curve_csv(o.ratio));
  write_text(o.dir / "ratio_curve.svg", svg_line_plot({o.ratio}, "Context gain by context/object ratio"));
  note("ratio curve: " + std::to_string(o.ratio.points.size()) + " bins");

  // Blur sweep.
  const BlurSchedule schedule =
      BlurSchedule::linear(gm.context_input_shape()[1], config.eval.blur_levels, config.eval.blur_step);
  o.blur = blur_sweep(gm, gp, test, schedule, o.fovea_accuracy, 1, spec);
  write_text(o.dir / "blur_sweep.csv", curve_csv(o.blur.gistnet));
  write_text(o.dir / "blur_sweep.svg", svg_line_plot({o.blur.gistnet, o.blur.baseline}, "Accuracy under context blur"));
  note("blur sweep: " + std::to_string(o.blur.gistnet.points.size()) + " levels");

  // Embedding analyses on the first samples.
  const auto emb_data = limited(test, config.eval.embedding_samples);
  const EmbeddingSet fe = fovea_embeddings(fm, fp, emb_data, spec);
  const EmbeddingSet pe = periphery_embeddings(gm, gp, emb_data);
  o.probe_fovea = linear_probe(fe.features, fe.superclass, config.eval.probe);
  o.probe_periphery = linear_probe(pe.features, pe.superclass, config.eval.probe);
  Json probe{{"label", "scene_superclass"},
             {"fovea", probe_json(o.probe_fovea)},
             {"periphery", probe_json(o.probe_periphery)}};
  write_text(o.dir / "probe.json", probe.dump(2) + "\n");
  note("probe: fovea " + std::to_string(o.probe_fovea.test_accuracy) + " periphery " +
       std::to_string(o.probe_periphery.test_accuracy));

  TsneOptions topt;
  topt.perplexity = config.eval.perplexity;
  topt.iterations = config.eval.tsne_iterations;
  topt.seed = config.train.seed.value_or(0);
  Json tsne = Json::object();
  for (const EmbeddingSet* set : {&fe, &pe}) {
    const bool periphery = set->source == EmbeddingSource::kPeriphery;
    const std::string tag = periphery ? "periphery" : "fovea";
    TsneResult r = tsne_2d(set->features, topt);
    const double centroid = nearest_centroid_accuracy(r.coords, set->superclass);
    write_text(o.dir / ("tsne_" + tag + ".csv"), coords_csv(r.coords, set->superclass, set->category));
    write_text(o.dir / ("tsne_" + tag + ".svg"),
               svg_scatter(r.coords, set->superclass, "t-SNE of " + tag + " embeddings by scene superclass"));
    tsne[tag] = {{"n", set->superclass.size()},
                 {"perplexity", topt.perplexity},
                 {"nearest_centroid_accuracy", centroid},
                 {"final_kl", r.kl.empty() ? 0.0 : r.kl.back()},
                 {"kl_increases", r.kl_increases},
                 {"flagged", r.flagged}};
    if (periphery) {
      o.tsne_periphery = std::move(r);
      o.tsne_periphery_centroid = centroid;
    }
  }
  write_text(o.dir / "tsne.json", tsne.dump(2) + "\n");
  note("t-SNE done");

  // Saliency maps of the true class for selected samples.
  for (std::size_t idx : config.eval.saliency_samples) {
    if (idx >= n) continue;
    const SaliencyMaps maps = saliency_map(gm, gp, prepare_input(gm, test[idx], spec), test[idx].category);
    const std::string stem = "saliency_" + std::to_string(idx);
    write_text(o.dir / (stem + "_fovea.svg"), svg_heatmap(maps.fovea, "Saliency, object stream, sample " +
                                                                          std::to_string(idx)));
    if (maps.context)
      write_text(o.dir / (stem + "_context.svg"),
                 svg_heatmap(*maps.context, "Saliency, context stream, sample " + std::to_string(idx)));
  }

  Json summary{{"n", n},
               {"gistnet_top1", o.gistnet_accuracy},
               {"fovea_top1", o.fovea_accuracy},
               {"blur_max_sigma", o.blur.gistnet.points.back().x},
               {"blur_max_sigma_top1", o.blur.gistnet.points.back().y},
               {"probe_fovea_test", o.probe_fovea.test_accuracy},
               {"probe_periphery_test", o.probe_periphery.test_accuracy},
               {"tsne_periphery_centroid", o.tsne_periphery_centroid}};
  write_text(o.dir / "summary.json", summary.dump(2) + "\n");
  return o;
}

GradcheckOutcome cmd_gradcheck(const RunConfig& config, const GradCheckOptions& options) {
  const fs::path out = config.output_dir;
  ensure_dir(out);
  const std::uint64_t seed = config.train.seed.value_or(0);
  GradcheckOutcome o;
  o.cases = layer_gradchecks(options, seed);
  o.cases.push_back(gistnet_gradcheck(config.network(), options, seed));
  Json cases = Json::array();
  for (const auto& c : o.cases) {
    o.passed = o.passed && c.report.passed;
    Json rows = Json::array();
    for (const auto& r : c.report.rows)
      rows.push_back({{"tensor", r.tensor},
                      {"checked", r.checked},
                      {"kinks", r.kinks},
                      {"max_rel_err", r.max_rel_err},
                      {"max_abs_err", r.max_abs_err},
                      {"passed", r.passed}});
    cases.push_back({{"name", c.name},
                     {"passed", c.report.passed},
                     {"max_rel_err", c.report.max_rel_err},
                     {"worst_tensor", c.report.worst_tensor()},
                     {"tensors", rows}});
  }
  Json report{{"tolerance", options.tolerance}, {"epsilon", options.epsilon}, {"passed", o.passed}, {"cases", cases}};
  o.report = out / "gradcheck.json";
  write_text(o.report, report.dump(2) + "\n");
  return o;
}

}  // namespace gist

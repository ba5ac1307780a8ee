#include "gistnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "gistnet/optim.hpp"

namespace gist {

// ---------------------------------------------------------------------------
// Accuracy

bool topk_hit(const Tensor& logits, std::size_t label, std::size_t k) {
  const auto top = topk_indices(logits, k);
  return std::find(top.begin(), top.end(), label) != top.end();
}

namespace {

void check_rows(const std::vector<Tensor>& logits, const std::vector<std::size_t>& labels, std::size_t k,
                const char* what) {
  if (logits.size() != labels.size())
    throw ArgumentError(std::string(what) + ": " + std::to_string(logits.size()) + " logit rows but " +
                        std::to_string(labels.size()) + " labels");
  if (logits.empty()) throw ArgumentError(std::string(what) + ": no rows");
  if (k == 0 || k > logits.front().size())
    throw ArgumentError(std::string(what) + ": k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(logits.front().size()) + "]");
}

}  // namespace

double topk_accuracy(const std::vector<Tensor>& logits, const std::vector<std::size_t>& labels, std::size_t k) {
  check_rows(logits, labels, k, "topk_accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) hits += topk_hit(logits[i], labels[i], k) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(logits.size());
}

Interval wilson_interval(std::size_t successes, std::size_t n, double z) {
  if (n == 0) throw ArgumentError("wilson_interval: n must be positive");
  if (successes > n) throw ArgumentError("wilson_interval: successes exceed n");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  // Clamp the rounding slop at the extremes so p stays inside.
  return {std::clamp(std::min(center - half, p), 0.0, 1.0), std::clamp(std::max(center + half, p), 0.0, 1.0)};
}

CategoryTable per_category_ci(const std::vector<Tensor>& logits, const std::vector<std::size_t>& labels,
                              std::size_t num_classes, std::size_t k, double z,
                              const std::vector<std::string>& names) {
  check_rows(logits, labels, k, "per_category_ci");
  std::vector<std::size_t> count(num_classes, 0), hits(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes)
      throw ArgumentError("per_category_ci: label " + std::to_string(labels[i]) + " outside [0, " +
                          std::to_string(num_classes) + ")");
    ++count[labels[i]];
    if (topk_hit(logits[i], labels[i], k)) ++hits[labels[i]];
  }
  CategoryTable table;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (count[c] == 0) {
      table.empty.push_back(c);
      continue;
    }
    const Interval ci = wilson_interval(hits[c], count[c], z);
    table.rows.push_back({c, c < names.size() ? names[c] : std::to_string(c), count[c],
                          static_cast<double>(hits[c]) / static_cast<double>(count[c]), ci.low, ci.high});
  }
  return table;
}

EvalReport make_report(const std::vector<Tensor>& logits, const std::vector<std::size_t>& labels,
                       std::size_t num_classes, const std::vector<std::size_t>& ks,
                       const std::vector<std::string>& names, double z) {
  EvalReport r;
  r.n = labels.size();
  r.num_classes = num_classes;
  for (std::size_t k : ks) r.topk[k] = topk_accuracy(logits, labels, k);
  CategoryTable table = per_category_ci(logits, labels, num_classes, 1, z, names);
  r.per_category = std::move(table.rows);
  r.empty_categories = std::move(table.empty);
  return r;
}

void compare_reports(EvalReport& report, const EvalReport& baseline) {
  if (report.num_classes != baseline.num_classes)
    throw ArgumentError("compare_reports: class counts differ (" + std::to_string(report.num_classes) + " vs " +
                        std::to_string(baseline.num_classes) + ")");
  std::vector<double> base(baseline.num_classes, std::numeric_limits<double>::quiet_NaN());
  for (const auto& row : baseline.per_category) base[row.category] = row.accuracy;
  report.category_delta.clear();
  std::size_t improved = 0;
  for (const auto& row : report.per_category) {
    const double delta = row.accuracy - base[row.category];
    report.category_delta.push_back(delta);
    if (delta > 0.0) ++improved;
  }
  report.improved_category_count = improved;
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["n"] = report.n;
  j["num_classes"] = report.num_classes;
  nlohmann::ordered_json topk = nlohmann::ordered_json::object();
  for (const auto& [k, acc] : report.topk) topk[std::to_string(k)] = acc;
  j["topk"] = topk;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.per_category.size(); ++i) {
    const auto& row = report.per_category[i];
    nlohmann::ordered_json r{{"category", row.category}, {"name", row.name},     {"n", row.n},
                             {"accuracy", row.accuracy}, {"ci_low", row.ci_low}, {"ci_high", row.ci_high}};
    if (i < report.category_delta.size()) r["delta"] = report.category_delta[i];
    rows.push_back(std::move(r));
  }
  j["per_category"] = rows;
  j["empty_categories"] = report.empty_categories;
  if (report.improved_category_count) j["improved_category_count"] = *report.improved_category_count;
  return j.dump(2) + "\n";
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  const bool delta = !report.category_delta.empty();
  std::ostringstream os;
  os << "category,name,n,accuracy,ci_low,ci_high" << (delta ? ",delta" : "") << "\n";
  for (std::size_t i = 0; i < report.per_category.size(); ++i) {
    const auto& r = report.per_category[i];
    os << r.category << ',' << csv_field(r.name) << ',' << r.n << ',' << fmt(r.accuracy) << ',' << fmt(r.ci_low)
       << ',' << fmt(r.ci_high);
    if (delta) os << ',' << fmt(report.category_delta[i]);
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Curves

std::string curve_csv(const CurveSeries& curve) {
  std::ostringstream os;
  os << "x,y,n\n";
  for (const auto& p : curve.points) os << fmt(p.x) << ',' << fmt(p.y) << ',' << p.n << "\n";
  return os.str();
}

CurveSeries ratio_curve(const std::vector<double>& ratios, const std::vector<bool>& hit_context,
                        const std::vector<bool>& hit_minimal, std::size_t num_bins, std::size_t min_count) {
  if (ratios.size() != hit_context.size() || ratios.size() != hit_minimal.size())
    throw ArgumentError("ratio_curve: ratios and result sets must have equal length");
  if (ratios.empty()) throw ArgumentError("ratio_curve: no samples");
  if (num_bins == 0) throw ArgumentError("ratio_curve: num_bins must be at least 1");
  if (min_count == 0) throw ArgumentError("ratio_curve: min_count must be at least 1");

  std::vector<double> lr(ratios.size());
  for (std::size_t i = 0; i < ratios.size(); ++i) lr[i] = std::log10(std::max(ratios[i], 1e-6));
  const auto [lo_it, hi_it] = std::minmax_element(lr.begin(), lr.end());
  const double lo = *lo_it, hi = *hi_it;

  CurveSeries out{"context gain", "log10(context/object ratio)", "top-1 gain", {}};
  struct Acc {
    std::size_t n = 0;
    long diff = 0;
  };
  const std::size_t bins = hi > lo ? num_bins : 1;
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 0.0;
  std::vector<Acc> acc(bins);
  for (std::size_t i = 0; i < lr.size(); ++i) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((lr[i] - lo) / width) : 0;
    b = std::min(b, bins - 1);
    ++acc[b].n;
    acc[b].diff += static_cast<long>(hit_context[i]) - static_cast<long>(hit_minimal[i]);
  }
  auto edge = [&](std::size_t b) { return b == bins ? hi : lo + width * static_cast<double>(b); };

  // Greedy left-to-right grouping; a short tail joins the previous group.
  struct Group {
    std::size_t first, last;
    Acc acc;
  };
  std::vector<Group> groups;
  Group cur{0, 0, {}};
  for (std::size_t b = 0; b < bins; ++b) {
    cur.last = b;
    cur.acc.n += acc[b].n;
    cur.acc.diff += acc[b].diff;
    if (cur.acc.n >= min_count) {
      groups.push_back(cur);
      cur = Group{b + 1, b + 1, {}};
    }
  }
  if (cur.acc.n > 0 || groups.empty()) {
    if (!groups.empty()) {
      groups.back().last = bins - 1;
      groups.back().acc.n += cur.acc.n;
      groups.back().acc.diff += cur.acc.diff;
    } else {
      cur.last = bins - 1;
      groups.push_back(cur);
    }
  } else if (!groups.empty()) {
    groups.back().last = bins - 1;
  }

  for (const auto& g : groups) {
    CurvePoint p;
    p.x_low = edge(g.first);
    p.x_high = edge(g.last + 1);
    p.x = 0.5 * (p.x_low + p.x_high);
    p.n = g.acc.n;
    p.y = static_cast<double>(g.acc.diff) / static_cast<double>(g.acc.n);
    out.points.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model-driven analyses

BlurSweep blur_sweep(const Model& model, const ModelParams<float>& params, const std::vector<SceneSample>& data,
                     const BlurSchedule& schedule, double baseline_accuracy, std::size_t k, const InputSpec& spec) {
  if (model.kind != ModelKind::kGistNet) throw ArgumentError("blur_sweep needs a GistNet model");
  if (data.empty()) throw ArgumentError("blur_sweep: empty data set");
  schedule.validate();
  const auto* head = std::get_if<Dense>(&model.head.spec);
  const LayerParams<float>& head_params = params.at(model.head.name);
  const std::size_t side = model.context_input_shape()[1];

  std::vector<std::size_t> hits(schedule.levels.size(), 0);
  for (const SceneSample& s : data) {
    const Tensor fovea = run_forward(model.fovea, params, crop_minimal_context(s, model.fovea_input_shape()[1],
                                                                               spec.crop_margin));
    const Tensor context = make_context_input(s, side);
    const Rect object = scaled_bbox(s, side);
    for (std::size_t j = 0; j < schedule.levels.size(); ++j) {
      const Tensor periphery = run_forward(model.periphery, params, blur_context(context, object, schedule.levels[j]));
      // Same fusion as forward(): periphery first, then fovea.
      auto [fused, unused_cache] = concat2_forward(periphery, fovea);
      auto [logits, unused_dense] = dense_forward(*head, head_params, fused);
      if (topk_hit(logits, s.category, k)) ++hits[j];
    }
  }
  BlurSweep out;
  out.gistnet = {"gistnet", "blur sigma (px)", "top-" + std::to_string(k) + " accuracy", {}};
  out.baseline = {"fovea only", out.gistnet.x_label, out.gistnet.y_label, {}};
  const double n = static_cast<double>(data.size());
  for (std::size_t j = 0; j < schedule.levels.size(); ++j) {
    const double x = schedule.levels[j];
    out.gistnet.points.push_back({x, static_cast<double>(hits[j]) / n, data.size(), x, x});
    out.baseline.points.push_back({x, baseline_accuracy, data.size(), x, x});
  }
  return out;
}

Tensor saliency_from_gradient(const Tensor& grad) {
  if (grad.rank() != 3) throw ShapeError("saliency: expected [C,H,W], got " + grad.shape().to_string());
  const std::size_t c = grad.dim(0), h = grad.dim(1), w = grad.dim(2), hw = h * w;
  std::vector<float> m(hw, 0.0f);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) m[i] = std::max(m[i], std::fabs(grad[ch * hw + i]));
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  const float min = *lo, range = *hi - *lo;
  for (float& v : m) v = range > 0.0f ? (v - min) / range : 0.0f;
  return Tensor(Shape{h, w}, std::move(m));
}

SaliencyMaps saliency_map(const Model& model, const ModelParams<float>& params, const ModelInput<float>& input,
                          std::size_t target) {
  if (target >= model.num_classes)
    throw ArgumentError("saliency_map: target " + std::to_string(target) + " outside [0, " +
                        std::to_string(model.num_classes) + ")");
  ModelTrace<float> trace;
  forward(model, params, input, &trace);
  Tensor onehot = Tensor::zeros(Shape{model.num_classes});
  onehot[target] = 1.0f;
  InputGradients<float> g = backward<float>(model, params, std::move(trace), onehot, nullptr, true);
  SaliencyMaps out{saliency_from_gradient(g.fovea), std::nullopt};
  if (g.context) out.context = saliency_from_gradient(*g.context);
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings

namespace {

Tensor64 stack_rows(const std::vector<Tensor>& rows) {
  const std::size_t d = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * d);
  for (const auto& r : rows) {
    for (float v : r.values()) data.push_back(static_cast<double>(v));
  }
  return Tensor64(Shape{rows.size(), d}, std::move(data));
}

void fill_labels(EmbeddingSet& set, const std::vector<SceneSample>& data) {
  for (const auto& s : data) {
    if (s.scene_superclass < 0) throw ArgumentError("embeddings: sample has no scene superclass");
    set.superclass.push_back(static_cast<std::size_t>(s.scene_superclass));
    set.category.push_back(s.category);
  }
}

}  // namespace

EmbeddingSet fovea_embeddings(const Model& model, const ModelParams<float>& params,
                              const std::vector<SceneSample>& data, const InputSpec& spec) {
  if (data.empty()) throw ArgumentError("fovea_embeddings: empty data set");
  std::vector<Tensor> rows;
  rows.reserve(data.size());
  for (const auto& s : data)
    rows.push_back(
        run_forward(model.fovea, params, crop_minimal_context(s, model.fovea_input_shape()[1], spec.crop_margin)));
  EmbeddingSet set{EmbeddingSource::kFovea, stack_rows(rows), {}, {}};
  fill_labels(set, data);
  return set;
}

EmbeddingSet periphery_embeddings(const Model& model, const ModelParams<float>& params,
                                  const std::vector<SceneSample>& data) {
  if (model.kind != ModelKind::kGistNet) throw ArgumentError("periphery_embeddings needs a GistNet model");
  if (data.empty()) throw ArgumentError("periphery_embeddings: empty data set");
  std::vector<Tensor> rows;
  rows.reserve(data.size());
  const std::size_t side = model.context_input_shape()[1];
  for (const auto& s : data) rows.push_back(run_forward(model.periphery, params, make_context_input(s, side)));
  EmbeddingSet set{EmbeddingSource::kPeriphery, stack_rows(rows), {}, {}};
  fill_labels(set, data);
  return set;
}

// ---------------------------------------------------------------------------
// t-SNE

namespace {

std::vector<double> squared_distances(const Tensor64& x) {
  if (x.rank() != 2) throw ShapeError("expected [n, d] points, got " + x.shape().to_string());
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        const double diff = x[i * d + t] - x[j * d + t];
        s += diff * diff;
      }
      dist[i * n + j] = dist[j * n + i] = s;
    }
  }
  return dist;
}

}  // namespace

Affinities perplexity_affinities(const Tensor64& points, double perplexity, double tolerance,
                                 std::size_t max_iterations) {
  if (!(perplexity > 0.0)) throw ArgumentError("perplexity must be positive");
  const std::size_t n = points.dim(0);
  if (n < 2) throw ArgumentError("perplexity_affinities: need at least 2 points");
  const std::vector<double> dist = squared_distances(points);
  Affinities out{Tensor64::zeros(Shape{n, n}), std::vector<double>(n), std::vector<std::size_t>(n)};
  std::vector<double> row(n);
  const double target = perplexity;

  for (std::size_t i = 0; i < n; ++i) {
    const double* d = dist.data() + i * n;
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, d[j]);

    double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    double perp = 0.0;
    std::size_t it = 0;
    for (;;) {
      // Shifting by the nearest distance leaves the normalized row unchanged
      // and keeps at least one term at exp(0).
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          row[j] = 0.0;
          continue;
        }
        const double shifted = d[j] - dmin;
        row[j] = std::exp(-beta * shifted);
        sum += row[j];
        weighted += shifted * row[j];
      }
      const double entropy_nats = std::log(sum) + beta * weighted / sum;
      perp = std::exp2(entropy_nats / std::numbers::ln2);
      ++it;
      if (std::fabs(perp - target) <= tolerance * target || it >= max_iterations) {
        for (std::size_t j = 0; j < n; ++j) out.conditional[i * n + j] = row[j] / sum;
        break;
      }
      if (perp > target) {
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
      } else {
        beta_hi = beta;
        beta = 0.5 * (beta + beta_lo);
      }
    }
    out.perplexity[i] = perp;
    out.iterations[i] = it;
  }
  return out;
}

TsneResult tsne_2d(const Tensor64& points, const TsneOptions& options) {
  if (points.rank() != 2) throw ShapeError("tsne_2d: expected [n, d] points, got " + points.shape().to_string());
  const std::size_t n = points.dim(0);
  if (n > 5000) throw ArgumentError("tsne_2d: exact method supports at most 5000 points, got " + std::to_string(n));
  const double max_perp = (static_cast<double>(n) - 1.0) / 3.0;
  if (!(options.perplexity >= 5.0 && options.perplexity <= max_perp))
    throw ArgumentError("tsne_2d: perplexity " + fmt(options.perplexity) + " outside [5, (n-1)/3 = " + fmt(max_perp) +
                        "]");
  if (!points.all_finite()) throw NumericError("tsne_2d: non-finite input");

  TsneResult result;
  Affinities aff = perplexity_affinities(points, options.perplexity);
  result.row_perplexity = aff.perplexity;

  std::vector<double> p(n * n);
  const double norm = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      p[i * n + j] =
          i == j ? 0.0 : std::max((aff.conditional[i * n + j] + aff.conditional[j * n + i]) * norm, 1e-12);

  SeededRng rng(options.seed, stream_id_for("tsne.init"));
  std::vector<double> y(n * 2), update(n * 2, 0.0), grad(n * 2), num(n * n);
  for (double& v : y) v = 1e-4 * rng.normal();

  for (std::size_t t = 0; t < options.iterations; ++t) {
    const bool early = t < options.exaggeration_iterations;
    const double exag = early ? options.exaggeration : 1.0;
    const double momentum = early ? options.momentum_initial : options.momentum_final;
    // The velocity built up under exaggeration belongs to a different
    // objective; carrying it over makes KL rise for the first few steps.
    if (t == options.exaggeration_iterations) std::fill(update.begin(), update.end(), 0.0);

    double zsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num[i * n + i] = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * n + j] = num[j * n + i] = q;
        zsum += 2.0 * q;
      }
    }
    if (!early) {
      double kl = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (i != j) kl += p[i * n + j] * std::log(p[i * n + j] * zsum / num[i * n + j]);
      result.kl.push_back(kl);
    }
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = (exag * p[i * n + j] - num[i * n + j] / zsum) * num[i * n + j];
        gx += w * (y[2 * i] - y[2 * j]);
        gy += w * (y[2 * i + 1] - y[2 * j + 1]);
      }
      // dKL/dy is 4x this; the step uses the unscaled sum, as the reference
      // exact implementation does, so lr 200 stays below the stability edge.
      grad[2 * i] = gx;
      grad[2 * i + 1] = gy;
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 2; ++c) {
        const std::size_t k = 2 * i + c;
        update[k] = momentum * update[k] - options.learning_rate * grad[k];
        y[2 * i + c] += update[2 * i + c];
      }
      mx += y[2 * i];
      my += y[2 * i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= mx;
      y[2 * i + 1] -= my;
    }
  }
  if (!std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); }))
    throw NumericError("tsne_2d: embedding diverged");

  for (std::size_t t = 1; t < result.kl.size(); ++t)
    if (result.kl[t] > result.kl[t - 1] + options.kl_tolerance) ++result.kl_increases;
  const std::size_t steps = result.kl.size() > 1 ? result.kl.size() - 1 : 0;
  result.flagged = steps > 0 && static_cast<double>(result.kl_increases) > 0.01 * static_cast<double>(steps);
  result.coords = Tensor64(Shape{n, 2}, std::move(y));
  return result;
}

double nearest_centroid_accuracy(const Tensor64& coords, const std::vector<std::size_t>& labels) {
  if (coords.rank() != 2 || coords.dim(0) != labels.size())
    throw ArgumentError("nearest_centroid_accuracy: coords and labels disagree");
  if (labels.empty()) throw ArgumentError("nearest_centroid_accuracy: no points");
  const std::size_t n = labels.size(), d = coords.dim(1);
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<double> centroid(classes * d, 0.0);
  std::vector<std::size_t> count(classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++count[labels[i]];
    for (std::size_t t = 0; t < d; ++t) centroid[labels[i] * d + t] += coords[i * d + t];
  }
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t t = 0; t < d; ++t)
      if (count[c]) centroid[c * d + t] /= static_cast<double>(count[c]);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) {
      if (!count[c]) continue;
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        const double diff = coords[i * d + t] - centroid[c * d + t];
        s += diff * diff;
      }
      if (s < best_dist) {
        best_dist = s;
        best = c;
      }
    }
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Linear probe

ProbeResult linear_probe(const Tensor64& features, const std::vector<std::size_t>& labels,
                         const ProbeOptions& options) {
  if (features.rank() != 2 || features.dim(0) != labels.size())
    throw ArgumentError("linear_probe: features and labels disagree");
  const std::size_t n = labels.size(), d = features.dim(1);
  if (n < 20) throw ArgumentError("linear_probe: need at least 20 rows, got " + std::to_string(n));
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0))
    throw ArgumentError("linear_probe: train_fraction must lie in (0, 1)");

  // Dense class ids in ascending label order.
  std::vector<std::size_t> distinct(labels);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw ArgumentError("linear_probe: need at least 2 classes");
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), labels[i]) - distinct.begin());
  const std::size_t classes = distinct.size();

  SeededRng rng(options.seed, stream_id_for("probe.split"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);
  std::size_t n_train = static_cast<std::size_t>(std::floor(options.train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  // Standardize with training statistics; constant columns keep unit scale.
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t r = 0; r < n_train; ++r)
    for (std::size_t t = 0; t < d; ++t) mean[t] += features[order[r] * d + t];
  for (double& m : mean) m /= static_cast<double>(n_train);
  for (std::size_t r = 0; r < n_train; ++r)
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = features[order[r] * d + t] - mean[t];
      sd[t] += diff * diff;
    }
  for (double& s : sd) {
    s = std::sqrt(s / static_cast<double>(n_train));
    if (!(s > 1e-12)) s = 1.0;
  }
  std::vector<Tensor64> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(d);
    for (std::size_t t = 0; t < d; ++t) v[t] = (features[i * d + t] - mean[t]) / sd[t];
    rows[i] = make_vector(std::move(v));
  }

  const Dense spec{d, classes};
  ModelParams<double> params;
  params.insert("probe", LayerParams<double>{Tensor64::zeros(Shape{d, classes}), Tensor64::zeros(Shape{classes})});
  AdamConfig adam;
  adam.learning_rate = options.learning_rate;
  AdamState<double> state = AdamState<double>::init(params, adam);
  const double inv = 1.0 / static_cast<double>(n_train);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    ModelParams<double> grads = params.zeros_like();
    LayerParams<double>& g = grads.at("probe");
    for (std::size_t r = 0; r < n_train; ++r) {
      const std::size_t i = order[r];
      auto [logits, cache] = dense_forward(spec, params.at("probe"), rows[i]);
      auto [loss, sm] = softmax_xent_forward(logits, y[i]);
      if (!std::isfinite(loss)) throw NumericError("linear_probe: non-finite loss at epoch " + std::to_string(epoch));
      Gradients<double> dg = dense_backward(spec, params.at("probe"), std::move(cache), softmax_xent_backward(std::move(sm)));
      for (std::size_t t = 0; t < g.weights.size(); ++t) g.weights[t] += dg.dweights[t] * inv;
      for (std::size_t t = 0; t < g.bias.size(); ++t) g.bias[t] += dg.dbias[t] * inv;
    }
    adam_update(state, params, grads);
  }

  auto accuracy = [&](std::size_t begin, std::size_t end) {
    std::size_t hits = 0;
    for (std::size_t r = begin; r < end; ++r) {
      const std::size_t i = order[r];
      auto [logits, cache] = dense_forward(spec, params.at("probe"), rows[i]);
      if (topk_indices(logits, 1)[0] == y[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(end - begin);
  };
  return {accuracy(0, n_train), accuracy(n_train, n), classes, n_train, n - n_train};
}

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kWidth = 640, kHeight = 420, kLeft = 64, kRight = 24, kTop = 40, kBottom = 56;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * (kWidth - kLeft - kRight); }
  double py(double y) const {
    return kHeight - kBottom - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * (kHeight - kTop - kBottom);
  }
};

Frame padded(double x0, double x1, double y0, double y1) {
  auto widen = [](double& lo, double& hi) {
    if (hi <= lo) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  };
  widen(x0, x1);
  widen(y0, y1);
  return {x0, x1, y0, y1};
}

void open_svg(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
     << escape_xml(title) << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& xl, const std::string& yl) {
  const double bx = kLeft, by = kHeight - kBottom, ty = kTop, rx = kWidth - kRight;
  os << "<g stroke=\"black\" fill=\"none\"><path d=\"M" << bx << ' ' << ty << " L" << bx << ' ' << by << " L" << rx
     << ' ' << by << "\"/></g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = f.x0 + (f.x1 - f.x0) * t / 4.0, yv = f.y0 + (f.y1 - f.y0) * t / 4.0;
    os << "<text x=\"" << f.px(xv) << "\" y=\"" << by + 16 << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    os << "<text x=\"" << bx - 6 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
  }
  os << "<text x=\"" << (bx + rx) / 2 << "\" y=\"" << kHeight - 16 << "\" text-anchor=\"middle\">" << escape_xml(xl)
     << "</text>\n";
  os << "<text transform=\"translate(16 " << (ty + by) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape_xml(yl) << "</text>\n</g>\n";
}

}  // namespace

std::string svg_line_plot(const std::vector<CurveSeries>& series, const std::string& title) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const Frame f = padded(x0, x1, y0, y1);
  std::ostringstream os;
  open_svg(os, title);
  axes(os, f, series.empty() ? "" : series.front().x_label, series.empty() ? "" : series.front().y_label);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : series[s].points) os << f.px(p.x) << ',' << f.py(p.y) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << kWidth - kRight - 4 << "\" y=\"" << kTop + 14 * (s + 1)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">"
       << escape_xml(series[s].name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_scatter(const Tensor64& coords, const std::vector<std::size_t>& labels, const std::string& title) {
  if (coords.rank() != 2 || coords.dim(1) != 2 || coords.dim(0) != labels.size())
    throw ArgumentError("svg_scatter: expected [n,2] coordinates with n labels");
  const std::size_t n = labels.size();
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (std::size_t i = 0; i < n; ++i) {
    x0 = std::min(x0, coords[2 * i]), x1 = std::max(x1, coords[2 * i]);
    y0 = std::min(y0, coords[2 * i + 1]), y1 = std::max(y1, coords[2 * i + 1]);
  }
  if (n == 0) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const Frame f = padded(x0, x1, y0, y1);
  std::ostringstream os;
  open_svg(os, title);
  axes(os, f, "dim 1", "dim 2");
  // Label 0 black, label 1 white with a black rim, further labels colored.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t l = labels[i];
    const char* fill = l == 0 ? "black" : l == 1 ? "white" : kColors[l % std::size(kColors)];
    os << "<circle class=\"point label-" << l << "\" cx=\"" << f.px(coords[2 * i]) << "\" cy=\""
       << f.py(coords[2 * i + 1]) << "\" r=\"3\" fill=\"" << fill << "\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string svg_heatmap(const Tensor& map, const std::string& title) {
  if (map.rank() != 2) throw ShapeError("svg_heatmap: expected [H,W], got " + map.shape().to_string());
  const std::size_t h = map.dim(0), w = map.dim(1);
  const double cell = std::min((kWidth - 40) / static_cast<double>(w), (kHeight - 60) / static_cast<double>(h));
  std::ostringstream os;
  open_svg(os, title);
  os << "<g transform=\"translate(20 40)\" shape-rendering=\"crispEdges\">\n";
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const int level = static_cast<int>(std::lround(255.0 * std::clamp<double>(map[y * w + x], 0.0, 1.0)));
      os << "<rect x=\"" << fmt(cell * x) << "\" y=\"" << fmt(cell * y) << "\" width=\"" << fmt(cell) << "\" height=\""
         << fmt(cell) << "\" fill=\"rgb(" << level << ',' << level << ',' << level << ")\"/>\n";
    }
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace gist

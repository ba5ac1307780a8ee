#include "gistnet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace gist {

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("adam: learning rate must be finite and non-negative");
}

template <typename T>
AdamState<T> AdamState<T>::init(const ModelParams<T>& params, const AdamConfig& config) {
  config.validate();
  AdamState state;
  state.config = config;
  state.m = params.zeros_like();
  state.v = params.zeros_like();
  return state;
}

namespace {

template <typename T>
void check_same_layout(const ModelParams<T>& a, const ModelParams<T>& b, const char* what) {
  if (a.size() != b.size()) throw ShapeError(std::string(what) + ": parameter sets differ in size");
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& [na, pa] = a.entries()[i];
    const auto& [nb, pb] = b.entries()[i];
    if (na != nb) throw ShapeError(std::string(what) + ": expected " + na + ", got " + nb);
    if (pa.weights.shape() != pb.weights.shape() || pa.bias.shape() != pb.bias.shape())
      throw ShapeError(std::string(what) + ": shape mismatch at " + na);
  }
}

template <typename T>
void update_tensor(const AdamConfig& c, double correction1, double correction2, BasicTensor<T>& theta,
                   BasicTensor<T>& m, BasicTensor<T>& v, const BasicTensor<T>& g) {
  T* th = theta.mutable_data();
  T* md = m.mutable_data();
  T* vd = v.mutable_data();
  const T* gd = g.data();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double gi = gd[i];
    const double mi = c.beta1 * md[i] + (1.0 - c.beta1) * gi;
    const double vi = c.beta2 * vd[i] + (1.0 - c.beta2) * gi * gi;
    md[i] = static_cast<T>(mi);
    vd[i] = static_cast<T>(vi);
    const double m_hat = mi / correction1;
    const double v_hat = vi / correction2;
    th[i] = static_cast<T>(th[i] - c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon));
  }
}

}  // namespace

template <typename T>
void adam_update(AdamState<T>& state, ModelParams<T>& params, const ModelParams<T>& grads) {
  check_same_layout(params, grads, "adam_step");
  check_same_layout(params, state.m, "adam_step");
  const std::uint64_t t = state.step + 1;
  const double correction1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.entries()[i].second;
    auto& m = state.m.entries()[i].second;
    auto& v = state.v.entries()[i].second;
    const auto& g = grads.entries()[i].second;
    update_tensor(state.config, correction1, correction2, p.weights, m.weights, v.weights, g.weights);
    update_tensor(state.config, correction1, correction2, p.bias, m.bias, v.bias, g.bias);
  }
  state.step = t;
}

template <typename T>
std::pair<ModelParams<T>, AdamState<T>> adam_step(const AdamState<T>& state, const ModelParams<T>& params,
                                                   const ModelParams<T>& grads) {
  ModelParams<T> next_params = params;
  AdamState<T> next_state = state;
  adam_update(next_state, next_params, grads);
  return {std::move(next_params), std::move(next_state)};
}

// ---------------------------------------------------------------------------

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-12});
  return std::fabs(analytic - numeric) / denom;
}

std::string GradCheckReport::worst_tensor() const {
  const GradCheckRow* worst = nullptr;
  for (const auto& row : rows)
    if (!worst || row.max_rel_err > worst->max_rel_err) worst = &row;
  return worst ? worst->tensor : std::string{};
}

namespace {

LossEval checked_eval(const LossFn& fn, const ModelParams<double>& params, ModelParams<double>* grads,
                      const std::string& where) {
  LossEval e = fn(params, grads);
  if (!std::isfinite(e.loss)) throw NumericError("grad_check: non-finite loss " + where);
  return e;
}

}  // namespace

GradCheckReport grad_check(const LossFn& fn, const ModelParams<double>& params, const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw ArgumentError("grad_check: epsilon must be positive");
  GradCheckReport report;
  report.tolerance = options.tolerance;

  ModelParams<double> analytic = params.zeros_like();
  const LossEval base = checked_eval(fn, params, &analytic, "at the unperturbed point");

  ModelParams<double> work = params;
  for (std::size_t e = 0; e < work.size(); ++e) {
    auto& [layer, lp] = work.entries()[e];
    const auto& grad_entry = analytic.entries()[e].second;
    for (int which = 0; which < 2; ++which) {
      BasicTensor<double>& tensor = which == 0 ? lp.weights : lp.bias;
      const BasicTensor<double>& grad = which == 0 ? grad_entry.weights : grad_entry.bias;
      GradCheckRow row;
      row.tensor = layer + (which == 0 ? ".weights" : ".bias");

      const std::size_t n = tensor.size();
      const bool exhaustive = options.samples_per_tensor == 0 || options.samples_per_tensor >= n;
      const std::size_t wanted = exhaustive ? n : options.samples_per_tensor;
      SeededRng rng(options.seed, stream_id_for(row.tensor.c_str()));
      std::unordered_set<std::size_t> tried;
      std::size_t next_flat = 0;
      std::size_t redraws = 0;

      while (row.checked < wanted) {
        std::size_t idx;
        if (exhaustive) {
          if (next_flat >= n) break;
          idx = next_flat++;
        } else {
          if (tried.size() >= n) break;
          do idx = static_cast<std::size_t>(rng.uniform_index(n));
          while (!tried.insert(idx).second);
        }
        double* slot = tensor.mutable_data() + idx;
        const double original = *slot;
        *slot = original + options.epsilon;
        const LossEval plus = checked_eval(fn, work, nullptr, "at " + row.tensor + "[" + std::to_string(idx) + "]+eps");
        *slot = original - options.epsilon;
        const LossEval minus = checked_eval(fn, work, nullptr, "at " + row.tensor + "[" + std::to_string(idx) + "]-eps");
        *slot = original;

        if (plus.region != base.region || minus.region != base.region) {
          ++row.kinks;
          if (exhaustive) continue;
          if (++redraws > options.max_redraws) break;
          continue;
        }
        const double numeric = (plus.loss - minus.loss) / (2.0 * options.epsilon);
        const double a = grad[idx];
        const double rel = relative_error(a, numeric);
        const double abs_err = std::fabs(a - numeric);
        row.max_abs_err = std::max(row.max_abs_err, abs_err);
        if (row.checked == 0 || rel > row.max_rel_err) {
          row.max_rel_err = rel;
          row.worst_index = idx;
          row.worst_analytic = a;
          row.worst_numeric = numeric;
        }
        ++row.checked;
      }
      row.passed = row.max_rel_err <= options.tolerance;
      report.max_rel_err = std::max(report.max_rel_err, row.max_rel_err);
      report.passed = report.passed && row.passed;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

#define GIST_INSTANTIATE(T)                                                                              \
  template struct AdamState<T>;                                                                          \
  template std::pair<ModelParams<T>, AdamState<T>> adam_step<T>(const AdamState<T>&, const ModelParams<T>&, \
                                                                 const ModelParams<T>&);                  \
  template void adam_update<T>(AdamState<T>&, ModelParams<T>&, const ModelParams<T>&);

GIST_INSTANTIATE(float)
GIST_INSTANTIATE(double)

#undef GIST_INSTANTIATE

}  // namespace gist

#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gcnslim/eval.hpp"
#include "gcnslim/model.hpp"

namespace gcnslim {

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 4096;  // positives per batch; negatives come on top
  int neg_per_pos = 1;
  int max_epochs = 1000;
  int patience = 50;  // evaluations without valid NDCG@10 improvement
  int eval_every = 1;
  std::uint64_t seed = 0;
  bool deterministic = true;
  bool freeze_user_embeddings = false;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const {
    if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (neg_per_pos < 1) throw std::invalid_argument("TrainConfig: neg_per_pos must be >= 1");
    if (max_epochs < 0) throw std::invalid_argument("TrainConfig: max_epochs must be >= 0");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
    if (max_epochs > 0 && patience > max_epochs)
      throw std::invalid_argument("TrainConfig: patience must be <= max_epochs");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0 ||
        adam_epsilon <= 0.0)
      throw std::invalid_argument("TrainConfig: bad Adam constants");
  }
};

template <typename Real>
struct AdamState {
  DenseMatrix<Real> m;
  DenseMatrix<Real> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState zeros_like(const DenseMatrix<Real>& e0, const TrainConfig& config) {
    AdamState state;
    state.m = DenseMatrix<Real>::Zero(e0.rows(), e0.cols());
    state.v = DenseMatrix<Real>::Zero(e0.rows(), e0.cols());
    state.beta1 = config.adam_beta1;
    state.beta2 = config.adam_beta2;
    state.epsilon = config.adam_epsilon;
    return state;
  }
};

struct EpochRow {
  int epoch = 0;
  double loss = 0.0;
  double recall10 = std::numeric_limits<double>::quiet_NaN();  // NaN when not evaluated
  double ndcg10 = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRow> epochs;
  int best_epoch = 0;
  double best_ndcg10 = 0.0;
  double best_recall10 = 0.0;
  double seconds_to_best = 0.0;
  double total_seconds = 0.0;
  std::string stopping_reason;
};

template <typename Real>
struct FitResult {
  ModelParams<Real> params;
  TrainReport report;
};

// Xavier-uniform init: entries in ±sqrt(6/(fan_in+fan_out)) with both fans
// equal to the embedding size, filled row-major from the seeded stream.
template <typename Real>
ModelParams<Real> init_params(int num_users, int num_items, int dim, std::uint64_t seed) {
  if (num_users < 1 || num_items < 1 || dim < 1)
    throw std::invalid_argument("init_params: sizes must be positive");
  const double bound = std::sqrt(6.0 / (2.0 * static_cast<double>(dim)));
  Rng rng(seed);
  ModelParams<Real> params;
  params.num_users = num_users;
  params.num_items = num_items;
  params.e0.resize(num_users + num_items, dim);
  for (int r = 0; r < num_users + num_items; ++r)
    for (int c = 0; c < dim; ++c) params.e0(r, c) = static_cast<Real>(rng.next_range(-bound, bound));
  return params;
}

template <typename Real>
void adam_update(DenseMatrix<Real>& e0, const DenseMatrix<Real>& grad, AdamState<Real>& state,
                 double learning_rate) {
  ++state.step;
  const Real b1 = static_cast<Real>(state.beta1);
  const Real b2 = static_cast<Real>(state.beta2);
  state.m = b1 * state.m + (Real(1) - b1) * grad;
  state.v.array() = b2 * state.v.array() + (Real(1) - b2) * grad.array().square();
  const Real bias1 = Real(1) - static_cast<Real>(std::pow(state.beta1, static_cast<double>(state.step)));
  const Real bias2 = Real(1) - static_cast<Real>(std::pow(state.beta2, static_cast<double>(state.step)));
  const Real lr = static_cast<Real>(learning_rate);
  const Real eps = static_cast<Real>(state.epsilon);
  e0.array() -= lr * (state.m.array() / bias1) / ((state.v.array() / bias2).sqrt() + eps);
}

// One pass over the shuffled train positives: each batch pairs every positive
// with neg_per_pos fresh random negatives, takes one Adam step, and the mean
// of the per-batch losses is returned.
template <typename Real>
Real train_epoch(ModelParams<Real>& params, AdamState<Real>& adam, const SplitBundle& data,
                 const NormalizedAdjacency<Real>& adj, const ModelConfig& model_config,
                 const TrainConfig& train_config, Rng& rng) {
  std::vector<std::pair<int, int>> positives;
  positives.reserve(static_cast<std::size_t>(data.train.num_interactions()));
  for (int u = 0; u < data.train.num_users; ++u)
    for (const int i : data.train.row_index[static_cast<std::size_t>(u)]) positives.emplace_back(u, i);
  if (positives.empty()) throw std::runtime_error("train_epoch: train split has no interactions");
  rng.shuffle(positives);

  double loss_sum = 0.0;
  int batches = 0;
  std::vector<TrainSample<Real>> batch;
  for (std::size_t start = 0; start < positives.size();
       start += static_cast<std::size_t>(train_config.batch_size)) {
    const std::size_t stop =
        std::min(positives.size(), start + static_cast<std::size_t>(train_config.batch_size));
    batch.clear();
    batch.reserve((stop - start) * static_cast<std::size_t>(1 + train_config.neg_per_pos));
    for (std::size_t p = start; p < stop; ++p) {
      const auto [u, i] = positives[p];
      batch.push_back({u, i, Real(1)});
      for (const int j : sample_negatives(u, train_config.neg_per_pos, data.train, rng))
        batch.push_back({u, j, Real(0)});
    }

    BatchLossResult<Real> result;
    try {
      result = batch_loss(batch, params, adj, model_config);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("train_epoch: batch " + std::to_string(batches) + ": " + e.what());
    }
    if (train_config.freeze_user_embeddings)
      result.grad_e0.topRows(params.num_users).setZero();
    adam_update(params.e0, result.grad_e0, adam, train_config.learning_rate);
    loss_sum += static_cast<double>(result.loss);
    ++batches;
  }
  return static_cast<Real>(loss_sum / batches);
}

// Full training loop with validation-driven early stopping on NDCG@10. The
// returned parameters are the best-validation snapshot, never the last epoch.
template <typename Real>
FitResult<Real> fit(const SplitBundle& data, const ModelConfig& model_config,
                    const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();

  const auto adj = build_normalized_adjacency<Real>(data.train);
  FitResult<Real> result;
  result.params = init_params<Real>(data.train.num_users, data.train.num_items,
                                    model_config.embedding_dim, train_config.seed);
  auto adam = AdamState<Real>::zeros_like(result.params.e0, train_config);
  // Separate stream for sampling so init and shuffling never entangle.
  Rng sampler(train_config.seed ^ 0x9E3779B97F4A7C15ULL);

  ModelParams<Real> best = result.params;
  double best_ndcg = -1.0;
  int evals_without_improvement = 0;
  double elapsed = 0.0;
  result.report.stopping_reason = "max_epochs";

  for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    const auto tic = std::chrono::steady_clock::now();
    const Real loss =
        train_epoch(result.params, adam, data, adj, model_config, train_config, sampler);

    EpochRow row;
    row.epoch = epoch;
    row.loss = static_cast<double>(loss);

    bool stop = false;
    if (epoch % train_config.eval_every == 0) {
      const MetricsReport metrics =
          evaluate(result.params, adj, data, EvalPhase::valid, model_config);
      row.recall10 = metrics.recall_at_n;
      row.ndcg10 = metrics.ndcg_at_n;
      if (metrics.ndcg_at_n > best_ndcg) {
        best_ndcg = metrics.ndcg_at_n;
        best = result.params;
        result.report.best_epoch = epoch;
        result.report.best_ndcg10 = metrics.ndcg_at_n;
        result.report.best_recall10 = metrics.recall_at_n;
        evals_without_improvement = 0;
      } else if (++evals_without_improvement >= train_config.patience) {
        result.report.stopping_reason = "patience";
        stop = true;
      }
    }

    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
    elapsed += row.seconds;
    if (result.report.best_epoch == epoch) result.report.seconds_to_best = elapsed;
    result.report.epochs.push_back(row);
    if (stop) break;
  }

  result.report.total_seconds = elapsed;
  result.params = std::move(best);
  return result;
}

struct GradCheckSizes {
  int num_users = 6;
  int num_items = 5;
  int dim = 4;
};

namespace detail {

// Random small instance for gradient checking: every user gets 1..3 train
// items and the check batch holds all positives plus one negative per user
// (when one exists).
struct GradCheckInstance {
  InteractionDataset train;
  std::vector<TrainSample<double>> batch;
  ModelParams<double> params;
};

inline GradCheckInstance make_gradcheck_instance(const GradCheckSizes& sizes, Rng& rng) {
  GradCheckInstance inst;
  inst.train.num_users = sizes.num_users;
  inst.train.num_items = sizes.num_items;
  inst.train.row_index.assign(static_cast<std::size_t>(sizes.num_users), {});
  for (int u = 0; u < sizes.num_users; ++u) {
    const int degree = 1 + rng.next_int(std::min(3, sizes.num_items));
    auto& row = inst.train.row_index[static_cast<std::size_t>(u)];
    while (static_cast<int>(row.size()) < degree) {
      const int i = rng.next_int(sizes.num_items);
      if (std::find(row.begin(), row.end(), i) == row.end()) row.push_back(i);
    }
    std::sort(row.begin(), row.end());
  }
  for (int u = 0; u < sizes.num_users; ++u) {
    for (const int i : inst.train.row_index[static_cast<std::size_t>(u)])
      inst.batch.push_back({u, i, 1.0});
    if (static_cast<int>(inst.train.row_index[static_cast<std::size_t>(u)].size()) <
        sizes.num_items) {
      inst.batch.push_back({u, sample_negatives(u, 1, inst.train, rng)[0], 0.0});
    }
  }
  inst.params.num_users = sizes.num_users;
  inst.params.num_items = sizes.num_items;
  inst.params.e0.resize(sizes.num_users + sizes.num_items, sizes.dim);
  const double bound = std::sqrt(6.0 / (2.0 * static_cast<double>(sizes.dim)));
  for (int r = 0; r < sizes.num_users + sizes.num_items; ++r)
    for (int c = 0; c < sizes.dim; ++c) inst.params.e0(r, c) = rng.next_range(-bound, bound);
  return inst;
}

// Smallest |pre-activation| across all propagation layers, recovered from the
// stored post-activations (post > 0 keeps the pre value; otherwise pre =
// post/slope). Used to keep finite differences away from the LeakyReLU kink.
inline double kink_margin(const PropagationOutput<double>& prop, double slope) {
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& layer : prop.per_layer) {
    for (int r = 0; r < layer.rows(); ++r)
      for (int c = 0; c < layer.cols(); ++c) {
        const double post = layer(r, c);
        const double pre = post > 0.0 ? post : (slope > 0.0 ? post / slope : post);
        margin = std::min(margin, std::abs(pre));
      }
  }
  return margin;
}

}  // namespace detail

// Central finite differences against the analytic gradient over every E0
// coordinate, in double precision. Nonlinear configs are re-seeded until all
// pre-activations sit at least 1e-3 from the LeakyReLU kink so the numeric
// difference never straddles it.
inline double grad_check(const ModelConfig& config, const GradCheckSizes& sizes, double epsilon,
                         std::uint64_t seed) {
  config.validate();
  if (sizes.num_users + sizes.num_items > 20 || sizes.dim > 8)
    throw std::invalid_argument("grad_check: instance too large (M+N <= 20, d <= 8)");

  detail::GradCheckInstance inst;
  NormalizedAdjacency<double> adj;
  for (std::uint64_t attempt = 0;; ++attempt) {
    if (attempt >= 64) throw std::runtime_error("grad_check: no kink-free instance found");
    Rng rng(seed + attempt);
    inst = detail::make_gradcheck_instance(sizes, rng);
    adj = build_normalized_adjacency<double>(inst.train);
    if (!config.nonlinear || config.num_layers == 0) break;
    const auto prop = propagate(adj, inst.params.e0, config.num_layers, true, config.leaky_slope);
    if (detail::kink_margin(prop, config.leaky_slope) > 1e-3) break;
  }

  const auto analytic = batch_loss(inst.batch, inst.params, adj, config);
  double max_rel = 0.0;
  ModelParams<double> probe = inst.params;
  for (int r = 0; r < inst.params.e0.rows(); ++r) {
    for (int c = 0; c < inst.params.e0.cols(); ++c) {
      const double saved = probe.e0(r, c);
      probe.e0(r, c) = saved + epsilon;
      const double plus = batch_loss(inst.batch, probe, adj, config).loss;
      probe.e0(r, c) = saved - epsilon;
      const double minus = batch_loss(inst.batch, probe, adj, config).loss;
      probe.e0(r, c) = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic.grad_e0(r, c);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

struct GradCheckCase {
  std::string name;
  ModelConfig config;
  double max_error = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

// The full variant grid: slim x {item,user} x {±nonlinear} x {±layer0} x
// alpha {0, 0.05}, plus mf x {±nonlinear} x alpha grid (layer0 forced on).
// Linear variants are held to 1e-6, nonlinear ones to 1e-4.
inline std::vector<GradCheckCase> grad_check_grid(double epsilon, std::uint64_t seed,
                                                  const GradCheckSizes& sizes = {}) {
  std::vector<GradCheckCase> cases;
  auto push = [&](ScoreMode mode, PredictionSide side, bool nonlinear, bool include0, double alpha) {
    GradCheckCase gc;
    gc.config.mode = mode;
    gc.config.side = side;
    gc.config.nonlinear = nonlinear;
    gc.config.include_layer0 = include0;
    gc.config.alpha = alpha;
    gc.config.lambda = 0.5;
    gc.config.num_layers = 2;
    gc.config.embedding_dim = sizes.dim;
    gc.name = to_string(mode) + "/" + to_string(side) + (nonlinear ? "/lrelu" : "/linear") +
              (include0 ? "/layer0" : "/no-layer0") + "/alpha=" + std::to_string(alpha);
    gc.threshold = nonlinear ? 1e-4 : 1e-6;
    cases.push_back(std::move(gc));
  };

  for (const auto side : {PredictionSide::item, PredictionSide::user})
    for (const bool nonlinear : {false, true})
      for (const bool include0 : {false, true})
        for (const double alpha : {0.0, 0.05}) push(ScoreMode::slim, side, nonlinear, include0, alpha);
  for (const bool nonlinear : {false, true})
    for (const double alpha : {0.0, 0.05}) push(ScoreMode::mf, PredictionSide::item, nonlinear, true, alpha);

  for (auto& gc : cases) {
    gc.max_error = grad_check(gc.config, sizes, epsilon, seed);
    gc.passed = gc.max_error < gc.threshold;
  }
  return cases;
}

}  // namespace gcnslim

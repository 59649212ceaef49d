#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gcnslim/dataset.hpp"
#include "gcnslim/eval.hpp"
#include "gcnslim/io.hpp"
#include "gcnslim/model.hpp"
#include "gcnslim/parallel.hpp"
#include "gcnslim/trainer.hpp"

namespace {

using namespace gcnslim;

void apply_thread_env() {
  if (const char* env = std::getenv("GCNSLIM_THREADS")) {
    const int threads = std::atoi(env);
    if (threads > 0) {
      omp_set_num_threads(threads);
      Eigen::setNbThreads(threads);
    }
  }
}

ModelConfig model_config_from_map(const ConfigMap& cfg) {
  ModelConfig mc;
  mc.num_layers = config_get_int(cfg, "model.layers", 1);
  mc.alpha = config_get_double(cfg, "model.alpha", 0.05);
  mc.lambda = config_get_double(cfg, "model.lambda", 0.5);
  mc.nonlinear = config_get_bool(cfg, "model.nonlinear", true);
  mc.include_layer0 = config_get_bool(cfg, "model.include_layer0", false);
  mc.mode = score_mode_from_string(config_get(cfg, "model.mode", "slim"));
  mc.side = side_from_string(config_get(cfg, "model.side", "item"));
  mc.embedding_dim = config_get_int(cfg, "model.dim", 128);
  mc.leaky_slope = config_get_double(cfg, "model.leaky_slope", 0.01);
  return mc;
}

TrainConfig train_config_from_map(const ConfigMap& cfg) {
  TrainConfig tc;
  tc.learning_rate = config_get_double(cfg, "train.lr", 0.001);
  tc.batch_size = config_get_int(cfg, "train.batch_size", 4096);
  tc.neg_per_pos = config_get_int(cfg, "train.neg_per_pos", 1);
  tc.max_epochs = config_get_int(cfg, "train.max_epochs", 1000);
  tc.patience = config_get_int(cfg, "train.patience", 50);
  tc.eval_every = config_get_int(cfg, "train.eval_every", 1);
  tc.seed = config_get_u64(cfg, "train.seed", 42);
  tc.deterministic = config_get_bool(cfg, "train.deterministic", true);
  tc.freeze_user_embeddings = config_get_bool(cfg, "train.freeze_users", false);
  return tc;
}

std::array<double, 3> split_ratios_from_map(const ConfigMap& cfg) {
  return {config_get_double(cfg, "split.train", 0.6), config_get_double(cfg, "split.valid", 0.2),
          config_get_double(cfg, "split.test", 0.2)};
}

// Builds the split bundle from whichever source the config names. movielens
// and synthetic sources run the full prepare pipeline in memory.
SplitBundle acquire_data(const ConfigMap& cfg) {
  const std::string source = config_get(cfg, "data.source", "synthetic");
  if (source == "processed") {
    const std::string dir = config_get(cfg, "data.path", "");
    if (dir.empty()) throw std::runtime_error("data.source=processed requires data.path");
    return load_processed(dir);
  }
  if (source == "movielens") {
    const std::string path = config_get(cfg, "data.path", "");
    if (path.empty()) throw std::runtime_error("data.source=movielens requires data.path");
    auto records = load_movielens(path, config_get_double(cfg, "data.rating_threshold", 3.0));
    records = kcore_filter(std::move(records), config_get_int(cfg, "data.k_core", 10));
    const auto dataset = build_dataset(records);
    return split(dataset, split_ratios_from_map(cfg), config_get_u64(cfg, "split.seed", 42));
  }
  if (source == "synthetic") {
    SyntheticSkewConfig sc;
    sc.num_users = config_get_int(cfg, "data.synthetic.users", 400);
    sc.num_items = config_get_int(cfg, "data.synthetic.items", 120);
    sc.target_interactions = config_get_int(cfg, "data.synthetic.interactions", 8000);
    sc.popularity_exponent = config_get_double(cfg, "data.synthetic.exponent", 1.0);
    sc.seed = config_get_u64(cfg, "data.synthetic.seed", 7);
    const auto dataset = generate_synthetic(sc);
    return split(dataset, split_ratios_from_map(cfg), config_get_u64(cfg, "split.seed", 42));
  }
  throw std::runtime_error("unknown data.source '" + source + "' (movielens|synthetic|processed)");
}

void ensure_out_dir(const std::string& out) {
  std::filesystem::create_directories(out);
}

void print_bundle_stats(const SplitBundle& bundle) {
  const auto total = bundle.train.num_interactions() + bundle.valid.num_interactions() +
                     bundle.test.num_interactions();
  std::cout << "users=" << bundle.train.num_users << " items=" << bundle.train.num_items
            << " interactions=" << total << " density="
            << static_cast<double>(total) /
                   (static_cast<double>(bundle.train.num_users) * bundle.train.num_items)
            << "\n  train=" << bundle.train.num_interactions()
            << " valid=" << bundle.valid.num_interactions()
            << " test=" << bundle.test.num_interactions() << "\n";
}

int cmd_prepare(const ConfigMap& cfg, const std::string& out) {
  const std::string source = config_get(cfg, "data.source", "synthetic");
  if (source == "processed")
    throw std::runtime_error("prepare: data.source=processed is already prepared");
  ensure_out_dir(out);
  const SplitBundle bundle = acquire_data(cfg);
  save_processed(out, bundle);
  write_config(out + "/config.resolved.txt", cfg);
  std::cout << "prepared dataset in " << out << "\n";
  print_bundle_stats(bundle);
  return 0;
}

template <typename Real>
int run_training(const ConfigMap& cfg, const SplitBundle& data, const std::string& out) {
  const ModelConfig mc = model_config_from_map(cfg);
  const TrainConfig tc = train_config_from_map(cfg);
  const auto result = fit<Real>(data, mc, tc);

  ensure_out_dir(out);
  save_checkpoint(out + "/checkpoint.bin",
                  make_checkpoint(result.params, mc, tc.seed, result.report.best_epoch));
  save_report_csv(out + "/report.csv", result.report);
  save_report_json(out + "/report.json", result.report);
  write_config(out + "/config.resolved.txt", cfg);

  std::cout << "best epoch " << result.report.best_epoch << ": valid recall@10="
            << result.report.best_recall10 << " ndcg@10=" << result.report.best_ndcg10 << " ("
            << result.report.stopping_reason << " after " << result.report.epochs.size()
            << " epochs, " << result.report.total_seconds << "s)\n";
  return 0;
}

int cmd_train(const ConfigMap& cfg, const std::string& out) {
  const SplitBundle data = acquire_data(cfg);
  const std::string precision = config_get(cfg, "train.precision", "float");
  if (precision == "float") return run_training<float>(cfg, data, out);
  if (precision == "double") return run_training<double>(cfg, data, out);
  throw std::runtime_error("train.precision must be float or double, got '" + precision + "'");
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& data_dir,
                 const std::string& phase_name, const std::string& out, int n,
                 const std::string& export_b) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const SplitBundle data = load_processed(data_dir);
  if (data.train.num_users != ckpt.num_users || data.train.num_items != ckpt.num_items) {
    throw std::runtime_error("checkpoint shape (" + std::to_string(ckpt.num_users) + "x" +
                             std::to_string(ckpt.num_items) + ") does not match dataset");
  }
  const EvalPhase phase = phase_name == "valid" ? EvalPhase::valid : EvalPhase::test;
  if (phase_name != "valid" && phase_name != "test")
    throw std::runtime_error("phase must be valid or test, got '" + phase_name + "'");

  const auto params = params_from_checkpoint<double>(ckpt);
  const auto adj = build_normalized_adjacency<double>(data.train);
  const MetricsReport metrics = evaluate(params, adj, data, phase, ckpt.config, n);

  std::cout << phase_name << ": recall@" << n << "=" << metrics.recall_at_n << " ndcg@" << n << "="
            << metrics.ndcg_at_n << " users=" << metrics.users_evaluated << "\n";
  if (!out.empty()) {
    ensure_out_dir(out);
    save_metrics_json(out + "/metrics_" + phase_name + ".json", metrics, phase_name);
  }
  if (!export_b.empty()) {
    if (ckpt.config.mode != ScoreMode::slim || ckpt.config.side != PredictionSide::item)
      throw std::runtime_error("--export-b requires a slim/item checkpoint");
    const auto finals = final_embeddings(params, adj, ckpt.config);
    const auto sim = item_similarity(finals.items);
    save_similarity(export_b, sim.b, ckpt.config.embedding_dim);
    std::cout << "wrote similarity matrix to " << export_b << "\n";
  }
  return 0;
}

struct AblationRun {
  std::string name;
  ModelConfig config;
};

ModelConfig variant_config(const ModelConfig& base, const std::string& name) {
  ModelConfig mc = base;
  if (name == "gcnslim") {
    mc.mode = ScoreMode::slim;
    mc.nonlinear = true;
    mc.include_layer0 = false;
  } else if (name == "gcnslim+0") {
    mc.mode = ScoreMode::slim;
    mc.nonlinear = true;
    mc.include_layer0 = true;
  } else if (name == "gcnslim-lr") {
    mc.mode = ScoreMode::slim;
    mc.nonlinear = false;
    mc.include_layer0 = false;
  } else if (name == "gcnslim+0-lr") {
    mc.mode = ScoreMode::slim;
    mc.nonlinear = false;
    mc.include_layer0 = true;
  } else if (name == "gcnmf") {
    mc.mode = ScoreMode::mf;
    mc.nonlinear = false;
    mc.include_layer0 = true;
  } else if (name == "gcnmf+lr") {
    mc.mode = ScoreMode::mf;
    mc.nonlinear = true;
    mc.include_layer0 = true;
  } else {
    throw std::runtime_error("unknown variant '" + name + "'");
  }
  if (mc.num_layers == 0) mc.include_layer0 = true;  // K=0 retains layer 0
  return mc;
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) {
    if (!token.empty()) out.push_back(token);
  }
  return out;
}

int cmd_ablate(const ConfigMap& cfg, const std::string& out, const std::string& variants_arg,
               const std::string& sweep, const std::string& seeds_arg) {
  const SplitBundle data = acquire_data(cfg);
  const ModelConfig base = model_config_from_map(cfg);
  const TrainConfig base_train = train_config_from_map(cfg);

  std::vector<AblationRun> runs;
  if (sweep.empty()) {
    const auto names = split_csv_list(variants_arg);
    if (names.empty()) throw std::runtime_error("ablate: empty variant list");
    for (const auto& name : names) runs.push_back({name, variant_config(base, name)});
  } else if (sweep == "layers") {
    for (const int k : {0, 1, 2, 3}) {
      ModelConfig mc = variant_config(base, "gcnslim");
      mc.num_layers = k;
      if (k == 0) mc.include_layer0 = true;  // 0th-layer embeddings are retained when K=0
      runs.push_back({"gcnslim[K=" + std::to_string(k) + "]", mc});
    }
  } else if (sweep == "alpha") {
    for (const double a : {0.0, 0.01, 0.05, 0.1, 0.5}) {
      ModelConfig mc = variant_config(base, "gcnslim");
      mc.alpha = a;
      std::ostringstream name;
      name << "gcnslim[alpha=" << a << "]";
      runs.push_back({name.str(), mc});
    }
  } else if (sweep == "lambda") {
    for (const double l : {0.1, 0.5, 1.0, 1.5, 2.0, 5.0}) {
      ModelConfig mc = variant_config(base, "gcnslim");
      mc.lambda = l;
      std::ostringstream name;
      name << "gcnslim[lambda=" << l << "]";
      runs.push_back({name.str(), mc});
    }
  } else {
    throw std::runtime_error("ablate: unknown sweep '" + sweep + "' (layers|alpha|lambda)");
  }

  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_csv_list(seeds_arg)) seeds.push_back(std::stoull(s));
  if (seeds.empty()) seeds.push_back(base_train.seed);

  ensure_out_dir(out);
  std::ofstream csv(out + "/ablation.csv", std::ios::binary);
  if (!csv.is_open()) throw std::runtime_error("cannot write " + out + "/ablation.csv");
  csv << "variant,seed,status,best_epoch,recall10,ndcg10,seconds_to_best,total_seconds,error\n";
  csv.precision(10);
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();

  const std::string precision = config_get(cfg, "train.precision", "float");
  for (const auto& run : runs) {
    for (const std::uint64_t seed : seeds) {
      TrainConfig tc = base_train;
      tc.seed = seed;
      nlohmann::ordered_json row;
      row["variant"] = run.name;
      row["seed"] = seed;
      try {
        TrainReport report;
        if (precision == "double")
          report = fit<double>(data, run.config, tc).report;
        else
          report = fit<float>(data, run.config, tc).report;
        row["status"] = "ok";
        row["best_epoch"] = report.best_epoch;
        row["recall10"] = report.best_recall10;
        row["ndcg10"] = report.best_ndcg10;
        row["seconds_to_best"] = report.seconds_to_best;
        row["total_seconds"] = report.total_seconds;
        csv << run.name << ',' << seed << ",ok," << report.best_epoch << ','
            << report.best_recall10 << ',' << report.best_ndcg10 << ',' << report.seconds_to_best
            << ',' << report.total_seconds << ",\n";
        std::cout << run.name << " seed=" << seed << ": recall@10=" << report.best_recall10
                  << " ndcg@10=" << report.best_ndcg10 << " (" << report.total_seconds << "s)\n";
      } catch (const std::exception& e) {
        row["status"] = "error";
        row["error"] = e.what();
        std::string message = e.what();
        for (auto& ch : message)
          if (ch == ',' || ch == '\n') ch = ' ';
        csv << run.name << ',' << seed << ",error,,,,,," << message << "\n";
        std::cerr << run.name << " seed=" << seed << " failed: " << e.what() << "\n";
      }
      rows.push_back(std::move(row));
    }
  }

  std::ofstream json_out(out + "/ablation.json", std::ios::binary);
  json_out << rows.dump(2) << '\n';
  write_config(out + "/config.resolved.txt", cfg);
  return 0;
}

int cmd_gradcheck(double epsilon, std::uint64_t seed, const std::string& out) {
  const auto cases = grad_check_grid(epsilon, seed);
  bool all_passed = true;
  double worst = 0.0;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& gc : cases) {
    all_passed = all_passed && gc.passed;
    worst = std::max(worst, gc.max_error);
    std::cout << (gc.passed ? "pass" : "FAIL") << "  " << gc.name
              << "  max_rel_err=" << gc.max_error << " (threshold " << gc.threshold << ")\n";
    nlohmann::ordered_json row;
    row["variant"] = gc.name;
    row["max_rel_err"] = gc.max_error;
    row["threshold"] = gc.threshold;
    row["passed"] = gc.passed;
    rows.push_back(std::move(row));
  }
  std::cout << (all_passed ? "gradcheck passed" : "gradcheck FAILED") << ", worst max_rel_err="
            << worst << "\n";
  if (!out.empty()) {
    ensure_out_dir(out);
    nlohmann::ordered_json doc;
    doc["epsilon"] = epsilon;
    doc["seed"] = seed;
    doc["passed"] = all_passed;
    doc["worst_max_rel_err"] = worst;
    doc["cases"] = std::move(rows);
    std::ofstream f(out + "/gradcheck.json", std::ios::binary);
    f << doc.dump(2) << '\n';
  }
  return all_passed ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_env();

  CLI::App app{"gcnslim: graph-convolution SLIM recommender"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_path, source;
  std::uint64_t seed_flag = 0;
  bool seed_given = false, deterministic_flag = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value config file");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed_flag, "override the command's primary seed")
        ->each([&](const std::string&) { seed_given = true; });
    cmd->add_flag("--deterministic", deterministic_flag, "force deterministic mode");
    cmd->add_option("--data", data_path, "dataset path (movielens file or processed dir)");
    cmd->add_option("--source", source, "data source: movielens|synthetic|processed");
  };

  CLI::App* prepare = app.add_subcommand("prepare", "ingest, filter, split, and write a dataset");
  add_common(prepare);

  CLI::App* train = app.add_subcommand("train", "fit a model and write checkpoint + curves");
  add_common(train);

  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "score a checkpoint on a split");
  std::string checkpoint_path, phase = "test", export_b;
  int topn = 10;
  evaluate_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  evaluate_cmd->add_option("--data", data_path, "processed dataset directory")->required();
  evaluate_cmd->add_option("--phase", phase, "valid|test (default test)");
  evaluate_cmd->add_option("--out", out_dir, "directory for metrics JSON");
  evaluate_cmd->add_option("--n", topn, "ranking cutoff (default 10)");
  evaluate_cmd->add_option("--export-b", export_b, "also write the item similarity matrix here");

  CLI::App* ablate = app.add_subcommand("ablate", "train a set of variants with shared seeds");
  add_common(ablate);
  std::string variants = "gcnslim,gcnslim+0,gcnslim-lr,gcnslim+0-lr,gcnmf,gcnmf+lr";
  std::string sweep, seeds_arg;
  ablate->add_option("--variants", variants, "comma-separated variant names");
  ablate->add_option("--sweep", sweep, "parameter sweep instead of variants: layers|alpha|lambda");
  ablate->add_option("--seeds", seeds_arg, "comma-separated train seeds (default: train.seed)");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check grid");
  double epsilon = 1e-4;
  std::uint64_t gc_seed = 12345;
  gradcheck->add_option("--epsilon", epsilon, "finite-difference step (default 1e-4)");
  gradcheck->add_option("--seed", gc_seed, "instance seed");
  gradcheck->add_option("--out", out_dir, "directory for gradcheck JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    ConfigMap cfg;
    if (!config_path.empty()) cfg = parse_config_file(config_path);
    if (!data_path.empty()) cfg["data.path"] = data_path;
    if (!source.empty()) cfg["data.source"] = source;
    if (deterministic_flag) cfg["train.deterministic"] = "true";

    if (app.got_subcommand(prepare)) {
      if (seed_given) cfg["split.seed"] = std::to_string(seed_flag);
      if (out_dir.empty()) throw std::runtime_error("prepare: --out is required");
      return cmd_prepare(cfg, out_dir);
    }
    if (app.got_subcommand(train)) {
      if (seed_given) cfg["train.seed"] = std::to_string(seed_flag);
      if (!data_path.empty() && cfg.find("data.source") == cfg.end())
        cfg["data.source"] = "processed";
      if (out_dir.empty()) throw std::runtime_error("train: --out is required");
      return cmd_train(cfg, out_dir);
    }
    if (app.got_subcommand(evaluate_cmd)) {
      return cmd_evaluate(checkpoint_path, data_path, phase, out_dir, topn, export_b);
    }
    if (app.got_subcommand(ablate)) {
      if (seed_given) cfg["train.seed"] = std::to_string(seed_flag);
      if (!data_path.empty() && cfg.find("data.source") == cfg.end())
        cfg["data.source"] = "processed";
      if (out_dir.empty()) throw std::runtime_error("ablate: --out is required");
      return cmd_ablate(cfg, out_dir, variants, sweep, seeds_arg);
    }
    if (app.got_subcommand(gradcheck)) {
      return cmd_gradcheck(epsilon, gc_seed, out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

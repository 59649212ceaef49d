#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "json.hpp"

#include "gcnslim/eval.hpp"
#include "gcnslim/model.hpp"
#include "gcnslim/trainer.hpp"

namespace gcnslim {

// Flat key=value experiment config. '#' starts a comment; keys are dotted
// paths (model.alpha, train.lr, ...). std::map keeps writes diff-friendly.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text, const std::string& origin = "<string>");
ConfigMap parse_config_file(const std::string& path);
void write_config(const std::string& path, const ConfigMap& config);

std::string config_get(const ConfigMap& config, const std::string& key, const std::string& fallback);
int config_get_int(const ConfigMap& config, const std::string& key, int fallback);
double config_get_double(const ConfigMap& config, const std::string& key, double fallback);
bool config_get_bool(const ConfigMap& config, const std::string& key, bool fallback);
std::uint64_t config_get_u64(const ConfigMap& config, const std::string& key, std::uint64_t fallback);

std::uint64_t fnv1a64(const void* data, std::size_t size);

nlohmann::ordered_json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Binary checkpoint: "GSLMCKPT" magic, u64 little-endian header length, JSON
// header {format, num_users, num_items, dim, epoch, seed, config, checksum},
// then the E0 payload as row-major little-endian doubles.
struct Checkpoint {
  ModelConfig config;
  int num_users = 0;
  int num_items = 0;
  std::uint64_t seed = 0;
  int epoch = 0;
  DenseMatrix<double> e0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

template <typename Real>
Checkpoint make_checkpoint(const ModelParams<Real>& params, const ModelConfig& config,
                           std::uint64_t seed, int epoch) {
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.num_users = params.num_users;
  ckpt.num_items = params.num_items;
  ckpt.seed = seed;
  ckpt.epoch = epoch;
  ckpt.e0 = params.e0.template cast<double>();
  return ckpt;
}

template <typename Real>
ModelParams<Real> params_from_checkpoint(const Checkpoint& ckpt) {
  ModelParams<Real> params;
  params.num_users = ckpt.num_users;
  params.num_items = ckpt.num_items;
  params.e0 = ckpt.e0.cast<Real>();
  return params;
}

// B export: one JSON header line {"N":..,"d":..,"checksum":..} followed by
// N*N row-major little-endian doubles.
void save_similarity(const std::string& path, const DenseMatrix<double>& b, int dim);
std::pair<DenseMatrix<double>, int> load_similarity(const std::string& path);

void save_report_csv(const std::string& path, const TrainReport& report);
void save_report_json(const std::string& path, const TrainReport& report);
void save_metrics_json(const std::string& path, const MetricsReport& metrics,
                       const std::string& phase);

}  // namespace gcnslim

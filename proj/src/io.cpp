#include "gcnslim/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gcnslim {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
  ConfigMap config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config " + origin + " line " + std::to_string(line_no) +
                               ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config " + origin + " line " + std::to_string(line_no) +
                               ": empty key");
    }
    config[key] = value;
  }
  return config;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

void write_config(const std::string& path, const ConfigMap& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw std::runtime_error("cannot write config file: " + path);
  for (const auto& [key, value] : config) out << key << " = " << value << '\n';
}

std::string config_get(const ConfigMap& config, const std::string& key, const std::string& fallback) {
  const auto it = config.find(key);
  return it == config.end() ? fallback : it->second;
}

int config_get_int(const ConfigMap& config, const std::string& key, int fallback) {
  const auto it = config.find(key);
  if (it == config.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": bad integer '" + it->second + "'");
  }
}

double config_get_double(const ConfigMap& config, const std::string& key, double fallback) {
  const auto it = config.find(key);
  if (it == config.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": bad number '" + it->second + "'");
  }
}

bool config_get_bool(const ConfigMap& config, const std::string& key, bool fallback) {
  const auto it = config.find(key);
  if (it == config.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config key " + key + ": bad boolean '" + v + "'");
}

std::uint64_t config_get_u64(const ConfigMap& config, const std::string& key, std::uint64_t fallback) {
  const auto it = config.find(key);
  if (it == config.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": bad unsigned integer '" + it->second + "'");
  }
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

nlohmann::ordered_json model_config_to_json(const ModelConfig& config) {
  nlohmann::ordered_json j;
  j["num_layers"] = config.num_layers;
  j["alpha"] = config.alpha;
  j["lambda"] = config.lambda;
  j["nonlinear"] = config.nonlinear;
  j["include_layer0"] = config.include_layer0;
  j["mode"] = to_string(config.mode);
  j["side"] = to_string(config.side);
  j["embedding_dim"] = config.embedding_dim;
  j["leaky_slope"] = config.leaky_slope;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig config;
  config.num_layers = j.at("num_layers").get<int>();
  config.alpha = j.at("alpha").get<double>();
  config.lambda = j.at("lambda").get<double>();
  config.nonlinear = j.at("nonlinear").get<bool>();
  config.include_layer0 = j.at("include_layer0").get<bool>();
  config.mode = score_mode_from_string(j.at("mode").get<std::string>());
  config.side = side_from_string(j.at("side").get<std::string>());
  config.embedding_dim = j.at("embedding_dim").get<int>();
  config.leaky_slope = j.at("leaky_slope").get<double>();
  return config;
}

namespace {

constexpr char kCheckpointMagic[8] = {'G', 'S', 'L', 'M', 'C', 'K', 'P', 'T'};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::size_t payload_bytes =
      static_cast<std::size_t>(ckpt.e0.rows()) * static_cast<std::size_t>(ckpt.e0.cols()) * sizeof(double);

  nlohmann::ordered_json header;
  header["format"] = 1;
  header["num_users"] = ckpt.num_users;
  header["num_items"] = ckpt.num_items;
  header["dim"] = static_cast<int>(ckpt.e0.cols());
  header["epoch"] = ckpt.epoch;
  header["seed"] = ckpt.seed;
  header["config"] = model_config_to_json(ckpt.config);
  header["checksum"] = fnv1a64(ckpt.e0.data(), payload_bytes);
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  out.write(reinterpret_cast<const char*>(ckpt.e0.data()), static_cast<std::streamsize>(payload_bytes));
  if (!out.good()) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw std::runtime_error("cannot open checkpoint: " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in.good() || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
    throw std::runtime_error("corrupt checkpoint (bad magic): " + path);

  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in.good() || header_len == 0 || header_len > (1ULL << 20))
    throw std::runtime_error("corrupt checkpoint (bad header length): " + path);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in.good()) throw std::runtime_error("corrupt checkpoint (truncated header): " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const std::exception& e) {
    throw std::runtime_error("corrupt checkpoint (header parse): " + path + ": " + e.what());
  }

  Checkpoint ckpt;
  ckpt.num_users = header.at("num_users").get<int>();
  ckpt.num_items = header.at("num_items").get<int>();
  ckpt.epoch = header.at("epoch").get<int>();
  ckpt.seed = header.at("seed").get<std::uint64_t>();
  ckpt.config = model_config_from_json(header.at("config"));
  const int dim = header.at("dim").get<int>();
  if (ckpt.num_users < 1 || ckpt.num_items < 1 || dim < 1)
    throw std::runtime_error("corrupt checkpoint (bad sizes): " + path);

  ckpt.e0.resize(ckpt.num_users + ckpt.num_items, dim);
  const std::size_t payload_bytes =
      static_cast<std::size_t>(ckpt.e0.rows()) * static_cast<std::size_t>(dim) * sizeof(double);
  in.read(reinterpret_cast<char*>(ckpt.e0.data()), static_cast<std::streamsize>(payload_bytes));
  if (!in.good() || static_cast<std::size_t>(in.gcount()) != payload_bytes)
    throw std::runtime_error("corrupt checkpoint (truncated payload): " + path);

  if (fnv1a64(ckpt.e0.data(), payload_bytes) != header.at("checksum").get<std::uint64_t>())
    throw std::runtime_error("corrupt checkpoint (checksum mismatch): " + path);
  return ckpt;
}

void save_similarity(const std::string& path, const DenseMatrix<double>& b, int dim) {
  if (b.rows() != b.cols()) throw std::invalid_argument("save_similarity: B must be square");
  const std::size_t payload_bytes =
      static_cast<std::size_t>(b.rows()) * static_cast<std::size_t>(b.cols()) * sizeof(double);
  nlohmann::ordered_json header;
  header["N"] = static_cast<int>(b.rows());
  header["d"] = dim;
  header["checksum"] = fnv1a64(b.data(), payload_bytes);

  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw std::runtime_error("cannot write similarity export: " + path);
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(payload_bytes));
  if (!out.good()) throw std::runtime_error("failed writing similarity export: " + path);
}

std::pair<DenseMatrix<double>, int> load_similarity(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw std::runtime_error("cannot open similarity export: " + path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw std::runtime_error("corrupt similarity export (missing header): " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const std::exception& e) {
    throw std::runtime_error("corrupt similarity export (header parse): " + path + ": " + e.what());
  }
  const int n = header.at("N").get<int>();
  const int dim = header.at("d").get<int>();
  if (n < 1) throw std::runtime_error("corrupt similarity export (bad N): " + path);

  DenseMatrix<double> b(n, n);
  const std::size_t payload_bytes = static_cast<std::size_t>(n) * static_cast<std::size_t>(n) * sizeof(double);
  in.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(payload_bytes));
  if (!in.good() || static_cast<std::size_t>(in.gcount()) != payload_bytes)
    throw std::runtime_error("corrupt similarity export (truncated payload): " + path);
  if (fnv1a64(b.data(), payload_bytes) != header.at("checksum").get<std::uint64_t>())
    throw std::runtime_error("corrupt similarity export (checksum mismatch): " + path);
  return {std::move(b), dim};
}

void save_report_csv(const std::string& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw std::runtime_error("cannot write report: " + path);
  out << "epoch,loss,recall10,ndcg10,seconds\n";
  out.precision(10);
  for (const auto& row : report.epochs) {
    out << row.epoch << ',' << row.loss << ',';
    if (std::isfinite(row.recall10)) out << row.recall10;
    out << ',';
    if (std::isfinite(row.ndcg10)) out << row.ndcg10;
    out << ',' << row.seconds << '\n';
  }
}

namespace {

nlohmann::ordered_json report_to_json(const TrainReport& report) {
  nlohmann::ordered_json j;
  j["best_epoch"] = report.best_epoch;
  j["best_ndcg10"] = report.best_ndcg10;
  j["best_recall10"] = report.best_recall10;
  j["seconds_to_best"] = report.seconds_to_best;
  j["total_seconds"] = report.total_seconds;
  j["stopping_reason"] = report.stopping_reason;
  j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& row : report.epochs) {
    nlohmann::ordered_json r;
    r["epoch"] = row.epoch;
    r["loss"] = row.loss;
    if (std::isfinite(row.recall10)) {
      r["recall10"] = row.recall10;
      r["ndcg10"] = row.ndcg10;
    } else {
      r["recall10"] = nullptr;
      r["ndcg10"] = nullptr;
    }
    r["seconds"] = row.seconds;
    j["epochs"].push_back(std::move(r));
  }
  return j;
}

}  // namespace

void save_report_json(const std::string& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw std::runtime_error("cannot write report: " + path);
  out << report_to_json(report).dump(2) << '\n';
}

void save_metrics_json(const std::string& path, const MetricsReport& metrics,
                       const std::string& phase) {
  nlohmann::ordered_json j;
  j["phase"] = phase;
  j["n"] = metrics.n;
  j["recall_at_n"] = metrics.recall_at_n;
  j["ndcg_at_n"] = metrics.ndcg_at_n;
  j["users_evaluated"] = metrics.users_evaluated;
  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw std::runtime_error("cannot write metrics: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace gcnslim

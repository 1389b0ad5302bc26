#include "lgts/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lgts/errors.hpp"

namespace lgts {

namespace {

using nlohmann::json;

json kernel_to_json(const KernelSpec& k) {
  json j;
  j["kind"] = kernel_kind_name(k.kind);
  j["length_scale"] = k.length_scale;
  j["output_scale"] = k.output_scale;
  if (k.kind == KernelKind::periodic) j["period"] = k.period;
  return j;
}

KernelSpec kernel_from_json(const json& j) {
  KernelSpec k;
  k.kind = kernel_kind_from_name(j.at("kind").get<std::string>());
  k.length_scale = j.at("length_scale").get<double>();
  if (j.contains("output_scale")) k.output_scale = j["output_scale"].get<double>();
  if (j.contains("period")) k.period = j["period"].get<double>();
  return k;
}

json config_to_json(const ModelConfig& c) {
  json j;
  j["d"] = c.d;
  j["delta"] = c.delta;
  j["d_g"] = c.d_g;
  j["d_l"] = c.d_l;
  j["beta"] = c.beta;
  j["lambda"] = c.lambda;
  j["hidden"] = c.hidden;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["subwindow_min_frac"] = c.subwindow_min_frac;
  j["subwindow_max_frac"] = c.subwindow_max_frac;
  j["jitter"] = c.jitter;
  json ks = json::array();
  for (const auto& k : c.kernels) ks.push_back(kernel_to_json(k));
  j["kernels"] = ks;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d = j.at("d").get<int>();
  c.delta = j.at("delta").get<int>();
  c.d_g = j.at("d_g").get<int>();
  c.d_l = j.at("d_l").get<int>();
  c.beta = j.at("beta").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.hidden = j.at("hidden").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.subwindow_min_frac = j.at("subwindow_min_frac").get<double>();
  c.subwindow_max_frac = j.at("subwindow_max_frac").get<double>();
  c.jitter = j.at("jitter").get<double>();
  c.kernels.clear();
  for (const auto& k : j.at("kernels")) c.kernels.push_back(kernel_from_json(k));
  return c;
}

json tensor_to_json(const Tensor& t) {
  json j;
  j["shape"] = t.shape();
  j["data"] = t.values();
  return j;
}

Tensor tensor_from_json(const std::string& name, const json& j) {
  Shape shape = j.at("shape").get<Shape>();
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  return Tensor::param(name, std::move(data), std::move(shape));
}

struct NamedTensorRef {
  const char* key;
  Tensor ModelParams::*member;
  bool global_only;
};

constexpr NamedTensorRef kParamTable[] = {
    {"enc_l.w1", &ModelParams::el_w1, false},
    {"enc_l.b1", &ModelParams::el_b1, false},
    {"enc_l.w2", &ModelParams::el_w2, false},
    {"enc_l.b2", &ModelParams::el_b2, false},
    {"enc_l.agg_prev", &ModelParams::el_cm, false},
    {"enc_l.agg_self", &ModelParams::el_c0, false},
    {"enc_l.agg_next", &ModelParams::el_cp, false},
    {"enc_l.agg_bias", &ModelParams::el_cb, false},
    {"enc_g.w1", &ModelParams::eg_w1, true},
    {"enc_g.b1", &ModelParams::eg_b1, true},
    {"enc_g.w2", &ModelParams::eg_w2, true},
    {"enc_g.b2", &ModelParams::eg_b2, true},
    {"enc_g.head_w1", &ModelParams::eg_h1, true},
    {"enc_g.head_b1", &ModelParams::eg_hb1, true},
    {"enc_g.head_w2", &ModelParams::eg_h2, true},
    {"enc_g.head_b2", &ModelParams::eg_hb2, true},
    {"dec.w1", &ModelParams::de_w1, false},
    {"dec.b1", &ModelParams::de_b1, false},
    {"dec.w2", &ModelParams::de_w2, false},
    {"dec.b2", &ModelParams::de_b2, false},
    {"dec.w3", &ModelParams::de_w3, false},
    {"dec.b3", &ModelParams::de_b3, false},
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& params) {
  json j;
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(cfg);
  json ps = json::object();
  for (const auto& row : kParamTable) {
    const Tensor& t = params.*(row.member);
    if (!t.defined()) {
      if (row.global_only && cfg.d_g == 0) continue;
      throw ValidationError(std::string("save_checkpoint: parameter ") + row.key + " missing");
    }
    ps[row.key] = tensor_to_json(t);
  }
  j["params"] = ps;
  std::ofstream out(path);
  if (!out) throw ValidationError("save_checkpoint: cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw ValidationError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_checkpoint: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("load_checkpoint: bad JSON in " + path + ": " + e.what());
  }
  Checkpoint cp;
  if (!j.contains("version")) throw ValidationError("load_checkpoint: missing version field");
  cp.version = j["version"].get<int>();
  if (cp.version != kCheckpointVersion)
    throw ValidationError("load_checkpoint: unsupported version " + std::to_string(cp.version));
  cp.config = config_from_json(j.at("config"));
  const json& ps = j.at("params");
  for (const auto& row : kParamTable) {
    if (row.global_only && cp.config.d_g == 0) continue;
    if (!ps.contains(row.key))
      throw ValidationError(std::string("load_checkpoint: missing parameter ") + row.key);
    cp.params.*(row.member) = tensor_from_json(row.key, ps[row.key]);
  }
  return cp;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("file_digest: cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lgts

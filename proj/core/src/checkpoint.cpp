#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "e2elr/training.hpp"

namespace e2elr {

using nlohmann::json;

namespace {

std::vector<double> slice(const std::vector<double>& v, std::size_t offset, std::size_t count) {
  return {v.begin() + static_cast<std::ptrdiff_t>(offset), v.begin() + static_cast<std::ptrdiff_t>(offset + count)};
}

}  // namespace

std::string proxy_to_json(const TrainedProxy& proxy) {
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["arch"] = to_string(proxy.arch);
  j["reserve_mode"] = proxy.reserve_mode;
  j["dropout"] = proxy.mlp.dropout;
  j["bn_momentum"] = proxy.mlp.bn_momentum;
  j["bn_eps"] = proxy.mlp.bn_eps;
  json layers = json::array();
  for (std::size_t k = 0; k < proxy.mlp.layers.size(); ++k) {
    const LayerShape& L = proxy.mlp.layers[k];
    json layer;
    layer["in"] = L.in;
    layer["out"] = L.out;
    layer["w"] = slice(proxy.mlp.theta, L.w_offset, L.in * L.out);
    layer["b"] = slice(proxy.mlp.theta, L.b_offset, L.out);
    if (k < proxy.mlp.bn_mean.size()) {
      layer["bn_mean"] = proxy.mlp.bn_mean[k];
      layer["bn_var"] = proxy.mlp.bn_var[k];
    } else {
      layer["bn_mean"] = nullptr;
      layer["bn_var"] = nullptr;
    }
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  j["norm"] = {{"mean", proxy.norm_mean}, {"scale", proxy.norm_scale}};
  const ProxyMeta& m = proxy.meta;
  j["meta"] = {{"seed", m.seed},
               {"case_sha256", m.case_sha256},
               {"loss", to_string(m.loss)},
               {"lambda", m.lambda},
               {"mu", m.mu},
               {"epochs", m.epochs},
               {"best_epoch", m.best_epoch},
               {"dc3_test_steps", m.dc3_test_steps},
               {"dc3_rho", m.dc3_rho}};
  return j.dump(1);
}

TrainedProxy proxy_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw ValidationError("unsupported checkpoint format_version " + std::to_string(version));
    }
    TrainedProxy proxy;
    proxy.arch = parse_arch(j.at("arch").get<std::string>());
    proxy.reserve_mode = j.value("reserve_mode", false);
    proxy.mlp.dropout = j.value("dropout", 0.2);
    proxy.mlp.bn_momentum = j.value("bn_momentum", 0.1);
    proxy.mlp.bn_eps = j.value("bn_eps", 1e-5);
    std::size_t offset = 0;
    const json& layers = j.at("layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const json& layer = layers[k];
      auto w = layer.at("w").get<std::vector<double>>();
      auto b = layer.at("b").get<std::vector<double>>();
      const std::size_t out = b.size();
      const std::size_t in = layer.contains("in") ? layer["in"].get<std::size_t>() : (out ? w.size() / out : 0);
      if (w.size() != in * out) throw ValidationError("layer " + std::to_string(k) + " weight shape mismatch");
      if (k > 0 && in != proxy.mlp.layers.back().out) {
        throw ValidationError("layer " + std::to_string(k) + " input width mismatch");
      }
      proxy.mlp.layers.push_back({in, out, offset, offset + in * out});
      proxy.mlp.theta.insert(proxy.mlp.theta.end(), w.begin(), w.end());
      proxy.mlp.theta.insert(proxy.mlp.theta.end(), b.begin(), b.end());
      offset += in * out + out;
      if (k + 1 < layers.size()) {
        proxy.mlp.bn_mean.push_back(layer.at("bn_mean").get<std::vector<double>>());
        proxy.mlp.bn_var.push_back(layer.at("bn_var").get<std::vector<double>>());
        if (proxy.mlp.bn_mean.back().size() != out || proxy.mlp.bn_var.back().size() != out) {
          throw ValidationError("layer " + std::to_string(k) + " batch-norm statistics mismatch");
        }
      }
    }
    proxy.norm_mean = j.at("norm").at("mean").get<std::vector<double>>();
    proxy.norm_scale = j.at("norm").at("scale").get<std::vector<double>>();
    if (proxy.norm_mean.size() != proxy.mlp.input_dim() || proxy.norm_scale.size() != proxy.mlp.input_dim()) {
      throw ValidationError("normalization does not match the input width");
    }
    const json& m = j.at("meta");
    proxy.meta.seed = m.value("seed", std::uint64_t{0});
    proxy.meta.case_sha256 = m.value("case_sha256", std::string());
    proxy.meta.loss = parse_loss(m.value("loss", std::string("ssl")));
    proxy.meta.lambda = m.value("lambda", 0.0);
    proxy.meta.mu = m.value("mu", 0.0);
    proxy.meta.epochs = m.value("epochs", 0);
    proxy.meta.best_epoch = m.value("best_epoch", 0);
    proxy.meta.dc3_test_steps = m.value("dc3_test_steps", 200);
    proxy.meta.dc3_rho = m.value("dc3_rho", 1e-4);
    return proxy;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
}

void save_proxy(const std::filesystem::path& path, const TrainedProxy& proxy) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << proxy_to_json(proxy) << '\n';
}

TrainedProxy load_proxy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return proxy_from_json(buf.str());
}

}  // namespace e2elr

#include <fstream>
#include <json.hpp>

#include "aquinv/errors.hpp"
#include "aquinv/io/tensor_file.hpp"
#include "aquinv/net/train.hpp"

namespace aquinv::net {

namespace {

// Parameters first, then batch-norm buffers, in construction order.
std::vector<float> flatten_state(EncoderDecoder<float>& net) {
  std::vector<float> state;
  for (const auto& p : net.params()) state.insert(state.end(), p.value, p.value + p.size);
  for (const auto& b : net.buffers()) state.insert(state.end(), b.value, b.value + b.size);
  return state;
}

void unflatten_state(EncoderDecoder<float>& net, const std::vector<float>& state) {
  size_t off = 0;
  for (const auto& p : net.params()) {
    if (off + p.size > state.size()) throw io_error("checkpoint state too short");
    std::copy(state.begin() + off, state.begin() + off + p.size, p.value);
    off += p.size;
  }
  for (const auto& b : net.buffers()) {
    if (off + b.size > state.size()) throw io_error("checkpoint state too short");
    std::copy(state.begin() + off, state.begin() + off + b.size, b.value);
    off += b.size;
  }
  if (off != state.size()) throw io_error("checkpoint state length mismatch");
}

}  // namespace

void save_surrogate(const std::filesystem::path& dir, const Surrogate& s) {
  std::filesystem::create_directories(dir);
  std::vector<float> state = flatten_state(*s.net);
  io::write_tensor(dir / "checkpoint.aqtn", {state.size()}, state.data());

  nlohmann::json j;
  j["mode"] = mode_name(s.mode);
  j["n_t"] = s.n_t;
  j["n_release"] = s.n_release;
  j["network"] = {{"in_channels", s.spec.in_channels},
                  {"out_channels", s.spec.out_channels},
                  {"initial_features", s.spec.initial_features},
                  {"block_layers", s.spec.block_layers},
                  {"growth_rate", s.spec.growth_rate},
                  {"head_channels", s.spec.head_channels},
                  {"softplus_beta", s.spec.softplus_beta}};
  j["normalization"] = {{"log_k_mean", s.norm.log_k_mean},
                        {"log_k_std", s.norm.log_k_std},
                        {"strength_scale", s.norm.strength_scale},
                        {"conc_scale", s.norm.conc_scale}};
  char hash[20];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(s.data_hash));
  j["data_hash"] = hash;
  j["parameter_count"] = s.net->parameter_count();
  std::ofstream out(dir / "checkpoint.json");
  if (!out) throw io_error("cannot write " + (dir / "checkpoint.json").string());
  out << j.dump(2) << "\n";
}

Surrogate load_surrogate(const std::filesystem::path& dir) {
  std::ifstream in(dir / "checkpoint.json");
  if (!in) throw io_error("cannot read " + (dir / "checkpoint.json").string());
  nlohmann::json j;
  in >> j;

  Surrogate s;
  s.mode = parse_mode(j["mode"]);
  s.n_t = j["n_t"];
  s.n_release = j["n_release"];
  const auto& n = j["network"];
  s.spec.in_channels = n["in_channels"];
  s.spec.out_channels = n["out_channels"];
  s.spec.initial_features = n["initial_features"];
  s.spec.block_layers = n["block_layers"];
  s.spec.growth_rate = n["growth_rate"];
  s.spec.head_channels = n["head_channels"];
  s.spec.softplus_beta = n["softplus_beta"];
  const auto& nm = j["normalization"];
  s.norm.log_k_mean = nm["log_k_mean"];
  s.norm.log_k_std = nm["log_k_std"];
  s.norm.strength_scale = nm["strength_scale"];
  s.norm.conc_scale = nm["conc_scale"];
  s.data_hash = std::stoull(j["data_hash"].get<std::string>(), nullptr, 16);

  s.net = std::make_shared<EncoderDecoder<float>>(s.spec, /*init_seed=*/0);
  auto state = io::read_tensor_f32(dir / "checkpoint.aqtn");
  unflatten_state(*s.net, state);
  return s;
}

}  // namespace aquinv::net

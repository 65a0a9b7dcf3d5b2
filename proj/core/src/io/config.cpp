#include "aquinv/io/config.hpp"

#include <fstream>
#include <json.hpp>
#include <random>
#include <set>

#include "aquinv/errors.hpp"
#include "aquinv/io/tensor_file.hpp"
#include "aquinv/rng.hpp"

namespace aquinv::io {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& scope, const std::set<std::string>& known) {
  if (!j.is_object()) throw config_error("config: '" + scope + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw config_error("config: unknown key '" + scope + "." + key + "'");
}

template <typename T>
void get_to(const json& j, const char* key, T& out, const std::string& scope) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw config_error("config: bad value for '" + scope + "." + key + "': " + e.what());
  }
}

void parse_grid(const json& j, Grid& grid) {
  reject_unknown(j, "grid", {"height_cells", "width_cells", "domain_height", "domain_width"});
  int h = grid.height_cells, w = grid.width_cells;
  double dh = grid.domain_height, dw = grid.domain_width;
  get_to(j, "height_cells", h, "grid");
  get_to(j, "width_cells", w, "grid");
  get_to(j, "domain_height", dh, "grid");
  get_to(j, "domain_width", dw, "grid");
  try {
    grid = Grid(h, w, dh, dw);
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("config: ") + e.what());
  }
}

}  // namespace

std::vector<double> ExperimentConfig::segment_boundaries() const {
  return default_segment_boundaries(n_release, segment_length);
}

ObservationDesign ExperimentConfig::observation_design() const {
  if (wells.empty()) return default_observation_design(grid, snapshot_times);
  ObservationDesign design;
  design.wells = wells;
  design.times = snapshot_times;
  return design;
}

ForwardModelConfig ExperimentConfig::forward_config() const {
  ForwardModelConfig fwd;
  fwd.grid = grid;
  fwd.bc = bc;
  fwd.porosity = porosity;
  fwd.dispersion = dispersion;
  fwd.log_k_mean = covariance.mean;
  fwd.transport = transport;
  fwd.snapshot_times = snapshot_times;
  fwd.design = observation_design();
  if (fixed_conductivity)
    fwd.fixed_log_k =
        Eigen::MatrixXd::Constant(grid.height_cells, grid.width_cells, fixed_log_k);
  return fwd;
}

PriorSpec ExperimentConfig::prior_spec(int n_kl) const {
  PriorSpec spec;
  spec.n_kl = n_kl;
  spec.bounds = prior;
  return spec;
}

SourceSpec ExperimentConfig::reference_source() const {
  return SourceSpec(reference.x, reference.y, reference.strengths, segment_boundaries());
}

Eigen::VectorXd ExperimentConfig::reference_xi(int n_kl) const {
  if (reference.xi_zeros) return Eigen::VectorXd::Zero(n_kl);
  auto rng = make_rng(reference.xi_seed, 0x0EF0);
  std::normal_distribution<double> gauss;
  return Eigen::VectorXd::NullaryExpr(n_kl, [&](Eigen::Index) { return gauss(rng); });
}

void ExperimentConfig::validate() const {
  covariance.validate();
  dispersion.validate();
  if (!(energy_target > 0.0) || energy_target > 1.0)
    throw config_error("config: covariance.energy_target must lie in (0,1]");
  if (!(porosity > 0.0 && porosity < 1.0))
    throw config_error("config: transport.porosity must lie in (0,1)");
  if (!(transport.dt > 0.0)) throw config_error("config: transport.dt must be positive");
  if (snapshot_times.empty()) throw config_error("config: transport.snapshot_times is empty");
  for (size_t i = 0; i + 1 < snapshot_times.size(); ++i)
    if (!(snapshot_times[i] < snapshot_times[i + 1]))
      throw config_error("config: transport.snapshot_times must be strictly increasing");
  if (n_release < 1 || n_release > static_cast<int>(snapshot_times.size()))
    throw config_error("config: source.segments must lie in [1, n_t]");
  if (!(noise_level > 0.0)) throw config_error("config: observation.noise_level must be positive");
  if (network_preset != "paper" && network_preset != "desk")
    throw config_error("config: network.preset must be 'paper' or 'desk'");
  if (reference.strengths.size() != n_release)
    throw config_error("config: reference.strengths must have one entry per release segment");
  for (const auto& [x, y] : wells)
    if (x < 0.0 || x > grid.domain_width || y < 0.0 || y > grid.domain_height)
      throw config_error("config: observation well outside the domain");
  try {
    train.validate();
    ilues.validate();
  } catch (const std::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }
}

ExperimentConfig default_config() {
  ExperimentConfig config;
  config.network = net::paper_network_spec();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error("config: JSON parse failure in " + path.string() + ": " + e.what());
  }

  ExperimentConfig c = default_config();
  reject_unknown(j, "", {"grid", "covariance", "conductivity", "prior", "source", "flow",
                         "transport", "observation", "network", "train", "ilues", "reference",
                         "paths"});

  if (j.contains("grid")) parse_grid(j["grid"], c.grid);

  if (j.contains("covariance")) {
    const json& s = j["covariance"];
    reject_unknown(s, "covariance",
                   {"variance", "corr_len_x", "corr_len_y", "mean", "energy_target"});
    get_to(s, "variance", c.covariance.variance, "covariance");
    get_to(s, "corr_len_x", c.covariance.corr_len_x, "covariance");
    get_to(s, "corr_len_y", c.covariance.corr_len_y, "covariance");
    get_to(s, "mean", c.covariance.mean, "covariance");
    get_to(s, "energy_target", c.energy_target, "covariance");
  }

  if (j.contains("conductivity")) {
    const json& s = j["conductivity"];
    reject_unknown(s, "conductivity", {"mode", "fixed_log_k"});
    std::string mode = c.fixed_conductivity ? "fixed" : "kle";
    get_to(s, "mode", mode, "conductivity");
    if (mode != "kle" && mode != "fixed")
      throw config_error("config: conductivity.mode must be 'kle' or 'fixed'");
    c.fixed_conductivity = mode == "fixed";
    get_to(s, "fixed_log_k", c.fixed_log_k, "conductivity");
  }

  if (j.contains("prior")) {
    const json& s = j["prior"];
    reject_unknown(s, "prior", {"x", "y", "strength"});
    std::vector<double> range;
    auto read_range = [&](const char* key, double& lo, double& hi) {
      if (!s.contains(key)) return;
      range.clear();
      get_to(s, key, range, "prior");
      if (range.size() != 2 || !(range[0] < range[1]))
        throw config_error(std::string("config: prior.") + key + " must be [lo, hi]");
      lo = range[0];
      hi = range[1];
    };
    read_range("x", c.prior.x_min, c.prior.x_max);
    read_range("y", c.prior.y_min, c.prior.y_max);
    read_range("strength", c.prior.strength_min, c.prior.strength_max);
  }

  if (j.contains("source")) {
    const json& s = j["source"];
    reject_unknown(s, "source", {"segments", "segment_length"});
    get_to(s, "segments", c.n_release, "source");
    get_to(s, "segment_length", c.segment_length, "source");
  }

  if (j.contains("flow")) {
    const json& s = j["flow"];
    reject_unknown(s, "flow", {"left_head", "right_head", "rel_tolerance", "max_iter_factor"});
    get_to(s, "left_head", c.bc.left_head, "flow");
    get_to(s, "right_head", c.bc.right_head, "flow");
    get_to(s, "rel_tolerance", c.flow_options.rel_tolerance, "flow");
    get_to(s, "max_iter_factor", c.flow_options.max_iter_factor, "flow");
  }

  if (j.contains("transport")) {
    const json& s = j["transport"];
    reject_unknown(s, "transport", {"porosity", "alpha_l", "alpha_t", "dt", "snapshot_times"});
    get_to(s, "porosity", c.porosity, "transport");
    get_to(s, "alpha_l", c.dispersion.alpha_l, "transport");
    get_to(s, "alpha_t", c.dispersion.alpha_t, "transport");
    get_to(s, "dt", c.transport.dt, "transport");
    get_to(s, "snapshot_times", c.snapshot_times, "transport");
  }

  if (j.contains("observation")) {
    const json& s = j["observation"];
    reject_unknown(s, "observation", {"wells", "noise_level"});
    get_to(s, "noise_level", c.noise_level, "observation");
    if (s.contains("wells")) {
      std::vector<std::vector<double>> raw;
      get_to(s, "wells", raw, "observation");
      c.wells.clear();
      for (const auto& w : raw) {
        if (w.size() != 2) throw config_error("config: observation.wells entries must be [x, y]");
        c.wells.emplace_back(w[0], w[1]);
      }
    }
  }

  if (j.contains("network")) {
    const json& s = j["network"];
    reject_unknown(s, "network",
                   {"preset", "initial_features", "block_layers", "growth_rate", "softplus_beta"});
    get_to(s, "preset", c.network_preset, "network");
  }
  c.network = c.network_preset == "desk" ? net::desk_network_spec() : net::paper_network_spec();
  if (j.contains("network")) {
    const json& s = j["network"];
    get_to(s, "initial_features", c.network.initial_features, "network");
    get_to(s, "block_layers", c.network.block_layers, "network");
    get_to(s, "growth_rate", c.network.growth_rate, "network");
    get_to(s, "softplus_beta", c.network.softplus_beta, "network");
  }

  if (j.contains("train")) {
    const json& s = j["train"];
    reject_unknown(s, "train",
                   {"batch_size_ar", "batch_size_plain", "epochs", "learning_rate", "weight_decay",
                    "loss_weight", "scheduler"});
    get_to(s, "batch_size_ar", c.train.batch_size_ar, "train");
    get_to(s, "batch_size_plain", c.train.batch_size_plain, "train");
    get_to(s, "epochs", c.train.epochs, "train");
    get_to(s, "learning_rate", c.train.learning_rate, "train");
    get_to(s, "weight_decay", c.train.weight_decay, "train");
    get_to(s, "loss_weight", c.train.loss_weight, "train");
    if (s.contains("scheduler")) {
      const json& sch = s["scheduler"];
      reject_unknown(sch, "train.scheduler", {"factor", "patience", "threshold", "min_lr_ratio"});
      get_to(sch, "factor", c.train.scheduler_factor, "train.scheduler");
      get_to(sch, "patience", c.train.scheduler_patience, "train.scheduler");
      get_to(sch, "threshold", c.train.scheduler_threshold, "train.scheduler");
      get_to(sch, "min_lr_ratio", c.train.scheduler_min_lr_ratio, "train.scheduler");
    }
  }

  if (j.contains("ilues")) {
    const json& s = j["ilues"];
    reject_unknown(s, "ilues",
                   {"ensemble_size", "local_fraction", "iterations", "inflation",
                    "cmm_jitter_ratio"});
    get_to(s, "ensemble_size", c.ilues.ensemble_size, "ilues");
    get_to(s, "local_fraction", c.ilues.local_fraction, "ilues");
    get_to(s, "iterations", c.ilues.iterations, "ilues");
    get_to(s, "inflation", c.ilues.inflation, "ilues");
    get_to(s, "cmm_jitter_ratio", c.ilues.cmm_jitter_ratio, "ilues");
  }

  if (j.contains("reference")) {
    const json& s = j["reference"];
    reject_unknown(s, "reference", {"x", "y", "strengths", "xi", "xi_seed"});
    get_to(s, "x", c.reference.x, "reference");
    get_to(s, "y", c.reference.y, "reference");
    if (s.contains("strengths")) {
      std::vector<double> strengths;
      get_to(s, "strengths", strengths, "reference");
      c.reference.strengths =
          Eigen::Map<Eigen::VectorXd>(strengths.data(), static_cast<long>(strengths.size()));
    }
    if (s.contains("xi")) {
      std::string mode;
      get_to(s, "xi", mode, "reference");
      if (mode != "zeros" && mode != "random")
        throw config_error("config: reference.xi must be 'zeros' or 'random'");
      c.reference.xi_zeros = mode == "zeros";
    }
    get_to(s, "xi_seed", c.reference.xi_seed, "reference");
  }

  if (j.contains("paths")) {
    const json& s = j["paths"];
    reject_unknown(s, "paths", {"kle_cache"});
    std::string cache;
    get_to(s, "kle_cache", cache, "paths");
    if (!cache.empty()) c.kle_cache = cache;
  }

  c.validate();
  return c;
}

std::string config_json(const ExperimentConfig& c) {
  json j;
  j["grid"] = {{"height_cells", c.grid.height_cells},
               {"width_cells", c.grid.width_cells},
               {"domain_height", c.grid.domain_height},
               {"domain_width", c.grid.domain_width}};
  j["covariance"] = {{"variance", c.covariance.variance},
                     {"corr_len_x", c.covariance.corr_len_x},
                     {"corr_len_y", c.covariance.corr_len_y},
                     {"mean", c.covariance.mean},
                     {"energy_target", c.energy_target}};
  j["conductivity"] = {{"mode", c.fixed_conductivity ? "fixed" : "kle"},
                       {"fixed_log_k", c.fixed_log_k}};
  j["prior"] = {{"x", {c.prior.x_min, c.prior.x_max}},
                {"y", {c.prior.y_min, c.prior.y_max}},
                {"strength", {c.prior.strength_min, c.prior.strength_max}}};
  j["source"] = {{"segments", c.n_release}, {"segment_length", c.segment_length}};
  j["flow"] = {{"left_head", c.bc.left_head},
               {"right_head", c.bc.right_head},
               {"rel_tolerance", c.flow_options.rel_tolerance},
               {"max_iter_factor", c.flow_options.max_iter_factor}};
  j["transport"] = {{"porosity", c.porosity},
                    {"alpha_l", c.dispersion.alpha_l},
                    {"alpha_t", c.dispersion.alpha_t},
                    {"dt", c.transport.dt},
                    {"snapshot_times", c.snapshot_times}};
  json wells = json::array();
  for (const auto& [x, y] : c.wells) wells.push_back({x, y});
  j["observation"] = {{"wells", wells}, {"noise_level", c.noise_level}};
  j["network"] = {{"preset", c.network_preset},
                  {"initial_features", c.network.initial_features},
                  {"block_layers", c.network.block_layers},
                  {"growth_rate", c.network.growth_rate},
                  {"softplus_beta", c.network.softplus_beta}};
  j["train"] = {{"batch_size_ar", c.train.batch_size_ar},
                {"batch_size_plain", c.train.batch_size_plain},
                {"epochs", c.train.epochs},
                {"learning_rate", c.train.learning_rate},
                {"weight_decay", c.train.weight_decay},
                {"loss_weight", c.train.loss_weight},
                {"scheduler",
                 {{"factor", c.train.scheduler_factor},
                  {"patience", c.train.scheduler_patience},
                  {"threshold", c.train.scheduler_threshold},
                  {"min_lr_ratio", c.train.scheduler_min_lr_ratio}}}};
  j["ilues"] = {{"ensemble_size", c.ilues.ensemble_size},
                {"local_fraction", c.ilues.local_fraction},
                {"iterations", c.ilues.iterations},
                {"inflation", c.ilues.inflation},
                {"cmm_jitter_ratio", c.ilues.cmm_jitter_ratio}};
  std::vector<double> strengths(c.reference.strengths.data(),
                                c.reference.strengths.data() + c.reference.strengths.size());
  j["reference"] = {{"x", c.reference.x},
                    {"y", c.reference.y},
                    {"strengths", strengths},
                    {"xi", c.reference.xi_zeros ? "zeros" : "random"},
                    {"xi_seed", c.reference.xi_seed}};
  j["paths"] = {{"kle_cache", c.kle_cache.string()}};
  return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  const std::string s = config_json(config);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::shared_ptr<const KleBasis> ensure_basis(const ExperimentConfig& config) {
  // cache key: the covariance-relevant part of the config
  ExperimentConfig key_cfg = default_config();
  key_cfg.grid = config.grid;
  key_cfg.covariance = config.covariance;
  key_cfg.energy_target = config.energy_target;
  char key[20];
  std::snprintf(key, sizeof(key), "%016llx",
                static_cast<unsigned long long>(config_hash(key_cfg)));
  const std::filesystem::path dir = config.kle_cache / key;

  if (std::filesystem::exists(dir / "kle.json")) {
    CovarianceSpec cached_spec;
    KleBasis basis = load_basis(dir, &cached_spec);
    if (basis.grid == config.grid && cached_spec.variance == config.covariance.variance &&
        cached_spec.corr_len_x == config.covariance.corr_len_x &&
        cached_spec.corr_len_y == config.covariance.corr_len_y)
      return std::make_shared<KleBasis>(std::move(basis));
  }

  KleBasis basis =
      decompose(config.grid, assemble_covariance(config.grid, config.covariance),
                config.energy_target);
  save_basis(dir, basis, config.covariance);
  return std::make_shared<KleBasis>(std::move(basis));
}

}  // namespace aquinv::io

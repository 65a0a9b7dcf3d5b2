// aquinv: sample-prior | simulate | train | invert | metrics
//
// Exit codes: 0 success, 2 configuration error, 3 numeric error, 4 I/O error.

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <thread>

#include "aquinv/errors.hpp"
#include "aquinv/evaluators.hpp"
#include "aquinv/io/config.hpp"
#include "aquinv/io/csv.hpp"
#include "aquinv/io/dataset.hpp"
#include "aquinv/io/tensor_file.hpp"
#include "aquinv/metrics.hpp"
#include "aquinv/rng.hpp"

namespace fs = std::filesystem;
using namespace aquinv;
using nlohmann::json;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void write_manifest(const fs::path& dir, const io::ExperimentConfig& config,
                    const std::string& command, std::uint64_t seed, double wall_seconds,
                    json extra = {}) {
  json j;
  j["command"] = command;
  char hash[20];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(io::config_hash(config)));
  j["config_hash"] = hash;
  j["seed"] = seed;
  j["wall_clock_seconds"] = wall_seconds;
  if (!extra.is_null()) j["details"] = std::move(extra);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw io_error("cannot write manifest in " + dir.string());
  out << j.dump(2) << "\n";
}

std::shared_ptr<const KleBasis> basis_for(const io::ExperimentConfig& config) {
  if (config.fixed_conductivity) return nullptr;
  return io::ensure_basis(config);
}

int modes_of(const std::shared_ptr<const KleBasis>& basis) { return basis ? basis->n_kl() : 0; }

// ---------------------------------------------------------------------------
// sample-prior
// ---------------------------------------------------------------------------
void cmd_sample_prior(const io::ExperimentConfig& config, int count, std::uint64_t seed,
                      const fs::path& out) {
  Timer timer;
  fs::create_directories(out);
  auto basis = basis_for(config);
  PriorSpec prior = config.prior_spec(modes_of(basis));

  Eigen::MatrixXd params(count, prior.n_params());
  for (int i = 0; i < count; ++i) {
    auto rng = make_rng(seed, 0x5A3E, i);
    params.row(i) = prior.draw(rng).transpose();
  }
  io::write_matrix(out / "params.aqtn", params);
  write_manifest(out, config, "sample-prior", seed, timer.seconds(),
                 {{"count", count}, {"n_params", prior.n_params()}});
  std::printf("sample-prior: wrote %d x %d parameter matrix to %s\n", count, prior.n_params(),
              (out / "params.aqtn").c_str());
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------
struct RecordResult {
  Field head;
  std::vector<Field> concentrations;
  MassBalanceReport balance;
};

RecordResult simulate_record(const io::ExperimentConfig& config, const KleBasis* basis,
                             const ParameterVector& params, const Field* cached_head,
                             const VelocityField* cached_velocity) {
  RecordResult result;
  const ForwardModelConfig fwd = config.forward_config();
  if (cached_head && cached_velocity) {
    result.head = *cached_head;
    result.concentrations =
        simulate_transport(config.grid, *cached_velocity, config.dispersion, params.source,
                           config.porosity, config.snapshot_times, config.transport,
                           &result.balance);
    return result;
  }
  Field log_k = basis ? synthesize(*basis, params.xi, config.covariance.mean)
                      : Field(config.grid, FieldKind::log_conductivity, *fwd.fixed_log_k);
  Field k(config.grid, FieldKind::conductivity, log_k.values.array().exp());
  result.head = solve_head(config.grid, k, config.bc, config.flow_options);
  VelocityField v = darcy_velocity(config.grid, k, result.head, config.porosity, config.bc);
  result.concentrations =
      simulate_transport(config.grid, v, config.dispersion, params.source, config.porosity,
                         config.snapshot_times, config.transport, &result.balance);
  return result;
}

void cmd_simulate(const io::ExperimentConfig& config, const fs::path& params_path,
                  const fs::path& out, int jobs, std::uint64_t seed, bool make_obs,
                  bool mass_balance) {
  Timer timer;
  fs::create_directories(out);
  auto basis = basis_for(config);
  const int n_kl = modes_of(basis);
  const auto boundaries = config.segment_boundaries();
  const ObservationDesign design = config.observation_design();
  io::DatasetPaths paths{out};

  Eigen::MatrixXd params = io::read_matrix(params_path);
  if (params.cols() != n_kl + 2 + config.n_release)
    throw config_error("simulate: parameter width " + std::to_string(params.cols()) +
                       " does not match the configuration (" +
                       std::to_string(n_kl + 2 + config.n_release) + ")");
  const int count = static_cast<int>(params.rows());
  if (!fs::exists(paths.params())) io::write_matrix(paths.params(), params);

  // fixed-conductivity runs share one flow solution
  std::optional<Field> cached_head;
  std::optional<VelocityField> cached_velocity;
  if (config.fixed_conductivity) {
    Field log_k(config.grid, FieldKind::log_conductivity,
                Eigen::MatrixXd::Constant(config.grid.height_cells, config.grid.width_cells,
                                          config.fixed_log_k));
    Field k(config.grid, FieldKind::conductivity, log_k.values.array().exp());
    cached_head = solve_head(config.grid, k, config.bc, config.flow_options);
    cached_velocity = darcy_velocity(config.grid, k, *cached_head, config.porosity, config.bc);
  }

  std::atomic<int> next{0};
  std::atomic<int> simulated{0}, skipped{0}, failed{0};
  std::vector<std::string> failures;
  std::mutex failures_mutex;
  std::vector<std::vector<double>> balance_rows(count);

  auto worker = [&]() {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      if (fs::exists(paths.fields(i))) {
        try {
          io::read_tensor(paths.fields(i));  // CRC check; complete record
          ++skipped;
          continue;
        } catch (const io_error&) {
          // partial or corrupt record: redo it
        }
      }
      try {
        ParameterVector p = unpack(params.row(i).transpose(), n_kl, config.n_release, boundaries);
        RecordResult result = simulate_record(config, basis.get(), p,
                                              cached_head ? &*cached_head : nullptr,
                                              cached_velocity ? &*cached_velocity : nullptr);
        io::write_field_stack(paths.fields(i), result.head, result.concentrations);
        if (mass_balance) {
          std::vector<double> flat;
          for (const auto& row : result.balance.rows) {
            flat.insert(flat.end(), {static_cast<double>(i), row.time, row.injected, row.stored,
                                     row.outflux, row.clamped, row.residual_rel});
          }
          balance_rows[i] = std::move(flat);
        }
        ++simulated;
      } catch (const std::exception& e) {
        ++failed;
        std::lock_guard<std::mutex> lock(failures_mutex);
        failures.push_back("record " + std::to_string(i) + ": " + e.what());
      }
    }
  };

  const int n_threads = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads - 1; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // observation table over all complete records
  std::vector<std::vector<double>> obs_rows;
  for (int i = 0; i < count; ++i) {
    if (!fs::exists(paths.fields(i))) continue;
    auto [head, concentrations] = io::read_field_stack(paths.fields(i), config.grid);
    ForwardOutputs outputs;
    outputs.head = std::move(head);
    outputs.concentrations = std::move(concentrations);
    Eigen::VectorXd obs = observe(outputs, design);
    obs_rows.emplace_back(obs.data(), obs.data() + obs.size());
  }
  io::write_csv(paths.obs(), io::observation_headers(design), obs_rows);

  if (mass_balance) {
    std::vector<std::vector<double>> rows;
    for (auto& flat : balance_rows)
      for (size_t k = 0; k + 7 <= flat.size(); k += 7)
        rows.push_back({flat[k], flat[k + 1], flat[k + 2], flat[k + 3], flat[k + 4], flat[k + 5],
                        flat[k + 6]});
    io::write_csv(out / "mass_balance.csv",
                  {"record", "time", "injected", "stored", "outflux", "clamped", "residual_rel"},
                  rows);
  }

  if (make_obs) {
    ParameterVector ref;
    ref.xi = config.reference_xi(n_kl);
    ref.source = config.reference_source();
    RecordResult truth_run = simulate_record(config, basis.get(), ref,
                                             cached_head ? &*cached_head : nullptr,
                                             cached_velocity ? &*cached_velocity : nullptr);
    ForwardOutputs outputs;
    outputs.head = truth_run.head;
    outputs.concentrations = truth_run.concentrations;
    Eigen::VectorXd truth = observe(outputs, design);
    auto [observed, noise] = make_noise(truth, design, config.noise_level, seed);

    std::vector<std::vector<double>> rows;
    const int per_well = static_cast<int>(design.times.size()) + 1;
    for (int i = 0; i < truth.size(); ++i) {
      const int w = i / per_well, slot = i % per_well;
      const bool is_head = slot == per_well - 1;
      rows.push_back({static_cast<double>(w), design.wells[w].first, design.wells[w].second,
                      is_head ? -1.0 : design.times[slot], is_head ? 1.0 : 0.0, truth[i],
                      observed[i], noise.sigma[i]});
    }
    io::write_csv(out / "obs_reference.csv",
                  {"well", "x", "y", "time", "is_head", "truth", "observed", "sigma"}, rows);
    io::write_field_stack(out / "fields_reference.aqtn", truth_run.head,
                          truth_run.concentrations);
  }

  write_manifest(out, config, "simulate", seed, timer.seconds(),
                 {{"records", count},
                  {"simulated", simulated.load()},
                  {"skipped", skipped.load()},
                  {"failed", failed.load()},
                  {"failures", failures},
                  {"jobs", n_threads}});
  std::printf("simulate: %d records (%d new, %d resumed, %d failed) in %.1fs\n", count,
              simulated.load(), skipped.load(), failed.load(), timer.seconds());
  if (failed.load() > 0)
    for (const auto& f : failures) std::fprintf(stderr, "  %s\n", f.c_str());
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------
void train_one(const io::ExperimentConfig& config, const std::vector<net::SimulationRecord>& records,
               net::SurrogateMode mode, double loss_weight, std::uint64_t seed,
               const fs::path& out) {
  Timer timer;
  fs::create_directories(out);
  net::TrainConfig tc = config.train;
  tc.seed = seed;
  tc.loss_weight = loss_weight;

  net::NormalizationSpec hint;
  hint.log_k_mean = config.covariance.mean;
  hint.log_k_std = std::sqrt(config.covariance.variance);
  hint.strength_scale = config.prior.strength_max;

  net::Surrogate surrogate = net::train_surrogate(records, config.network, tc, mode, hint);
  net::save_surrogate(out, surrogate);

  std::vector<std::vector<double>> rows;
  for (const auto& stat : surrogate.history)
    rows.push_back({static_cast<double>(stat.epoch), stat.loss, stat.lr});
  io::write_csv(out / "loss.csv", {"epoch", "loss", "learning_rate"}, rows);

  write_manifest(out, config, "train", seed, timer.seconds(),
                 {{"mode", net::mode_name(mode)},
                  {"records", records.size()},
                  {"loss_weight", loss_weight},
                  {"final_loss", surrogate.history.empty() ? 0.0 : surrogate.history.back().loss},
                  {"parameters", surrogate.net->parameter_count()}});
  std::printf("train: %s (w_c=%g) final loss %.6f in %.1fs -> %s\n",
              net::mode_name(mode).c_str(), loss_weight,
              surrogate.history.empty() ? 0.0 : surrogate.history.back().loss, timer.seconds(),
              out.c_str());
}

void cmd_train(const io::ExperimentConfig& config, const fs::path& dataset,
               const std::string& mode_name, const fs::path& out, std::uint64_t seed,
               const std::vector<double>& wc_sweep, int limit) {
  auto basis = basis_for(config);
  auto records = io::load_records(config, basis.get(), dataset, limit);
  if (records.empty()) throw config_error("train: dataset is empty");
  net::SurrogateMode mode = net::parse_mode(mode_name);

  if (wc_sweep.empty()) {
    const double wc =
        mode == net::SurrogateMode::autoregressive_weighted ? config.train.loss_weight : 0.0;
    train_one(config, records, mode, wc, seed, out);
    return;
  }
  if (mode != net::SurrogateMode::autoregressive_weighted)
    throw config_error("train: --wc-sweep requires mode ar-net-wl");
  for (double wc : wc_sweep) {
    char sub[32];
    std::snprintf(sub, sizeof(sub), "wc_%g", wc);
    train_one(config, records, mode, wc, seed, out / sub);
  }
}

// ---------------------------------------------------------------------------
// invert
// ---------------------------------------------------------------------------
std::vector<double> quantiles(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  auto pick = [&](double q) {
    const double pos = q * (values.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - lo) * (values[hi] - values[lo]);
  };
  return {values.front(), pick(0.25), pick(0.5), pick(0.75), values.back()};
}

void cmd_invert(const io::ExperimentConfig& config, const std::string& evaluator_arg,
                const fs::path& obs_path, const fs::path& out, std::uint64_t seed) {
  Timer timer;
  fs::create_directories(out);
  auto basis = basis_for(config);
  const int n_kl = modes_of(basis);
  const ForwardModelConfig fwd = config.forward_config();

  io::CsvTable obs = io::read_csv(obs_path);
  const int col_obs = obs.column("observed"), col_sigma = obs.column("sigma");
  if (col_obs < 0 || col_sigma < 0)
    throw config_error("invert: observation file needs 'observed' and 'sigma' columns");
  const int n_d = static_cast<int>(obs.rows.size());
  if (n_d != fwd.design.n_obs())
    throw config_error("invert: observation count " + std::to_string(n_d) +
                       " does not match the design (" + std::to_string(fwd.design.n_obs()) + ")");
  Eigen::VectorXd d(n_d), sigma(n_d);
  for (int i = 0; i < n_d; ++i) {
    d[i] = obs.rows[i][col_obs];
    sigma[i] = obs.rows[i][col_sigma];
  }

  std::unique_ptr<ForwardEvaluator> evaluator;
  if (evaluator_arg == "simulator") {
    evaluator = std::make_unique<SimulatorEvaluator>(fwd, basis);
  } else if (evaluator_arg.rfind("surrogate:", 0) == 0) {
    net::Surrogate surrogate = net::load_surrogate(evaluator_arg.substr(10));
    evaluator = std::make_unique<SurrogateEvaluator>(std::move(surrogate), fwd, basis);
  } else {
    throw config_error("invert: evaluator must be 'simulator' or 'surrogate:DIR'");
  }

  IluesConfig ilues = config.ilues;
  ilues.seed = seed;
  PriorSpec prior = config.prior_spec(n_kl);

  std::vector<std::vector<double>> sswr_rows, box_rows;
  auto persist = [&](const Ensemble& ens) {
    char name[48];
    std::snprintf(name, sizeof(name), "iter_%02d_params.aqtn", ens.iteration);
    io::write_matrix(out / name, ens.params);
    std::snprintf(name, sizeof(name), "iter_%02d_preds.aqtn", ens.iteration);
    io::write_matrix(out / name, ens.preds);

    std::vector<double> vals(ens.preds.rows());
    for (int i = 0; i < ens.preds.rows(); ++i)
      vals[i] = sswr(ens.preds.row(i).transpose(), d, sigma);
    auto q = quantiles(vals);
    sswr_rows.push_back({static_cast<double>(ens.iteration), q[0], q[1], q[2], q[3], q[4]});

    for (int p = 0; p < 7; ++p) {
      std::vector<double> column(ens.params.rows());
      for (int i = 0; i < ens.params.rows(); ++i) column[i] = ens.params(i, n_kl + p);
      auto qq = quantiles(column);
      box_rows.push_back(
          {static_cast<double>(ens.iteration), static_cast<double>(p), qq[0], qq[1], qq[2], qq[3],
           qq[4]});
    }
    std::printf("invert: iteration %d, median SSWR %.4g\n", ens.iteration, q[2]);
  };

  IluesResult result = run_ilues(prior, *evaluator, d, sigma, ilues, persist);

  io::write_csv(out / "sswr.csv", {"iteration", "min", "q25", "median", "q75", "max"}, sswr_rows);
  io::write_csv(out / "source_boxplot.csv",
                {"iteration", "parameter", "min", "q25", "median", "q75", "max"}, box_rows);

  if (basis) {  // posterior log-conductivity statistics from the final ensemble
    const Ensemble& last = result.history.back();
    Eigen::MatrixXd mean_acc =
        Eigen::MatrixXd::Zero(config.grid.height_cells, config.grid.width_cells);
    Eigen::MatrixXd sq_acc = mean_acc;
    for (int i = 0; i < last.params.rows(); ++i) {
      Field g = synthesize(*basis, last.params.row(i).head(n_kl).transpose(),
                           config.covariance.mean);
      mean_acc += g.values;
      sq_acc += g.values.cwiseProduct(g.values);
    }
    mean_acc /= last.params.rows();
    Eigen::MatrixXd var = sq_acc / last.params.rows() - mean_acc.cwiseProduct(mean_acc);
    io::write_field_stack(out / "posterior_logk.aqtn",
                          Field(config.grid, FieldKind::log_conductivity, mean_acc),
                          {Field(config.grid, FieldKind::log_conductivity, var.cwiseMax(0.0))});
  }

  write_manifest(out, config, "invert", seed, timer.seconds(),
                 {{"evaluator", evaluator->name()},
                  {"forward_calls", evaluator->calls()},
                  {"forward_failures", result.forward_failures},
                  {"iterations", ilues.iterations},
                  {"ensemble_size", ilues.ensemble_size}});
  std::printf("invert: %s evaluator, %ld forward calls, %.1fs\n", evaluator->name().c_str(),
              evaluator->calls(), timer.seconds());
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------
void cmd_metrics(const io::ExperimentConfig& config, const fs::path& dataset,
                 const fs::path& checkpoint, const fs::path& predictions, const fs::path& out,
                 int limit) {
  Timer timer;
  fs::create_directories(out);
  auto basis = basis_for(config);
  auto records = io::load_records(config, basis.get(), dataset, limit);
  if (records.size() < 2) throw config_error("metrics: need at least 2 records");

  const bool from_checkpoint = predictions.empty();
  net::Surrogate surrogate;
  std::vector<net::SimulationRecord> pred_records;
  if (from_checkpoint) {
    surrogate = net::load_surrogate(checkpoint);
  } else {
    pred_records = io::load_records(config, basis.get(), predictions,
                                    static_cast<int>(records.size()));
    if (pred_records.size() != records.size())
      throw config_error("metrics: prediction dataset is smaller than the truth dataset");
  }

  const Grid& grid = config.grid;
  const int n_t = static_cast<int>(config.snapshot_times.size());
  const int dim = (1 + n_t) * grid.n_cells();
  Eigen::MatrixXd truth(records.size(), dim), pred(records.size(), dim);
  std::vector<Field> truth_release, pred_release;
  std::vector<std::vector<double>> per_field_rows;

  for (size_t i = 0; i < records.size(); ++i) {
    net::SurrogatePrediction p;
    if (from_checkpoint) {
      p = net::predict(surrogate, records[i].log_k, records[i].sources);
    } else {
      p.head = pred_records[i].head;
      p.concentrations = pred_records[i].concentrations;
    }
    int k = 0;
    for (int r = 0; r < grid.height_cells; ++r)
      for (int c = 0; c < grid.width_cells; ++c) {
        truth(i, k) = records[i].head(r, c);
        pred(i, k) = p.head(r, c);
        ++k;
      }
    for (int j = 0; j < n_t; ++j)
      for (int r = 0; r < grid.height_cells; ++r)
        for (int c = 0; c < grid.width_cells; ++c) {
          truth(i, k) = records[i].concentrations[j](r, c);
          pred(i, k) = p.concentrations[j](r, c);
          ++k;
        }
    for (int j = 0; j < records[i].n_release; ++j) {
      truth_release.push_back(records[i].concentrations[j]);
      pred_release.push_back(p.concentrations[j]);
      const double err =
          (records[i].concentrations[j].values - p.concentrations[j].values).cwiseAbs().maxCoeff();
      per_field_rows.push_back({static_cast<double>(i), config.snapshot_times[j], err});
    }
  }

  const double r2 = r2_score(truth, pred);
  const double rmse_val = rmse(truth, pred);
  auto stats = max_abs_error_per_field(truth_release, pred_release);

  json report;
  report["n_test"] = records.size();
  report["r2"] = r2;
  report["rmse"] = rmse_val;
  report["max_abs_error_mean"] = stats.mean;
  report["max_abs_error_std"] = stats.stddev;
  report["source"] = from_checkpoint ? "checkpoint rollout" : "prediction dataset";
  std::ofstream rep(out / "report.json");
  if (!rep) throw io_error("cannot write report in " + out.string());
  rep << report.dump(2) << "\n";

  io::write_csv(out / "max_abs_error.csv", {"record", "time", "max_abs_error"}, per_field_rows);
  io::write_csv(out / "summary.csv", {"r2", "rmse", "max_abs_error_mean", "max_abs_error_std"},
                {{r2, rmse_val, stats.mean, stats.stddev}});

  write_manifest(out, config, "metrics", 0, timer.seconds(),
                 {{"checkpoint", checkpoint.string()},
                  {"predictions", predictions.string()},
                  {"records", records.size()}});
  std::printf("metrics: R2 = %.4f, RMSE = %.4f, |e_c|max mean = %.4f (std %.4f) over %zu records\n",
              r2, rmse_val, stats.mean, stats.stddev, records.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Groundwater contaminant source identification: simulator, surrogate, inversion"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;

  auto add_common = [&](CLI::App* cmd, bool needs_out = true) {
    cmd->add_option("--config", config_path, "experiment configuration (JSON)")->required();
    cmd->add_option("--seed", seed, "random seed");
    if (needs_out) cmd->add_option("--out", out_dir, "output directory")->required();
  };

  auto* sample = app.add_subcommand("sample-prior", "draw parameter vectors from the prior");
  int count = 100;
  add_common(sample);
  sample->add_option("--count", count, "number of samples")->required();

  auto* simulate = app.add_subcommand("simulate", "run the forward model over a parameter file");
  std::string params_path;
  int jobs = 1;
  bool make_obs = false, mass_balance = false;
  add_common(simulate);
  simulate->add_option("--params", params_path, "parameter tensor (records x n_params)")
      ->required();
  simulate->add_option("--jobs", jobs, "concurrent records");
  simulate->add_flag("--make-obs", make_obs, "also synthesize noisy reference observations");
  simulate->add_flag("--mass-balance", mass_balance, "emit the mass-balance diagnostic CSV");

  auto* train = app.add_subcommand("train", "train a surrogate network on a simulated dataset");
  std::string dataset_dir, mode = "ar-net-wl", wc_list;
  int limit = -1;
  add_common(train);
  train->add_option("--dataset", dataset_dir, "simulated dataset directory")->required();
  train->add_option("--mode", mode, "net | ar-net | ar-net-wl");
  train->add_option("--wc-sweep", wc_list, "comma-separated loss weights (ar-net-wl only)");
  train->add_option("--limit", limit, "use only the first N records");

  auto* invert = app.add_subcommand("invert", "run the iterative ensemble smoother");
  std::string evaluator = "simulator", obs_path;
  add_common(invert);
  invert->add_option("--evaluator", evaluator, "simulator | surrogate:DIR");
  invert->add_option("--obs", obs_path, "reference observation CSV")->required();

  auto* metrics = app.add_subcommand("metrics", "evaluate predictions against a truth dataset");
  std::string checkpoint_dir, predictions_dir;
  add_common(metrics);
  metrics->add_option("--dataset", dataset_dir, "truth dataset directory")->required();
  auto* ckpt_opt = metrics->add_option("--checkpoint", checkpoint_dir,
                                       "trained surrogate directory (rollout predictions)");
  metrics->add_option("--predictions", predictions_dir, "prediction dataset directory")
      ->excludes(ckpt_opt);
  metrics->add_option("--limit", limit, "use only the first N records");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    io::ExperimentConfig config = io::load_config(config_path);
    if (sample->parsed()) {
      cmd_sample_prior(config, count, seed, out_dir);
    } else if (simulate->parsed()) {
      cmd_simulate(config, params_path, out_dir, jobs, seed, make_obs, mass_balance);
    } else if (train->parsed()) {
      std::vector<double> sweep;
      if (!wc_list.empty()) {
        std::stringstream ss(wc_list);
        std::string tok;
        while (std::getline(ss, tok, ',')) sweep.push_back(std::stod(tok));
      }
      cmd_train(config, dataset_dir, mode, out_dir, seed, sweep, limit);
    } else if (invert->parsed()) {
      cmd_invert(config, evaluator, obs_path, out_dir, seed);
    } else if (metrics->parsed()) {
      if (checkpoint_dir.empty() && predictions_dir.empty())
        throw config_error("metrics: need --checkpoint or --predictions");
      cmd_metrics(config, dataset_dir, checkpoint_dir, predictions_dir, out_dir, limit);
    }
  } catch (const config_error& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const io_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

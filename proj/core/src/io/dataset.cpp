#include "aquinv/io/dataset.hpp"

#include <cstdio>

#include "aquinv/errors.hpp"
#include "aquinv/io/csv.hpp"
#include "aquinv/io/tensor_file.hpp"

namespace aquinv::io {

std::filesystem::path DatasetPaths::fields(int index) const {
  char name[32];
  std::snprintf(name, sizeof(name), "fields_%04d.aqtn", index);
  return dir / name;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  // row-major on disk
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  write_tensor(path, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
               rm.data());
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  std::vector<std::uint64_t> dims;
  auto data = read_tensor_f64(path, &dims);
  if (dims.size() != 2) throw io_error("expected a rank-2 tensor in " + path.string());
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      data.data(), static_cast<long>(dims[0]), static_cast<long>(dims[1]));
}

void write_field_stack(const std::filesystem::path& path, const Field& head,
                       const std::vector<Field>& concentrations) {
  const Grid& g = head.grid;
  const int n_t = static_cast<int>(concentrations.size());
  const size_t plane = static_cast<size_t>(g.height_cells) * g.width_cells;
  std::vector<double> data((1 + n_t) * plane);
  auto copy_field = [&](const Field& f, size_t channel) {
    for (int r = 0; r < g.height_cells; ++r)
      for (int c = 0; c < g.width_cells; ++c)
        data[channel * plane + static_cast<size_t>(r) * g.width_cells + c] = f(r, c);
  };
  copy_field(head, 0);
  for (int j = 0; j < n_t; ++j) copy_field(concentrations[j], 1 + j);
  write_tensor(path,
               {static_cast<std::uint64_t>(1 + n_t), static_cast<std::uint64_t>(g.height_cells),
                static_cast<std::uint64_t>(g.width_cells)},
               data.data());
}

std::pair<Field, std::vector<Field>> read_field_stack(const std::filesystem::path& path,
                                                      const Grid& grid) {
  std::vector<std::uint64_t> dims;
  auto data = read_tensor_f64(path, &dims);
  if (dims.size() != 3 || dims[1] != static_cast<std::uint64_t>(grid.height_cells) ||
      dims[2] != static_cast<std::uint64_t>(grid.width_cells))
    throw io_error("field stack shape mismatch in " + path.string());
  const int channels = static_cast<int>(dims[0]);
  const size_t plane = static_cast<size_t>(grid.height_cells) * grid.width_cells;

  auto extract = [&](int channel, FieldKind kind) {
    Field f(grid, kind);
    for (int r = 0; r < grid.height_cells; ++r)
      for (int c = 0; c < grid.width_cells; ++c)
        f(r, c) = data[channel * plane + static_cast<size_t>(r) * grid.width_cells + c];
    return f;
  };

  Field head = extract(0, FieldKind::head);
  std::vector<Field> concentrations;
  for (int j = 1; j < channels; ++j) concentrations.push_back(extract(j, FieldKind::concentration));
  return {std::move(head), std::move(concentrations)};
}

std::vector<std::string> observation_headers(const ObservationDesign& design) {
  std::vector<std::string> headers;
  for (size_t w = 0; w < design.wells.size(); ++w) {
    for (double t : design.times) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "w%02zu_t%g_c", w, t);
      headers.emplace_back(buf);
    }
    char buf[48];
    std::snprintf(buf, sizeof(buf), "w%02zu_head", w);
    headers.emplace_back(buf);
  }
  return headers;
}

std::vector<net::SimulationRecord> load_records(const ExperimentConfig& config,
                                                const KleBasis* basis,
                                                const std::filesystem::path& dir, int limit) {
  DatasetPaths paths{dir};
  Eigen::MatrixXd params = read_matrix(paths.params());
  const int n_kl = config.fixed_conductivity ? 0 : (basis ? basis->n_kl() : 0);
  if (!config.fixed_conductivity && !basis)
    throw std::invalid_argument("load_records: KLE basis required");
  if (params.cols() != n_kl + 2 + config.n_release)
    throw io_error("load_records: parameter width does not match the configuration");

  const int count = limit >= 0 ? std::min<int>(limit, static_cast<int>(params.rows()))
                               : static_cast<int>(params.rows());
  const int n_t = static_cast<int>(config.snapshot_times.size());
  const auto boundaries = config.segment_boundaries();

  std::vector<net::SimulationRecord> records;
  records.reserve(count);
  for (int i = 0; i < count; ++i) {
    ParameterVector p = unpack(params.row(i).transpose(), n_kl, config.n_release, boundaries);
    net::SimulationRecord rec;
    rec.log_k = config.fixed_conductivity
                    ? Field(config.grid, FieldKind::log_conductivity,
                            Eigen::MatrixXd::Constant(config.grid.height_cells,
                                                      config.grid.width_cells, config.fixed_log_k))
                    : synthesize(*basis, p.xi, config.covariance.mean);
    rec.sources = source_images(config.grid, p.source, n_t);
    auto [head, concentrations] = read_field_stack(paths.fields(i), config.grid);
    if (static_cast<int>(concentrations.size()) != n_t)
      throw io_error("load_records: field stack has wrong snapshot count");
    rec.head = std::move(head);
    rec.concentrations = std::move(concentrations);
    rec.source_cell = locate_cell(config.grid, p.source.x, p.source.y);
    rec.n_release = config.n_release;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace aquinv::io

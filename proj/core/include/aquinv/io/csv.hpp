#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace aquinv::io {

// Minimal CSV writer/reader for the tabular outputs (observations, loss
// history, SSWR traces, box-plot summaries). Values are written with
// max_digits10 precision so a read-back is lossless.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

CsvTable read_csv(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace aquinv::io

// Copyright 2026 The otbayes Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef OTBAYES_CLI_CSV_HPP
#define OTBAYES_CLI_CSV_HPP

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include <otbayes/common.hpp>

namespace otbayes::cli {

/// Comma-separated output with a fixed header and 12 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : os_(path), columns_(header.size()) {
    if (!os_) throw Error("cannot open " + path.string() + " for writing");
    os_ << std::setprecision(12);
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
  }

  template <typename... Ts>
  void row(const Ts&... values) {
    static_assert(sizeof...(Ts) > 0);
    if (sizeof...(Ts) != columns_) throw Error("csv: row width does not match header");
    std::size_t i = 0;
    ((os_ << (i++ ? "," : "") << values), ...);
    os_ << '\n';
  }

  void row_range(const std::vector<double>& values) {
    if (values.size() != columns_) throw Error("csv: row width does not match header");
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << values[i];
    os_ << '\n';
  }

 private:
  std::ofstream os_;
  std::size_t columns_;
};

}  // namespace otbayes::cli

#endif  // OTBAYES_CLI_CSV_HPP

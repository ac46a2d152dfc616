/*
 * This file is part of skr, a library for sparse kernel-based regression
 * and black-box optimization.
 *
 * Licensed under the Apache License Version 2.0. See LICENSE file in the
 * project root for license information.
 */
#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace skr {

/// Shortest round-trip decimal rendering of a double.
inline std::string csv_cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/**
 * Buffered CSV writer: rows accumulate in memory and hit the filesystem only
 * on close(), so a failed run never leaves a truncated file behind.
 */
class CsvWriter {
 public:
  CsvWriter(std::string path, std::vector<std::string> columns)
      : path_(std::move(path)), columns_(std::move(columns)) {}

  void row(std::vector<std::string> cells) {
    if (cells.size() != columns_.size()) {
      throw std::invalid_argument("csv row width mismatch for " + path_);
    }
    rows_.push_back(std::move(cells));
  }

  void close() {
    std::ofstream out(path_);
    if (!out) throw std::runtime_error("cannot write " + path_);
    write_line(out, columns_);
    for (const auto& r : rows_) write_line(out, r);
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path_);
    rows_.clear();
  }

  [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }

 private:
  static void write_line(std::ofstream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out << (i ? "," : "") << cells[i];
    }
    out << "\n";
  }

  std::string path_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace skr

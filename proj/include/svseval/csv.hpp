// include/svseval/csv.hpp

// Copyright 2026 The svseval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "svseval/error.hpp"

namespace svseval {

/// Shortest decimal that round-trips to the same double.
inline std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double ParseDouble(std::string_view text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const char *first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto res = std::from_chars(first, text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    Fail(ErrorCode::kParseError, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

inline long long ParseInteger(std::string_view text) {
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    Fail(ErrorCode::kParseError, "not an integer: '" + std::string(text) + "'");
  }
  return v;
}

// RFC 4180: fields with comma, quote, CR or LF are quoted; quotes doubled.
inline std::string CsvEscape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string CsvLine(const std::vector<std::string> &fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += CsvEscape(fields[i]);
  }
  line += "\r\n";
  return line;
}

/// Parsed CSV with a header row.
class CsvTable {
 public:
  static CsvTable Parse(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false, field_started = false;
    std::size_t i = 0;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
    auto end_record = [&] {
      record.push_back(std::move(field));
      field.clear();
      if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
      record.clear();
      field_started = false;
    };
    for (; i < text.size(); ++i) {
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          field += c;
        }
      } else if (c == '"' && !field_started) {
        in_quotes = true;
        field_started = true;
      } else if (c == ',') {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
      } else if (c == '\n' || c == '\r') {
        if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
      } else {
        field += c;
        field_started = true;
      }
    }
    if (in_quotes) Fail(ErrorCode::kParseError, "unterminated quoted CSV field");
    if (field_started || !record.empty()) end_record();
    if (records.empty()) Fail(ErrorCode::kParseError, "CSV has no header row");

    CsvTable table;
    table.header_ = std::move(records.front());
    for (std::size_t c = 0; c < table.header_.size(); ++c) table.index_[table.header_[c]] = c;
    for (std::size_t r = 1; r < records.size(); ++r) {
      if (records[r].size() != table.header_.size()) {
        Fail(ErrorCode::kParseError, "CSV row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                                         " fields, header has " + std::to_string(table.header_.size()));
      }
      table.rows_.push_back(std::move(records[r]));
    }
    return table;
  }

  static CsvTable Load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) Fail(ErrorCode::kIoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return Parse(ss.str());
  }

  const std::vector<std::string> &header() const { return header_; }
  const std::vector<std::vector<std::string>> &rows() const { return rows_; }
  bool has_column(const std::string &name) const { return index_.count(name) > 0; }

  std::size_t column(const std::string &name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) Fail(ErrorCode::kParseError, "CSV lacks column '" + name + "'");
    return it->second;
  }

  const std::string &at(std::size_t row, const std::string &name) const { return rows_[row][column(name)]; }

 private:
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace svseval

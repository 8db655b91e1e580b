//
// Copyright 2026 The pmwpub Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Loading raw CSV files against a schema, writing encoded datasets, and the
// public/private split used by the experiments.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pmwpub/domain.hpp"
#include "pmwpub/status.hpp"

namespace pmwpub {

// ---------------------------------------------------------------------------
// Schema JSON: {"attributes": [{"name", "cardinality", "bins"?, "categories"?}]}

inline nlohmann::json SchemaToJson(const Schema& schema) {
  nlohmann::json attrs = nlohmann::json::array();
  for (const Attribute& a : schema.attributes()) {
    nlohmann::json j = {{"name", a.name}, {"cardinality", a.cardinality}};
    if (!a.bin_edges.empty()) j["bins"] = a.bin_edges;
    if (!a.categories.empty()) j["categories"] = a.categories;
    attrs.push_back(std::move(j));
  }
  return nlohmann::json{{"attributes", std::move(attrs)}};
}

inline Schema SchemaFromJson(const nlohmann::json& j) {
  try {
    std::vector<Attribute> attrs;
    for (const auto& a : j.at("attributes")) {
      Attribute attr;
      attr.name = a.at("name").get<std::string>();
      if (a.contains("bins")) {
        attr.bin_edges = a.at("bins").get<std::vector<double>>();
      }
      if (a.contains("categories")) {
        attr.categories = a.at("categories").get<std::vector<std::string>>();
      }
      if (a.contains("cardinality")) {
        attr.cardinality = a.at("cardinality").get<std::size_t>();
      } else if (!attr.categories.empty()) {
        attr.cardinality = attr.categories.size();
      } else if (attr.bin_edges.size() >= 2) {
        attr.cardinality = attr.bin_edges.size() - 1;
      }
      attrs.push_back(std::move(attr));
    }
    return Schema(std::move(attrs));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad schema JSON: ") + e.what());
  }
}

inline nlohmann::json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorCode::kIo, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig,
                "'" + path + "' is not valid JSON: " + e.what());
  }
}

inline SchemaPtr LoadSchema(const std::string& path) {
  return std::make_shared<const Schema>(SchemaFromJson(ReadJsonFile(path)));
}

// Schema with the same names and cardinalities but no source encoding, for
// reading back files of category indices.
inline SchemaPtr IndexSchema(const Schema& schema) {
  std::vector<Attribute> attrs;
  for (const Attribute& a : schema.attributes()) {
    attrs.push_back(Attribute{a.name, a.cardinality, {}, {}});
  }
  return std::make_shared<const Schema>(Schema(std::move(attrs)));
}

// ---------------------------------------------------------------------------
// RFC 4180 CSV.

// Reads one record; returns false at end of input. Unquoted fields are
// trimmed of surrounding spaces and tabs.
inline bool ReadCsvRecord(std::istream& in, std::vector<std::string>& fields,
                          std::size_t line_number) {
  fields.clear();
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  bool any = false;
  auto finish_field = [&]() {
    if (!was_quoted) {
      const auto first = field.find_first_not_of(" \t");
      const auto last = field.find_last_not_of(" \t");
      field = first == std::string::npos
                  ? std::string()
                  : field.substr(first, last - first + 1);
    }
    fields.push_back(std::move(field));
    field.clear();
    was_quoted = false;
  };
  int c;
  while ((c = in.get()) != EOF) {
    any = true;
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      const bool blank = field.find_first_not_of(" \t") == std::string::npos;
      Require(blank, ErrorCode::kMalformedCsv,
              "line " + std::to_string(line_number) +
                  ": quote inside an unquoted field");
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      finish_field();
    } else if (ch == '\n') {
      finish_field();
      return true;
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      finish_field();
      return true;
    } else {
      field.push_back(ch);
    }
  }
  Require(!quoted, ErrorCode::kMalformedCsv,
          "line " + std::to_string(line_number) + ": unterminated quote");
  if (!any) return false;
  finish_field();
  return true;
}

inline std::string CsvEscape(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos &&
      (value.empty() || (value.front() != ' ' && value.back() != ' '))) {
    return value;
  }
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

namespace internal {

inline bool IsBlankRecord(const std::vector<std::string>& fields) {
  return fields.size() == 1 && fields[0].empty();
}

inline std::optional<double> ParseDouble(const std::string& s) {
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

// Bin index of `value`; bins are right-open except the last.
inline std::optional<std::size_t> BinOf(const std::vector<double>& edges,
                                        double value) {
  if (!(value >= edges.front() && value <= edges.back())) return std::nullopt;
  auto it = std::upper_bound(edges.begin(), edges.end(), value);
  std::size_t bin = static_cast<std::size_t>(it - edges.begin());
  if (bin > 0) --bin;
  return std::min(bin, edges.size() - 2);
}

class ColumnEncoder {
 public:
  explicit ColumnEncoder(const Attribute& a) : attribute_(&a) {
    for (std::size_t i = 0; i < a.categories.size(); ++i) {
      vocabulary_.emplace(a.categories[i], i);
    }
  }

  CategoryIndex Encode(const std::string& raw, std::size_t row,
                       const std::string& column) const {
    const Attribute& a = *attribute_;
    auto where = [&]() {
      return "row " + std::to_string(row) + ", column '" + column + "'";
    };
    if (!a.categories.empty()) {
      auto it = vocabulary_.find(raw);
      Require(it != vocabulary_.end(), ErrorCode::kUnknownCategory,
              where() + ": unknown category '" + raw + "'");
      return static_cast<CategoryIndex>(it->second);
    }
    const std::optional<double> value = ParseDouble(raw);
    if (!a.bin_edges.empty()) {
      Require(value.has_value(), ErrorCode::kValueOutOfBins,
              where() + ": '" + raw + "' is not numeric");
      const std::optional<std::size_t> bin = BinOf(a.bin_edges, *value);
      Require(bin.has_value(), ErrorCode::kValueOutOfBins,
              where() + ": value " + raw + " lies outside all bins");
      return static_cast<CategoryIndex>(*bin);
    }
    const bool is_index = value.has_value() && *value >= 0.0 &&
                          *value == std::floor(*value) &&
                          *value < static_cast<double>(a.cardinality);
    Require(is_index, ErrorCode::kUnknownCategory,
            where() + ": '" + raw + "' is not a category index below " +
                std::to_string(a.cardinality));
    return static_cast<CategoryIndex>(*value);
  }

 private:
  const Attribute* attribute_;
  std::unordered_map<std::string, std::size_t> vocabulary_;
};

}  // namespace internal

// Parses a headered CSV. Schema columns may appear in any order; extra
// columns are ignored. Row numbers in errors count data rows from 1.
inline Dataset ReadCsv(std::istream& in, SchemaPtr schema) {
  std::vector<std::string> header;
  std::size_t line = 1;
  Require(ReadCsvRecord(in, header, line), ErrorCode::kMalformedCsv,
          "CSV input has no header");
  std::vector<std::size_t> column_of(schema->size());
  for (std::size_t i = 0; i < schema->size(); ++i) {
    const std::string& name = schema->attribute(i).name;
    auto it = std::find(header.begin(), header.end(), name);
    Require(it != header.end(), ErrorCode::kMissingColumn,
            "header lacks column '" + name + "'");
    column_of[i] = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<internal::ColumnEncoder> encoders;
  encoders.reserve(schema->size());
  for (const Attribute& a : schema->attributes()) encoders.emplace_back(a);

  Dataset dataset(schema);
  std::vector<std::string> fields;
  Record record(schema->size());
  std::size_t row = 0;
  while (ReadCsvRecord(in, fields, ++line)) {
    if (internal::IsBlankRecord(fields)) continue;
    ++row;
    for (std::size_t i = 0; i < schema->size(); ++i) {
      Require(column_of[i] < fields.size(), ErrorCode::kMissingColumn,
              "row " + std::to_string(row) + ": missing column '" +
                  schema->attribute(i).name + "'");
      record[i] = encoders[i].Encode(fields[column_of[i]], row,
                                     schema->attribute(i).name);
    }
    dataset.Append(record);
  }
  return dataset;
}

inline Dataset LoadCsv(const std::string& path, SchemaPtr schema) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorCode::kIo, "cannot open '" + path + "'");
  return ReadCsv(in, std::move(schema));
}

// Headered CSV of category indices.
inline void WriteIndexCsv(std::ostream& out, const Dataset& dataset) {
  const Schema& schema = *dataset.schema();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (i > 0) out << ',';
    out << CsvEscape(schema.attribute(i).name);
  }
  out << '\n';
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    RecordView row = dataset.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << row[i];
    }
    out << '\n';
  }
}

inline void SaveIndexCsv(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  Require(out.good(), ErrorCode::kIo, "cannot write '" + path + "'");
  WriteIndexCsv(out, dataset);
}

inline Dataset LoadIndexCsv(const std::string& path, const SchemaPtr& schema) {
  Dataset indexed = LoadCsv(path, IndexSchema(*schema));
  return Dataset(schema, indexed.cells());
}

// ---------------------------------------------------------------------------
// Splits.

struct SplitSpec {
  double private_fraction = 0.9;
  double public_fraction = 0.1;
  // Bias is applied when bias_attribute is set.
  std::optional<std::string> bias_attribute;
  // Category (by name, or by index when the attribute has no vocabulary).
  std::string bias_value;
  double bias_delta = 0.0;
  std::uint64_t seed = 0;
};

struct SplitResult {
  Dataset private_data;
  Dataset public_data;
  // Share of source rows in the bias stratum; 0 without bias.
  double base_rate = 0.0;
};

namespace internal {

// Mixes a seed with a stream id (splitmix64 finalizer).
inline std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline CategoryIndex ResolveCategory(const Attribute& a,
                                     const std::string& value) {
  if (!a.categories.empty()) {
    auto it = std::find(a.categories.begin(), a.categories.end(), value);
    Require(it != a.categories.end(), ErrorCode::kConfig,
            "bias value '" + value + "' is not a category of '" + a.name + "'");
    return static_cast<CategoryIndex>(it - a.categories.begin());
  }
  const std::optional<double> index = ParseDouble(value);
  Require(index && *index >= 0 && *index < a.cardinality &&
              *index == std::floor(*index),
          ErrorCode::kConfig,
          "bias value '" + value + "' is not a valid index of '" + a.name + "'");
  return static_cast<CategoryIndex>(*index);
}

}  // namespace internal

// Private part: round(private_fraction * N) rows drawn uniformly with
// replacement. Public part: round(public_fraction * N) rows drawn with
// replacement; with bias, each draw comes from the stratum
// bias_attribute == bias_value with probability r + delta, else from its
// complement. The two parts use independent streams of `seed`, so the
// private part does not depend on delta.
inline SplitResult BiasedSplit(const Dataset& source, const SplitSpec& spec) {
  Require(!source.empty(), ErrorCode::kInvalidArgument,
          "cannot split an empty dataset");
  Require(spec.private_fraction > 0.0 && spec.public_fraction > 0.0,
          ErrorCode::kConfig, "split fractions must be positive");
  const std::size_t total = source.size();
  const auto count_for = [&](double fraction) {
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * total)));
  };

  SplitResult result{Dataset(source.schema()), Dataset(source.schema()), 0.0};
  std::mt19937_64 private_rng(internal::MixSeed(spec.seed, 0));
  std::uniform_int_distribution<std::size_t> any_row(0, total - 1);
  const std::size_t n_private = count_for(spec.private_fraction);
  result.private_data.Reserve(n_private);
  for (std::size_t i = 0; i < n_private; ++i) {
    result.private_data.Append(source.row(any_row(private_rng)));
  }

  std::mt19937_64 public_rng(internal::MixSeed(spec.seed, 1));
  const std::size_t n_public = count_for(spec.public_fraction);
  result.public_data.Reserve(n_public);
  if (!spec.bias_attribute) {
    for (std::size_t i = 0; i < n_public; ++i) {
      result.public_data.Append(source.row(any_row(public_rng)));
    }
    return result;
  }

  const std::optional<std::size_t> attr =
      source.schema()->IndexOf(*spec.bias_attribute);
  Require(attr.has_value(), ErrorCode::kConfig,
          "bias attribute '" + *spec.bias_attribute + "' is not in the schema");
  const CategoryIndex target =
      internal::ResolveCategory(source.schema()->attribute(*attr),
                                spec.bias_value);
  std::vector<std::size_t> inside;
  std::vector<std::size_t> outside;
  for (std::size_t r = 0; r < total; ++r) {
    (source.row(r)[*attr] == target ? inside : outside).push_back(r);
  }
  result.base_rate =
      static_cast<double>(inside.size()) / static_cast<double>(total);
  double p_inside = result.base_rate + spec.bias_delta;
  // Absorb rounding when delta is given as 1 - r or -r.
  if (std::abs(p_inside - 1.0) < 1e-9) p_inside = 1.0;
  if (std::abs(p_inside) < 1e-9) p_inside = 0.0;
  Require(p_inside >= 0.0 && p_inside <= 1.0, ErrorCode::kConfig,
          "r + delta = " + std::to_string(p_inside) + " lies outside [0, 1]");
  Require(!(inside.empty() && p_inside > 0.0), ErrorCode::kEmptyStratum,
          "bias stratum is empty but has positive sampling probability");
  Require(!(outside.empty() && p_inside < 1.0), ErrorCode::kEmptyStratum,
          "complement stratum is empty but has positive sampling probability");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (std::size_t i = 0; i < n_public; ++i) {
    const std::vector<std::size_t>& stratum =
        coin(public_rng) < p_inside ? inside : outside;
    std::uniform_int_distribution<std::size_t> pick(0, stratum.size() - 1);
    result.public_data.Append(source.row(stratum[pick(public_rng)]));
  }
  return result;
}

// Uniform sample without replacement of max(1, round(p * m)) rows, in their
// original order.
template <typename Rng>
Dataset SubsamplePublic(const Dataset& public_data, double p, Rng& rng) {
  Require(p > 0.0 && p <= 1.0, ErrorCode::kConfig,
          "subsample fraction must lie in (0, 1]");
  Require(!public_data.empty(), ErrorCode::kInvalidArgument,
          "cannot subsample an empty dataset");
  const std::size_t m = public_data.size();
  const std::size_t keep = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(p * static_cast<double>(m))), 1, m);
  std::vector<std::size_t> rows(m);
  for (std::size_t i = 0; i < m; ++i) rows[i] = i;
  for (std::size_t i = 0; i < keep; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, m - 1);
    std::swap(rows[i], rows[pick(rng)]);
  }
  rows.resize(keep);
  std::sort(rows.begin(), rows.end());
  Dataset out(public_data.schema());
  out.Reserve(keep);
  for (std::size_t r : rows) out.Append(public_data.row(r));
  return out;
}

}  // namespace pmwpub

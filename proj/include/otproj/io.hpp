#pragma once

// CSV ingestion and export plus JSON report serialization. Coupled files
// carry one column per coordinate; marginal files carry a single column.
// A schema string declares the per-column type, which fixes the default
// ground metric: continuous -> euclidean, ordinal -> absolute difference,
// categorical -> discrete 0/1.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "otproj/estimators.hpp"
#include "otproj/measures.hpp"

namespace otproj {

inline constexpr const char* kReportSchema = "otproj/1";

enum class ColumnType { Continuous, Categorical, Ordinal };

struct ColumnSchema {
  std::string name;
  ColumnType type = ColumnType::Continuous;
};

inline ColumnType parse_column_type(const std::string& s) {
  if (s == "continuous") return ColumnType::Continuous;
  if (s == "categorical") return ColumnType::Categorical;
  if (s == "ordinal") return ColumnType::Ordinal;
  throw std::invalid_argument("schema: unknown column type '" + s + "'");
}

// "z1:categorical,z2:ordinal,z3:continuous" or just "categorical,ordinal,...".
inline std::vector<ColumnSchema> parse_schema(const std::string& spec) {
  std::vector<ColumnSchema> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    ColumnSchema col;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      col.name = "z" + std::to_string(out.size() + 1);
      col.type = parse_column_type(item);
    } else {
      col.name = item.substr(0, colon);
      col.type = parse_column_type(item.substr(colon + 1));
    }
    out.push_back(col);
  }
  if (out.empty()) throw std::invalid_argument("schema: empty");
  return out;
}

inline CoordMetric metric_for(ColumnType t) {
  switch (t) {
    case ColumnType::Continuous: return CoordMetric{Metric::Euclidean, {}};
    case ColumnType::Ordinal: return CoordMetric{Metric::AbsDiff, {}};
    case ColumnType::Categorical: return CoordMetric{Metric::Discrete01, {}};
  }
  throw std::logic_error("unreachable");
}

inline CostSpec cost_from_schema(const std::vector<ColumnSchema>& schema, double p) {
  std::vector<CoordMetric> metrics;
  metrics.reserve(schema.size());
  for (const auto& col : schema) metrics.push_back(metric_for(col.type));
  return CostSpec(std::move(metrics), p);
}

namespace detail {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Csv csv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) fields.push_back(cell);
    if (csv.header.empty()) {
      // Header row if any field is non-numeric.
      bool numeric = true;
      for (const auto& f : fields) {
        char* end = nullptr;
        std::strtod(f.c_str(), &end);
        if (end == f.c_str() || *end != '\0') {
          numeric = false;
          break;
        }
      }
      if (!numeric) {
        csv.header = fields;
        continue;
      }
      for (std::size_t i = 0; i < fields.size(); ++i)
        csv.header.push_back("c" + std::to_string(i + 1));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (end == f.c_str() || *end != '\0')
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": non-numeric cell '" + f + "'");
      row.push_back(v);
    }
    if (row.size() != csv.header.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(csv.header.size()) + " fields, got " +
                               std::to_string(row.size()));
    csv.rows.push_back(std::move(row));
  }
  if (csv.rows.empty()) throw std::runtime_error(path + ": empty file");
  return csv;
}

}  // namespace detail

struct IngestResult {
  DataSet data;
  std::vector<ColumnSchema> schema;
  std::size_t coupled_rows = 0;
  std::vector<std::size_t> marginal_rows;
};

// Coupled CSV (K columns, optional `weight` column is rejected here) plus one
// single-column CSV per coordinate. Marginal levels absent from the coupled
// file are accepted; atom sets union naturally.
inline IngestResult ingest(const std::string& coupled_csv,
                           const std::vector<std::string>& marginal_csvs,
                           const std::vector<ColumnSchema>& schema) {
  IngestResult out;
  out.schema = schema;
  detail::Csv coupled = detail::read_csv(coupled_csv);
  if (coupled.header.size() != schema.size())
    throw std::runtime_error(coupled_csv + ": schema declares " +
                             std::to_string(schema.size()) + " columns, file has " +
                             std::to_string(coupled.header.size()));
  out.data.coupled_rows = std::move(coupled.rows);
  out.coupled_rows = out.data.coupled_rows.size();

  if (marginal_csvs.size() != schema.size())
    throw std::runtime_error("expected one marginal file per coordinate");
  for (const auto& path : marginal_csvs) {
    detail::Csv mcsv = detail::read_csv(path);
    if (mcsv.header.size() != 1)
      throw std::runtime_error(path + ": marginal files carry a single column");
    std::vector<Point> pts;
    pts.reserve(mcsv.rows.size());
    for (const auto& row : mcsv.rows) pts.push_back({row[0]});
    out.data.marginals.push_back(MarginalColumn::from_samples(pts));
    out.marginal_rows.push_back(mcsv.rows.size());
  }
  return out;
}

// Coupling export: one column per flattened coordinate plus `weight`.
inline void write_coupling_csv(const std::string& path, const JointMeasure& joint,
                               const std::vector<std::string>& names) {
  std::ofstream outf(path);
  if (!outf) throw std::runtime_error("cannot write " + path);
  std::size_t flat = 0;
  for (std::size_t d : joint.dims()) flat += d;
  for (std::size_t i = 0; i < flat; ++i) {
    if (i < names.size())
      outf << names[i];
    else
      outf << "x" << (i + 1);
    outf << ',';
  }
  outf << "weight\n";
  outf.precision(17);
  for (std::size_t a = 0; a < joint.size(); ++a) {
    for (double v : joint.atoms()[a]) outf << v << ',';
    outf << joint.weights()[a] << '\n';
  }
}

inline JointMeasure read_coupling_csv(const std::string& path) {
  detail::Csv csv = detail::read_csv(path);
  if (csv.header.size() < 2 || csv.header.back() != "weight")
    throw std::runtime_error(path + ": expected coordinate columns plus `weight`");
  const std::size_t k = csv.header.size() - 1;
  std::vector<Point> atoms;
  std::vector<double> weights;
  for (auto& row : csv.rows) {
    weights.push_back(row.back());
    row.pop_back();
    atoms.push_back(std::move(row));
  }
  return JointMeasure(std::vector<std::size_t>(k, 1), std::move(atoms), std::move(weights));
}

inline nlohmann::json interval_to_json(const IntervalResult& r) {
  return nlohmann::json{{"schema", kReportSchema}, {"method", r.method},
                        {"estimate", r.estimate},  {"lo", r.lo},
                        {"hi", r.hi},              {"alpha", r.alpha},
                        {"resamples", r.resamples}, {"subsample_size", r.subsample_size},
                        {"seed", r.seed}};
}

}  // namespace otproj

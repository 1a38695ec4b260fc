#pragma once

#include "wishmix/fit.hpp"
#include "wishmix/selection.hpp"
#include "wishmix/simdata.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace wishmix::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Doubles are written in shortest round-trip form, so read(write(x)) == x bit for bit.
std::string format_double(double v);

/// Writes to a temporary file in the same directory and renames it over path. Throws IoError.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// DatasetFile: {schema_version, p, n, matrices, covariates?, covariate_names?, item_ids?}.
Json dataset_to_json(const Dataset& data, const std::vector<std::string>& item_ids = {});
/// Throws MalformedDataset naming the offending position, or DegenerateData for non-SPD matrices.
Dataset dataset_from_json(const Json& doc);
void write_dataset(const std::filesystem::path& path, const Dataset& data,
                   const std::vector<std::string>& item_ids = {});
Dataset read_dataset(const std::filesystem::path& path);

Json params_to_json(const Params& params);
/// Inverse of params_to_json; throws MalformedDataset.
Params params_from_json(const Json& doc);

/// Truth file written by `simulate`: design name, parameters and true labels.
Json truth_to_json(const SimDesign& design, const std::vector<int>& labels, std::uint64_t seed);

Json fit_report_to_json(const FitReport& fit);

/// One row per stored draw, columns Chain::parameter_names().
std::string chain_csv(const Chain& chain);

struct TraceTable {
  std::vector<std::string> names;
  Matrix values;  // rows = draws
};
/// Parses a numeric CSV with a header row. Throws MalformedTable with the line number.
TraceTable parse_trace_csv(const std::string& text);

std::string criterion_csv(const CriterionReport& report);
Json criterion_json(const CriterionReport& report, const std::string& method);

/// Columns design, rep, method, metric, value, failed_flag.
std::string study_csv(const std::vector<StudyRow>& rows);

}  // namespace wishmix::io

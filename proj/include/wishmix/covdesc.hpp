#pragma once

#include "wishmix/model.hpp"

#include <string>
#include <vector>

namespace wishmix {

/// One row of a long-format response table.
struct ResponseRecord {
  std::string item;
  std::string replicate;
  int dose = 0;  // 1-based
  double response = 0.0;
};

/// Parses CSV with header item_id,replicate_id,dose_index,response. Throws
/// MalformedTable naming the line.
std::vector<ResponseRecord> parse_response_table(const std::string& text);

struct Exclusion {
  std::string item;
  std::string reason;
};

struct CovdescResult {
  Dataset data;
  std::vector<std::string> items;  // retained, in order of first appearance
  std::vector<Exclusion> excluded;
  int p = 0;
};

/// Per item, the sample covariance (divisor n_d - 1) over its complete
/// replicates, i.e. those with a response at every dose 1..p (p is the largest
/// dose index in the table). Items with fewer than min_replicates complete
/// replicates (default p + 1 when 0) or a singular covariance are excluded
/// with a reason. Throws NoItemsRetained or MalformedTable.
CovdescResult covdesc(const std::vector<ResponseRecord>& records, int min_replicates = 0);

}  // namespace wishmix

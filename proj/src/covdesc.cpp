#include "wishmix/covdesc.hpp"

#include "wishmix/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

namespace wishmix {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      parts.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  parts.push_back(cur);
  return parts;
}

[[noreturn]] void bad_line(int lineno, const std::string& what) {
  fail(ErrorKind::MalformedTable, "line " + std::to_string(lineno) + ": " + what);
}

}  // namespace

std::vector<ResponseRecord> parse_response_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  std::vector<ResponseRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto parts = split_csv(line);
    if (!header) {
      if (parts != std::vector<std::string>{"item_id", "replicate_id", "dose_index", "response"}) {
        bad_line(lineno, "expected header item_id,replicate_id,dose_index,response");
      }
      header = true;
      continue;
    }
    if (parts.size() != 4) bad_line(lineno, "expected 4 fields, got " + std::to_string(parts.size()));
    if (parts[0].empty() || parts[1].empty()) bad_line(lineno, "empty item_id or replicate_id");
    ResponseRecord r{parts[0], parts[1], 0, 0.0};
    const auto& d = parts[2];
    auto res = std::from_chars(d.data(), d.data() + d.size(), r.dose);
    if (res.ec != std::errc() || res.ptr != d.data() + d.size() || r.dose < 1) {
      bad_line(lineno, "dose_index '" + d + "' is not a positive integer");
    }
    const auto& v = parts[3];
    auto rv = std::from_chars(v.data(), v.data() + v.size(), r.response);
    if (rv.ec != std::errc() || rv.ptr != v.data() + v.size() || !std::isfinite(r.response)) {
      bad_line(lineno, "response '" + v + "' is not a finite number");
    }
    out.push_back(std::move(r));
  }
  if (!header) fail(ErrorKind::MalformedTable, "empty table");
  return out;
}

CovdescResult covdesc(const std::vector<ResponseRecord>& records, int min_replicates) {
  CovdescResult res;
  for (const auto& r : records) res.p = std::max(res.p, r.dose);
  if (res.p == 0) fail(ErrorKind::NoItemsRetained, "covdesc: the table has no rows");
  const int p = res.p;
  const int need = min_replicates > 0 ? min_replicates : p + 1;

  // item -> replicate -> dose responses; both in order of first appearance.
  std::vector<std::string> item_order;
  std::unordered_map<std::string, std::size_t> item_index;
  std::vector<std::vector<std::string>> rep_order;
  std::vector<std::map<std::string, std::vector<std::optional<double>>>> cells;
  for (std::size_t row = 0; row < records.size(); ++row) {
    const auto& r = records[row];
    auto [it, fresh] = item_index.try_emplace(r.item, item_order.size());
    if (fresh) {
      item_order.push_back(r.item);
      rep_order.emplace_back();
      cells.emplace_back();
    }
    auto& reps = cells[it->second];
    auto [rit, rfresh] = reps.try_emplace(r.replicate, std::vector<std::optional<double>>(static_cast<std::size_t>(p)));
    if (rfresh) rep_order[it->second].push_back(r.replicate);
    auto& slot = rit->second[static_cast<std::size_t>(r.dose - 1)];
    if (slot) {
      fail(ErrorKind::MalformedTable, "data row " + std::to_string(row + 1) + ": duplicate response for item '" +
                                          r.item + "', replicate '" + r.replicate + "', dose " + std::to_string(r.dose));
    }
    slot = r.response;
  }

  std::vector<Matrix> kept;
  for (std::size_t i = 0; i < item_order.size(); ++i) {
    std::vector<Vector> complete;
    for (const auto& rep : rep_order[i]) {
      const auto& vals = cells[i].at(rep);
      if (std::all_of(vals.begin(), vals.end(), [](const auto& v) { return v.has_value(); })) {
        Vector x(p);
        for (int d = 0; d < p; ++d) x(d) = *vals[static_cast<std::size_t>(d)];
        complete.push_back(std::move(x));
      }
    }
    const auto nd = static_cast<int>(complete.size());
    if (nd < need) {
      res.excluded.push_back({item_order[i], "insufficient replicates: " + std::to_string(nd) +
                                                 " complete, need at least " + std::to_string(need)});
      continue;
    }
    Vector mean = Vector::Zero(p);
    for (const auto& x : complete) mean += x;
    mean /= nd;
    Matrix s = Matrix::Zero(p, p);
    for (const auto& x : complete) {
      const Vector c = x - mean;
      for (int a = 0; a < p; ++a)
        for (int b = a; b < p; ++b) s(a, b) += c(a) * c(b);
    }
    s /= (nd - 1);
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < a; ++b) s(a, b) = s(b, a);

    const Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    if (!(top > 0.0) || !(eig.eigenvalues().minCoeff() > 1e-12 * top)) {
      res.excluded.push_back({item_order[i], "degenerate covariance"});
      continue;
    }
    res.items.push_back(item_order[i]);
    kept.push_back(std::move(s));
  }
  if (kept.empty()) {
    fail(ErrorKind::NoItemsRetained, "covdesc: all " + std::to_string(item_order.size()) + " items were excluded");
  }
  res.data = Dataset::from_raw(kept);
  return res;
}

}  // namespace wishmix

#include "wishmix/io.hpp"

#include "wishmix/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace wishmix::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::IoError, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) fail(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::IoError, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

Json matrix_rows(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json row_major(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Json vector_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

[[noreturn]] void malformed(const std::string& where, const std::string& what) {
  fail(ErrorKind::MalformedDataset, where + ": " + what);
}

const Json& field(const Json& doc, const char* name, const std::string& where) {
  if (!doc.is_object() || !doc.contains(name)) malformed(where, std::string("missing field '") + name + "'");
  return doc.at(name);
}

int int_field(const Json& doc, const char* name, const std::string& where) {
  const Json& v = field(doc, name, where);
  if (!v.is_number_integer()) malformed(where + "." + name, "expected an integer");
  return v.get<int>();
}

double number_at(const Json& v, const std::string& where) {
  if (!v.is_number()) malformed(where, "expected a number");
  return v.get<double>();
}

Matrix square_from_flat(const Json& arr, int p, const std::string& where) {
  if (!arr.is_array()) malformed(where, "expected an array");
  if (arr.size() != static_cast<std::size_t>(p) * static_cast<std::size_t>(p)) {
    malformed(where, "expected " + std::to_string(p * p) + " entries (p^2), got " + std::to_string(arr.size()));
  }
  Matrix m(p, p);
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b) {
      const auto idx = static_cast<std::size_t>(a * p + b);
      m(a, b) = number_at(arr[idx], where + "[" + std::to_string(idx) + "]");
    }
  return m;
}

Vector vector_from(const Json& arr, const std::string& where) {
  if (!arr.is_array()) malformed(where, "expected an array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = number_at(arr[i], where + "[" + std::to_string(i) + "]");
  return v;
}

}  // namespace

Json dataset_to_json(const Dataset& data, const std::vector<std::string>& item_ids) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["p"] = data.p();
  doc["n"] = data.n();
  Json mats = Json::array();
  for (const auto& s : data.matrices()) mats.push_back(row_major(s.matrix()));
  doc["matrices"] = std::move(mats);
  if (data.has_covariates()) {
    doc["covariates"] = matrix_rows(data.covariates());
    doc["covariate_names"] = data.covariate_names();
  }
  if (!item_ids.empty()) doc["item_ids"] = item_ids;
  return doc;
}

Dataset dataset_from_json(const Json& doc) {
  const std::string root = "dataset";
  const int version = int_field(doc, "schema_version", root);
  if (version != kSchemaVersion) malformed(root + ".schema_version", "unsupported version " + std::to_string(version));
  const int p = int_field(doc, "p", root);
  const int n = int_field(doc, "n", root);
  if (p < 1) malformed(root + ".p", "must be >= 1");
  if (n < 1) malformed(root + ".n", "must be >= 1");
  const Json& mats = field(doc, "matrices", root);
  if (!mats.is_array() || mats.size() != static_cast<std::size_t>(n)) {
    malformed(root + ".matrices", "expected " + std::to_string(n) + " matrices, got " +
                                      (mats.is_array() ? std::to_string(mats.size()) : std::string("a non-array")));
  }
  std::vector<Matrix> raw;
  raw.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::string where = root + ".matrices[" + std::to_string(i) + "]";
    Matrix m = square_from_flat(mats[static_cast<std::size_t>(i)], p, where);
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) malformed(where, "matrix is not symmetric");
    raw.push_back(std::move(m));
  }
  std::optional<Matrix> x;
  std::vector<std::string> names;
  if (doc.contains("covariates")) {
    const Json& cov = doc.at("covariates");
    const std::string where = root + ".covariates";
    if (!cov.is_array() || cov.size() != static_cast<std::size_t>(n)) malformed(where, "expected " + std::to_string(n) + " rows");
    const std::size_t q = cov[0].is_array() ? cov[0].size() : 0;
    if (q == 0) malformed(where + "[0]", "expected a non-empty array");
    Matrix xm(n, static_cast<Eigen::Index>(q));
    for (int i = 0; i < n; ++i) {
      const Json& row = cov[static_cast<std::size_t>(i)];
      const std::string rw = where + "[" + std::to_string(i) + "]";
      if (!row.is_array() || row.size() != q) malformed(rw, "expected " + std::to_string(q) + " entries");
      for (std::size_t j = 0; j < q; ++j) xm(i, static_cast<Eigen::Index>(j)) = number_at(row[j], rw + "[" + std::to_string(j) + "]");
    }
    if (doc.contains("covariate_names")) {
      const Json& nm = doc.at("covariate_names");
      if (!nm.is_array() || nm.size() != q) malformed(root + ".covariate_names", "expected " + std::to_string(q) + " names");
      for (const auto& s : nm) {
        if (!s.is_string()) malformed(root + ".covariate_names", "expected strings");
        names.push_back(s.get<std::string>());
      }
    }
    if (!names.empty() && names.front() != "intercept") {
      malformed(root + ".covariate_names[0]", "the first covariate must be the intercept column named \"intercept\"");
    }
    if (!(xm.col(0).array() == 1.0).all()) malformed(where, "column 0 must be the intercept (all ones)");
    x = std::move(xm);
  }
  return Dataset::from_raw(raw, std::move(x), std::move(names));
}

void write_dataset(const fs::path& path, const Dataset& data, const std::vector<std::string>& item_ids) {
  write_text_atomic(path, dataset_to_json(data, item_ids).dump() + "\n");
}

Dataset read_dataset(const fs::path& path) {
  const std::string text = read_text(path);
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::MalformedDataset, path.string() + ": invalid JSON at byte " + std::to_string(e.byte));
  }
  return dataset_from_json(doc);
}

Json params_to_json(const Params& params) {
  Json doc;
  doc["family"] = std::string(to_string(family_of(params)));
  doc["K"] = static_cast<int>(nu_of(params).size());
  doc["nu"] = vector_json(nu_of(params));
  Json sig = Json::array();
  for (const auto& s : sigma_of(params)) sig.push_back(row_major(s.matrix()));
  doc["sigma"] = std::move(sig);
  if (const auto* mp = std::get_if<MixtureParams>(&params)) {
    doc["pi"] = vector_json(mp->pi);
  } else {
    const auto& moe = std::get<MoeParams>(params);
    doc["beta"] = matrix_rows(moe.beta);
  }
  return doc;
}

Params params_from_json(const Json& doc) {
  const std::string root = "params";
  const Json& fam = field(doc, "family", root);
  const Vector nu = vector_from(field(doc, "nu", root), root + ".nu");
  const Json& sig = field(doc, "sigma", root);
  if (!sig.is_array() || sig.size() != static_cast<std::size_t>(nu.size())) malformed(root + ".sigma", "expected K matrices");
  const int p = static_cast<int>(std::lround(std::sqrt(static_cast<double>(sig[0].size()))));
  std::vector<SpdMatrix> sigma;
  for (std::size_t k = 0; k < sig.size(); ++k)
    sigma.emplace_back(square_from_flat(sig[k], p, root + ".sigma[" + std::to_string(k) + "]"));
  if (fam == "mixture") {
    return MixtureParams{vector_from(field(doc, "pi", root), root + ".pi"), nu, std::move(sigma), std::nullopt};
  }
  if (fam != "moe") malformed(root + ".family", "expected mixture or moe");
  const Json& b = field(doc, "beta", root);
  if (!b.is_array() || b.empty()) malformed(root + ".beta", "expected q rows");
  Matrix beta(static_cast<Eigen::Index>(b.size()), nu.size() - 1);
  for (std::size_t j = 0; j < b.size(); ++j) {
    const Vector row = vector_from(b[j], root + ".beta[" + std::to_string(j) + "]");
    if (row.size() != nu.size() - 1) malformed(root + ".beta[" + std::to_string(j) + "]", "expected K-1 entries");
    beta.row(static_cast<Eigen::Index>(j)) = row.transpose();
  }
  return MoeParams{beta, nu, std::move(sigma), std::nullopt};
}

Json truth_to_json(const SimDesign& design, const std::vector<int>& labels, std::uint64_t seed) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["design"] = design.name;
  doc["n"] = design.n;
  doc["seed"] = seed;
  doc["design_seed"] = design.seed;
  doc["params"] = params_to_json(design.truth);
  doc["labels"] = labels;
  return doc;
}

Json fit_report_to_json(const FitReport& fit) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["method"] = std::string(to_string(fit.method));
  doc["K"] = fit.K;
  doc["p"] = fit.p;
  doc["q"] = fit.q;
  doc["n"] = fit.n;
  doc["seed"] = fit.seed;
  doc["params"] = params_to_json(fit.point);
  doc["loglik"] = fit.loglik;
  doc["bic"] = fit.bic;
  doc["icl"] = fit.icl;
  doc["map_labels"] = fit.map_labels;
  doc["warnings"] = fit.warnings;
  if (fit.chain) {
    const Chain& c = *fit.chain;
    Json mcmc;
    mcmc["iterations"] = c.config.iterations;
    mcmc["burnin"] = c.config.burnin;
    mcmc["thin"] = c.config.thin;
    mcmc["kept_draws"] = c.draws.size();
    std::vector<double> acc_nu, acc_beta;
    for (int k = 0; k < c.K; ++k) acc_nu.push_back(c.acceptance_rate_nu(k));
    for (std::size_t b = 0; b < c.attempts_beta.size(); ++b) acc_beta.push_back(c.acceptance_rate_beta(static_cast<int>(b)));
    mcmc["acceptance_nu"] = acc_nu;
    mcmc["acceptance_beta"] = acc_beta;
    mcmc["proposal_scale_nu"] = vector_json(c.scale_nu);
    mcmc["proposal_scale_beta"] = vector_json(c.scale_beta);
    Json summary = Json::array();
    for (const auto& ps : fit.summary->parameters) {
      summary.push_back({{"name", ps.name}, {"mean", ps.mean}, {"lower", ps.lower}, {"upper", ps.upper}, {"ess", ps.ess}});
    }
    mcmc["summary"] = std::move(summary);
    doc["mcmc"] = std::move(mcmc);
  } else {
    Json em;
    em["loglik_trace"] = fit.loglik_trace;
    em["restart"] = fit.restart;
    em["iterations"] = fit.iterations;
    em["converged"] = fit.converged;
    em["monotone_violations"] = fit.monotone_violations;
    em["nu_no_root"] = fit.nu_no_root;
    em["beta_nonconverged"] = fit.beta_nonconverged;
    Json restarts = Json::array();
    for (const auto& r : fit.restarts) {
      Json j{{"failed", r.failed}, {"iterations", r.iterations}, {"converged", r.converged}};
      if (r.failed) j["failure"] = r.failure;
      else j["final_loglik"] = r.final_loglik;
      restarts.push_back(std::move(j));
    }
    em["restarts"] = std::move(restarts);
    doc["em"] = std::move(em);
  }
  return doc;
}

std::string chain_csv(const Chain& chain) {
  std::string out;
  const auto names = chain.parameter_names();
  for (std::size_t c = 0; c < names.size(); ++c) out += (c ? "," : "") + names[c];
  out += '\n';
  const Matrix m = chain.draws_matrix();
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(t, c));
    }
    out += '\n';
  }
  return out;
}

TraceTable parse_trace_csv(const std::string& text) {
  TraceTable tab;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::vector<double>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        parts.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur += ch;
      }
    }
    parts.push_back(cur);
    return parts;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto parts = split(line);
    if (tab.names.empty()) {
      tab.names = std::move(parts);
      continue;
    }
    if (parts.size() != tab.names.size()) {
      fail(ErrorKind::MalformedTable, "line " + std::to_string(lineno) + ": expected " + std::to_string(tab.names.size()) +
                                          " fields, got " + std::to_string(parts.size()));
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < parts.size(); ++c) {
      double v = 0.0;
      const auto& s = parts[c];
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        fail(ErrorKind::MalformedTable, "line " + std::to_string(lineno) + ", column " + tab.names[c] + ": '" + s +
                                            "' is not a number");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (tab.names.empty()) fail(ErrorKind::MalformedTable, "empty table");
  tab.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(tab.names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < tab.names.size(); ++c) tab.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return tab;
}

std::string criterion_csv(const CriterionReport& report) {
  std::string out = "K,loglik,bic,icl,elpd,elpd_se,khat_high\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : report.rows) {
    out += std::to_string(r.K) + "," + format_double(r.loglik) + "," + opt(r.bic) + "," + opt(r.icl) + "," +
           opt(r.elpd) + "," + opt(r.elpd_se) + "," + std::to_string(r.khat_high) + "\n";
  }
  return out;
}

Json criterion_json(const CriterionReport& report, const std::string& method) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["method"] = method;
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json j{{"K", r.K}, {"loglik", r.loglik}};
    if (r.bic) j["bic"] = *r.bic;
    if (r.icl) j["icl"] = *r.icl;
    if (r.elpd) {
      j["elpd"] = *r.elpd;
      j["elpd_se"] = *r.elpd_se;
      j["khat_high"] = r.khat_high;
    }
    rows.push_back(std::move(j));
  }
  doc["rows"] = std::move(rows);
  Json chosen = Json::object();
  for (const auto& [c, k] : report.chosen) chosen[std::string(to_string(c))] = k;
  doc["chosen"] = std::move(chosen);
  doc["recommended"] = report.recommended;
  return doc;
}

std::string study_csv(const std::vector<StudyRow>& rows) {
  std::string out = "design,rep,method,metric,value,failed_flag\n";
  for (const auto& r : rows) {
    out += r.design + "," + std::to_string(r.rep) + "," + r.method + "," + r.metric + "," + format_double(r.value) +
           "," + (r.failed ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace wishmix::io

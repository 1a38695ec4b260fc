// Batch command-line interface: simulate, fit, select-k, diagnose, study, covdesc.

#include "wishmix/covdesc.hpp"
#include "wishmix/error.hpp"
#include "wishmix/fit.hpp"
#include "wishmix/io.hpp"
#include "wishmix/simdata.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace wishmix;

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::UnknownDesign:
      return 1;
    case ErrorKind::DimensionMismatch:
    case ErrorKind::NotSymmetric:
    case ErrorKind::MissingCovariates:
    case ErrorKind::DegenerateData:
    case ErrorKind::RankDeficientDesign:
    case ErrorKind::LengthMismatch:
    case ErrorKind::NoItemsRetained:
    case ErrorKind::MalformedTable:
    case ErrorKind::MalformedDataset:
    case ErrorKind::IoError:
      return 2;
    default:
      return 3;
  }
}

void report_error(const std::string& kind, const std::string& message, int code) {
  io::Json err{{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << err.dump() << "\n";
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

struct McmcOpts {
  int iters = 20000;
  int burnin = 5000;
  int thin = 1;
  bool joint_beta = false;
  int restarts = 5;
};

void add_fit_options(CLI::App* cmd, McmcOpts& o) {
  cmd->add_option("--iters", o.iters, "MCMC iterations")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--burnin", o.burnin, "MCMC burn-in iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--thin", o.thin, "MCMC thinning interval")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_flag("--joint-beta", o.joint_beta, "Propose all gating coefficients jointly");
  cmd->add_option("--restarts", o.restarts, "EM restarts")->capture_default_str()->check(CLI::PositiveNumber);
}

FitOptions fit_options(const McmcOpts& o) {
  FitOptions f;
  f.sampler.iterations = o.iters;
  f.sampler.burnin = o.burnin;
  f.sampler.thin = o.thin;
  f.sampler.joint_beta = o.joint_beta;
  f.em.restarts = o.restarts;
  return f;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path out = path.parent_path() / path.stem();
  out += suffix;
  return out;
}

// simulate --------------------------------------------------------------------

struct SimulateArgs {
  std::string design;
  int n = 200;
  std::uint64_t seed = 0;
  fs::path out;
};

void run_simulate(const SimulateArgs& a) {
  const SimDesign design = SimDesign::builtin(a.design, a.n);
  RngState rng(a.seed);
  const SimData sim = generate(design, rng);
  io::write_dataset(a.out, sim.data);
  const fs::path truth = sibling(a.out, ".truth.json");
  io::write_text_atomic(truth, io::truth_to_json(design, sim.labels, a.seed).dump(2) + "\n");
  std::cout << "wrote " << a.out.string() << " and " << truth.string() << "\n";
}

// fit -------------------------------------------------------------------------

struct FitArgs {
  std::string method;
  fs::path data;
  int k = 0;
  std::uint64_t seed = 0;
  fs::path out;
  McmcOpts mcmc;
};

void run_fit(const FitArgs& a) {
  const Method method = method_from_string(a.method);
  const Dataset data = io::read_dataset(a.data);
  RngState rng(a.seed);
  const FitReport fit = fit_model(data, method, a.k, fit_options(a.mcmc), rng);
  print_warnings(fit.warnings);
  io::write_text_atomic(a.out / "fit.json", io::fit_report_to_json(fit).dump(2) + "\n");
  if (fit.chain) io::write_text_atomic(a.out / "chain.csv", io::chain_csv(*fit.chain));
  std::cout << "loglik " << io::format_double(fit.loglik) << "  bic " << io::format_double(fit.bic) << "\n";
}

// select-k --------------------------------------------------------------------

struct SelectArgs {
  std::string method;
  fs::path data;
  int kmin = 2;
  int kmax = 8;
  std::string criteria = "bic,icl,elpd";
  std::string loo_method = "psis";
  std::uint64_t seed = 0;
  fs::path out;
  McmcOpts mcmc;
};

void run_select(const SelectArgs& a) {
  const Method method = method_from_string(a.method);
  if (a.kmin < 1 || a.kmax < a.kmin) fail(ErrorKind::ConfigError, "select-k: need 1 <= kmin <= kmax");
  std::set<Criterion> wanted;
  for (const auto& c : split_list(a.criteria)) wanted.insert(criterion_from_string(c));
  const LooMethod loo = loo_method_from_string(a.loo_method);
  const Dataset data = io::read_dataset(a.data);
  const FitOptions options = fit_options(a.mcmc);

  const int count = a.kmax - a.kmin + 1;
  std::vector<CriterionRow> rows(static_cast<std::size_t>(count));
  std::vector<std::string> errors(static_cast<std::size_t>(count));
  std::vector<int> codes(static_cast<std::size_t>(count), 0);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < count; ++j) {
    const int K = a.kmin + j;
    try {
      RngState rng = RngState(a.seed).derive(static_cast<std::uint64_t>(K));
      const FitReport fit = fit_model(data, method, K, options, rng);
      rows[static_cast<std::size_t>(j)] = criterion_row(data, fit, wanted, loo);
    } catch (const Error& e) {
      errors[static_cast<std::size_t>(j)] = "K=" + std::to_string(K) + ": " + e.what();
      codes[static_cast<std::size_t>(j)] = static_cast<int>(e.kind());
    }
  }
  for (int j = 0; j < count; ++j) {
    if (!errors[static_cast<std::size_t>(j)].empty()) {
      fail(static_cast<ErrorKind>(codes[static_cast<std::size_t>(j)]), errors[static_cast<std::size_t>(j)]);
    }
  }
  const CriterionReport rep = select_k(rows);
  for (const auto& r : rep.rows)
    if (r.khat_high > 0) std::cerr << "warning: K=" << r.K << " has " << r.khat_high << " observations with khat > 0.7\n";
  io::write_text_atomic(a.out / "criteria.csv", io::criterion_csv(rep));
  io::write_text_atomic(a.out / "criteria.json", io::criterion_json(rep, a.method).dump(2) + "\n");
  for (const auto& [c, k] : rep.chosen) std::cout << to_string(c) << ": K=" << k << "\n";
  std::cout << "recommended: K=" << rep.recommended << "\n";
}

// diagnose --------------------------------------------------------------------

struct DiagnoseArgs {
  fs::path chain;
  fs::path out;
};

void run_diagnose(const DiagnoseArgs& a) {
  const io::TraceTable tab = io::parse_trace_csv(io::read_text(a.chain));
  if (tab.values.rows() < 10) {
    fail(ErrorKind::TooShort, "diagnose: need at least 10 draws, got " + std::to_string(tab.values.rows()));
  }
  std::string report = "parameter,mean,lower,upper,ess\n";
  for (std::size_t c = 0; c < tab.names.size(); ++c) {
    const Vector col = tab.values.col(static_cast<Eigen::Index>(c));
    const ParameterSummary ps = summarize_trace(tab.names[c], col);
    report += ps.name + "," + io::format_double(ps.mean) + "," + io::format_double(ps.lower) + "," +
              io::format_double(ps.upper) + "," + io::format_double(ps.ess) + "\n";
    std::string trace = "draw," + tab.names[c] + "\n";
    for (Eigen::Index t = 0; t < col.size(); ++t) trace += std::to_string(t) + "," + io::format_double(col(t)) + "\n";
    io::write_text_atomic(a.out / ("trace_" + tab.names[c] + ".csv"), trace);
  }
  io::write_text_atomic(a.out / "ess.csv", report);
  std::cout << "summarized " << tab.names.size() << " parameters over " << tab.values.rows() << " draws\n";
}

// study -----------------------------------------------------------------------

struct StudyArgs {
  std::string design;
  int n = 200;
  int reps = 100;
  std::string methods = "bayes,em,bayes-moe,em-moe";
  std::uint64_t seed = 0;
  fs::path out;
  McmcOpts mcmc;
};

void run_study_cmd(const StudyArgs& a) {
  StudyConfig config;
  config.reps = a.reps;
  config.seed = a.seed;
  config.methods.clear();
  for (const auto& m : split_list(a.methods)) config.methods.push_back(method_from_string(m));
  if (config.methods.empty()) fail(ErrorKind::ConfigError, "study: no methods given");
  config.fit = fit_options(a.mcmc);
  const SimDesign design = SimDesign::builtin(a.design, a.n);
  const std::vector<StudyRow> rows = run_study(design, config);
  io::write_text_atomic(a.out / "study.csv", io::study_csv(rows));
  int failed = 0;
  for (const auto& r : rows) failed += r.failed;
  std::cout << rows.size() << " rows, " << failed << " flagged as failed\n";
}

// covdesc ---------------------------------------------------------------------

struct CovdescArgs {
  fs::path table;
  fs::path out;
  int min_replicates = 0;
};

void run_covdesc(const CovdescArgs& a) {
  const CovdescResult res = covdesc(parse_response_table(io::read_text(a.table)), a.min_replicates);
  io::write_dataset(a.out, res.data, res.items);
  std::string report = "item_id,status,reason\n";
  for (const auto& item : res.items) report += item + ",retained,\n";
  for (const auto& ex : res.excluded) report += ex.item + ",excluded," + ex.reason + "\n";
  const fs::path rpath = sibling(a.out, ".exclusions.csv");
  io::write_text_atomic(rpath, report);
  std::cout << res.items.size() << " items retained, " << res.excluded.size() << " excluded (see " << rpath.string()
            << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wishart mixture and mixture-of-experts models for SPD matrix data"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Cap on parallel threads (default: OpenMP default)")->check(CLI::NonNegativeNumber);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Draw a dataset from a built-in design");
  c_sim->add_option("--design", sim.design, "mix-p2, mix-p8, moe-p2 or moe-p8")->required();
  c_sim->add_option("--n", sim.n, "Number of matrices")->capture_default_str()->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed, "RNG seed")->required();
  c_sim->add_option("--out", sim.out, "Output DatasetFile (truth goes next to it)")->required();

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit one model");
  c_fit->add_option("--method", fit.method, "bayes, em, bayes-moe or em-moe")->required();
  c_fit->add_option("--data", fit.data, "DatasetFile")->required();
  c_fit->add_option("--k", fit.k, "Number of components")->required()->check(CLI::PositiveNumber);
  c_fit->add_option("--seed", fit.seed, "RNG seed")->required();
  c_fit->add_option("--out", fit.out, "Output directory")->required();
  add_fit_options(c_fit, fit.mcmc);

  SelectArgs sel;
  auto* c_sel = app.add_subcommand("select-k", "Fit a range of K and compare criteria");
  c_sel->add_option("--method", sel.method, "bayes, em, bayes-moe or em-moe")->required();
  c_sel->add_option("--data", sel.data, "DatasetFile")->required();
  c_sel->add_option("--kmin", sel.kmin, "Smallest K")->capture_default_str();
  c_sel->add_option("--kmax", sel.kmax, "Largest K")->capture_default_str();
  c_sel->add_option("--criteria", sel.criteria, "Comma-separated subset of bic,icl,elpd")->capture_default_str();
  c_sel->add_option("--loo-method", sel.loo_method, "psis or raw")->capture_default_str();
  c_sel->add_option("--seed", sel.seed, "RNG seed")->required();
  c_sel->add_option("--out", sel.out, "Output directory")->required();
  add_fit_options(c_sel, sel.mcmc);

  DiagnoseArgs diag;
  auto* c_diag = app.add_subcommand("diagnose", "ESS report and per-parameter traces from a chain CSV");
  c_diag->add_option("--chain", diag.chain, "Chain CSV written by fit")->required();
  c_diag->add_option("--out", diag.out, "Output directory")->required();

  StudyArgs study;
  auto* c_study = app.add_subcommand("study", "Simulation study over replicates and methods");
  c_study->add_option("--design", study.design, "mix-p2, mix-p8, moe-p2 or moe-p8")->required();
  c_study->add_option("--n", study.n, "Matrices per replicate")->capture_default_str()->check(CLI::PositiveNumber);
  c_study->add_option("--reps", study.reps, "Replicates")->capture_default_str()->check(CLI::PositiveNumber);
  c_study->add_option("--methods", study.methods, "Comma-separated methods")->capture_default_str();
  c_study->add_option("--seed", study.seed, "RNG seed")->required();
  c_study->add_option("--out", study.out, "Output directory")->required();
  add_fit_options(c_study, study.mcmc);

  CovdescArgs cov;
  auto* c_cov = app.add_subcommand("covdesc", "Covariance descriptors from a replicate-response table");
  c_cov->add_option("--table", cov.table, "CSV item_id,replicate_id,dose_index,response")->required();
  c_cov->add_option("--out", cov.out, "Output DatasetFile (exclusion report goes next to it)")->required();
  c_cov->add_option("--min-replicates", cov.min_replicates, "Complete replicates required per item (default p+1)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("UsageError", e.what(), 1);
    std::cerr << app.help();
    return 1;
  }

  if (threads > 0) omp_set_num_threads(threads);
  try {
    if (*c_sim) run_simulate(sim);
    else if (*c_fit) run_fit(fit);
    else if (*c_sel) run_select(sel);
    else if (*c_diag) run_diagnose(diag);
    else if (*c_study) run_study_cmd(study);
    else if (*c_cov) run_covdesc(cov);
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    report_error(std::string(to_string(e.kind())), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error("InternalError", e.what(), 3);
    return 3;
  }
  return 0;
}

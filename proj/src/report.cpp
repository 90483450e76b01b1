#include <stocon/cli/report.hpp>

#include <fstream>
#include <ostream>
#include <sstream>
#include <system_error>

namespace stocon::cli {

namespace fs = std::filesystem;

std::string summary_json(const ExperimentResult& result) {
  return result.summary.dump(2) + "\n";
}

std::string summary_text(const ExperimentResult& result) {
  std::ostringstream os;
  const auto& cfg = result.summary["ExperimentConfig"];
  os << "experiment: " << cfg["kind"].get<std::string>();
  if (!cfg["name"].get<std::string>().empty()) os << " (" << cfg["name"].get<std::string>() << ")";
  const auto& ens = cfg["EnsembleConfig"];
  os << "\nseeds: " << ens["seeds"].get<std::size_t>()
     << "  horizon: " << ens["horizon"].get<std::size_t>()
     << "  root_seed: " << ens["root_seed"].get<std::uint64_t>() << "\n";

  for (const auto& w : result.warnings) os << "warning: " << w << "\n";

  os << "\nconvergence classes:\n";
  for (auto cls : kConvergenceClasses)
    os << "  " << to_string(cls) << ": " << format_double(result.stats.fraction(cls)) << "\n";
  os << "final |error| quantiles (5/25/50/75/95%):";
  for (double q : result.stats.final_abs_quantiles) os << " " << format_double(q);
  os << "\ndispersion of final values: " << format_double(result.stats.dispersion) << "\n";

  const auto& conditions = result.summary["conditions"];
  if (!conditions.empty()) {
    os << "\nconditions:\n";
    for (const auto& c : conditions) {
      os << "  " << c["name"].get<std::string>() << ": "
         << (c["holds"].get<bool>() ? "holds" : "fails");
      const auto detail = c["detail"].get<std::string>();
      if (!detail.empty()) os << " (" << detail << ")";
      os << "\n";
    }
  }
  const auto& checks = result.summary["path_checks"];
  if (!checks.empty()) {
    os << "\nper-path checks:\n";
    for (const auto& c : checks)
      os << "  " << c["name"].get<std::string>() << ": " << c["seeds_holding"].get<std::size_t>()
         << "/" << c["seeds_total"].get<std::size_t>() << " seeds hold\n";
  }
  if (result.summary.contains("PartitionReport")) {
    const auto& p = result.summary["PartitionReport"];
    os << "\npartition: ";
    if (p.contains("error")) {
      os << p["error"].get<std::string>() << "\n";
    } else {
      os << "q = " << p["q"].get<std::size_t>() << ";";
      for (std::size_t t = 0; t < p["component_verdicts"].size(); ++t)
        os << " b(" << t + 1 << ") " << p["component_verdicts"][t].get<std::string>();
      os << "\n";
    }
  }

  os << "\nassertions:\n";
  if (result.assertions.empty()) os << "  (none configured)\n";
  for (const auto& a : result.assertions)
    os << "  [" << (a.passed ? "PASS" : "FAIL") << "] " << a.name << ": " << a.detail << "\n";
  os << "\nresult: " << (result.passed() ? "PASS" : "FAIL") << "\n";
  return os.str();
}

std::string curve_csv(const EnsembleStats& stats) {
  std::string out = "n,q05,q50,q95\n";
  for (const auto& p : stats.curve) {
    out += std::to_string(p.n);
    for (double q : p.quantiles) {
      out += ',';
      out += format_double(q);
    }
    out += '\n';
  }
  return out;
}

void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create output directory " + dir.string() + ": " + ec.message());
  if (!fs::is_directory(dir)) throw OutputError("output path is not a directory: " + dir.string());
  const auto probe = dir / ".stocon_write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw OutputError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

namespace {

void write_file(const fs::path& file, const std::string& body) {
  std::ofstream f(file, std::ios::binary);
  if (!f) throw OutputError("cannot open " + file.string() + " for writing");
  f << body;
  if (!f) throw OutputError("failed writing " + file.string());
}

}  // namespace

void write_outputs(const ExperimentResult& result, const fs::path& dir) {
  ensure_writable(dir);
  write_file(dir / "summary.json", summary_json(result));
  write_file(dir / "summary.txt", summary_text(result));
  write_file(dir / "curve.csv", curve_csv(result.stats));
  if (!result.traces.empty() && !result.trace_header.empty()) {
    std::ofstream f(dir / "traces.csv", std::ios::binary);
    if (!f) throw OutputError("cannot open traces.csv for writing");
    f << result.trace_header << '\n';
    for (const auto& block : result.traces) f << block;
    if (!f) throw OutputError("failed writing traces.csv");
  }
}

int execute(const ExperimentConfig& config, std::ostream& out, std::ostream& err) {
  const fs::path dir = config.output.dir;
  try {
    ensure_writable(dir);
  } catch (const OutputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitEnvironment;
  }
  ExperimentResult result;
  try {
    result = run_experiment(config);
  } catch (const std::exception& e) {
    err << "error: experiment could not run: " << e.what() << "\n";
    return kExitEnvironment;
  }
  try {
    write_outputs(result, dir);
  } catch (const OutputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitEnvironment;
  }
  out << summary_text(result);
  if (!result.passed()) {
    err << "failing assertions:";
    for (const auto& name : result.failing_assertions()) err << " " << name;
    err << "\n";
    return kExitAssertion;
  }
  return kExitPass;
}

}  // namespace stocon::cli

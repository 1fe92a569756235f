// Command-line front end: binds config files to the experiment harness, the
// state-limit verifier, and the similarity diagnostics.
#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "dualopt/config.hpp"
#include "dualopt/diagnostics.hpp"
#include "dualopt/runner.hpp"
#include "dualopt/theory.hpp"

namespace fs = std::filesystem;
using namespace dualopt;

namespace {

const char* kUsage =
    "usage: dualopt <verb> [options] [key=value ...]\n"
    "\n"
    "verbs:\n"
    "  verify-theorem   check the state-limit formulas against long simulations\n"
    "  run              execute one experiment from config file plus overrides\n"
    "  sweep            run a config lattice built from --vary axes\n"
    "  diag             replay a run and write its similarity traces\n"
    "\n"
    "options:\n"
    "  --config <file>  key=value config file (# comments allowed)\n"
    "  --out <dir>      output directory (default: $DUALOPT_OUT or ./out)\n"
    "  --diagnostics    run: also write similarity.csv\n"
    "  --vary key=a,b   sweep: one lattice axis, comma-separated values\n"
    "                   (repeatable; axes combine as a cartesian product)\n"
    "\n"
    "Trailing key=value arguments override config-file values.\n";

// Deletes everything this command wrote unless commit() was reached, so a
// failed invocation never leaves partial outputs behind.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const fs::path& p : created_) fs::remove(p, ec);
  }

  void track(const fs::path& p) { created_.push_back(p); }
  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> created_;
  bool committed_ = false;
};

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  bool diagnostics = false;
  std::vector<std::string> vary;
  std::vector<std::string> overrides;
};

std::string default_out_dir() {
  const char* env = std::getenv("DUALOPT_OUT");
  return (env && *env) ? env : "out";
}

std::string echo_value(const RunConfig& config, const std::string& key) {
  for (const ConfigEntries::value_type& kv : config_echo(config)) {
    if (kv.first == key) return kv.second;
  }
  return "";
}

// File entries (if any) followed by the override entries; later entries win
// when keys collide.
ConfigEntries gather_entries(const CommonArgs& args) {
  ConfigEntries entries;
  if (!args.config_path.empty()) {
    entries = read_config_file(args.config_path);
  }
  for (const std::string& o : args.overrides) {
    entries.push_back(parse_config_entry(o));
  }
  return entries;
}

// Canonical merged echo preceded by the raw inputs as comments, so the file
// both documents its provenance and re-parses to the identical config.
void write_echo_file(const fs::path& path, const CommonArgs& args, const ConfigEntries& raw,
                     const RunConfig& config, OutputGuard& guard) {
  std::ofstream out(path);
  if (!args.config_path.empty()) {
    out << "# config file: " << args.config_path << "\n";
  }
  for (const ConfigEntries::value_type& kv : raw) {
    out << "# input: " << kv.first << " = " << kv.second << "\n";
  }
  for (const std::string& o : args.overrides) {
    out << "# override: " << o << "\n";
  }
  out << entries_to_text(config_echo(config));
  guard.track(path);
}

int cmd_verify_theorem(const CommonArgs& args) {
  OutputGuard guard;
  fs::create_directories(args.out_dir);
  const fs::path csv_path = fs::path(args.out_dir) / "theorem_check.csv";

  const std::vector<GradientDynamics> grid = verification_grid();
  std::size_t failures = 0;

  std::ofstream csv(csv_path);
  guard.track(csv_path);
  csv << "beta,forget_freq,retain_freq,m,n,state,limit,simulated,error,pass\n";

  for (const GradientDynamics& d : grid) {
    const StateLimits lim = closed_form_limits(d);
    const StateSample s = simulate_states(d, 10000, false, 0).back();
    const std::pair<const char*, std::pair<double, double>> states[] = {
        {"base", {lim.B_inf, s.B}},
        {"delta_forget", {lim.Delta_f_inf, s.Delta_f}},
        {"delta_retain", {lim.Delta_r_inf, s.Delta_r}},
    };
    for (const auto& [name, pair] : states) {
      const auto [limit, simulated] = pair;
      const double denom = std::max(std::fabs(limit), d.G);
      const double error = std::fabs(simulated - limit) / denom;
      const bool pass = error < 1e-6;
      if (!pass) failures += 1;
      char line[256];
      std::snprintf(line, sizeof line, "%.17g,%lld,%lld,%.17g,%.17g,%s,%.17g,%.17g,%.17g,%d\n",
                    d.beta, static_cast<long long>(d.F_f), static_cast<long long>(d.F_r), d.m,
                    d.n, name, limit, simulated, error, pass ? 1 : 0);
      csv << line;
    }
  }
  csv.close();

  std::printf("verify-theorem: %zu/%zu state limits within 1e-6 (%s)\n",
              3 * grid.size() - failures, 3 * grid.size(), csv_path.string().c_str());
  if (failures == 0) {
    guard.commit();
    return 0;
  }
  return 1;
}

int cmd_run(const CommonArgs& args) {
  OutputGuard guard;
  const ConfigEntries raw = gather_entries(args);
  const RunConfig config = config_from_entries(raw);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);

  const RunReport report = run_experiment(config);

  write_echo_file(out / "config_echo.txt", args, raw, config, guard);
  {
    std::ofstream f(out / "report.csv");
    write_report_csv(f, report);
    guard.track(out / "report.csv");
  }
  if (args.diagnostics) {
    std::ofstream f(out / "similarity.csv");
    write_similarity_csv(f, report.traces);
    guard.track(out / "similarity.csv");
  }

  std::printf("run: method=%s task=%s steps=%zu diverged=%d\n", method_name(config.method),
              echo_value(config, "task").c_str(), report.rows.size(), report.diverged ? 1 : 0);
  for (std::size_t i = 0; i < report.final_losses.size(); ++i) {
    std::printf("  final loss[%zu] = %.17g\n", i, report.final_losses[i]);
  }
  std::printf("  content hash = %016llx\n",
              static_cast<unsigned long long>(report.content_hash()));
  std::printf("  wrote %s\n", (out / "report.csv").string().c_str());

  if (report.diverged) {
    std::fprintf(stderr, "run: diverged, outputs discarded\n");
    return 1;
  }
  guard.commit();
  return 0;
}

// "key=a,b,c" -> one axis of the lattice.
std::pair<std::string, std::vector<std::string>> parse_axis(const std::string& spec) {
  const auto [key, joined] = parse_config_entry(spec);
  std::vector<std::string> values;
  std::size_t start = 0;
  while (start <= joined.size()) {
    const std::size_t comma = joined.find(',', start);
    const std::string v = joined.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    values.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (values.empty() || joined.empty()) {
    throw std::invalid_argument("sweep: axis '" + spec + "' carries no values");
  }
  return {key, values};
}

int cmd_sweep(const CommonArgs& args) {
  OutputGuard guard;
  const ConfigEntries base_entries = gather_entries(args);

  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const std::string& spec : args.vary) {
    axes.push_back(parse_axis(spec));
  }

  // Cartesian product over the axes, base config when none are given.
  std::vector<ConfigEntries> lattice{{}};
  for (const auto& [key, values] : axes) {
    std::vector<ConfigEntries> grown;
    for (const ConfigEntries& prefix : lattice) {
      for (const std::string& v : values) {
        ConfigEntries next = prefix;
        next.emplace_back(key, v);
        grown.push_back(std::move(next));
      }
    }
    lattice = std::move(grown);
  }

  std::vector<RunConfig> grid;
  for (const ConfigEntries& extra : lattice) {
    ConfigEntries entries = base_entries;
    entries.insert(entries.end(), extra.begin(), extra.end());
    grid.push_back(config_from_entries(entries));
  }

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);

  const std::vector<SweepOutcome> outcomes = sweep(grid);

  {
    std::ofstream f(out / "summary.csv");
    write_summary_csv(f, outcomes);
    guard.track(out / "summary.csv");
  }
  std::size_t failures = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const SweepOutcome& o = outcomes[i];
    if (o.failed || o.report.diverged) {
      failures += 1;
      std::fprintf(stderr, "sweep: run %zu %s%s\n", i, o.failed ? "failed: " : "diverged",
                   o.failed ? o.error.c_str() : "");
      continue;
    }
    char name[64];
    std::snprintf(name, sizeof name, "run_%03zu_report.csv", i);
    std::ofstream f(out / name);
    write_report_csv(f, o.report);
    guard.track(out / name);
  }

  std::printf("sweep: %zu/%zu runs completed (%s)\n", outcomes.size() - failures,
              outcomes.size(), (out / "summary.csv").string().c_str());
  // The summary documents per-run failures, so it is kept even when some
  // points failed; the exit code still reports them.
  guard.commit();
  return failures ? 1 : 0;
}

int cmd_diag(const CommonArgs& args) {
  OutputGuard guard;
  const ConfigEntries raw = gather_entries(args);
  const RunConfig config = config_from_entries(raw);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);

  const RunReport report = run_experiment(config);

  write_echo_file(out / "config_echo.txt", args, raw, config, guard);
  {
    std::ofstream f(out / "similarity.csv");
    write_similarity_csv(f, report.traces);
    guard.track(out / "similarity.csv");
  }

  std::size_t samples = 0;
  for (const SimilarityTrace& t : report.traces) samples += t.steps.size();
  std::printf("diag: method=%s traces=%zu samples=%zu diverged=%d\n", method_name(config.method),
              report.traces.size(), samples, report.diverged ? 1 : 0);
  std::printf("  wrote %s\n", (out / "similarity.csv").string().c_str());

  if (report.diverged) {
    std::fprintf(stderr, "diag: diverged, outputs discarded\n");
    return 1;
  }
  guard.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> verbs = {"verify-theorem", "run", "sweep", "diag"};
  if (argc < 2) {
    std::fputs(kUsage, stderr);
    return 2;
  }
  const std::string verb = argv[1];
  if (verb == "-h" || verb == "--help") {
    std::fputs(kUsage, stdout);
    return 0;
  }
  if (std::find(verbs.begin(), verbs.end(), verb) == verbs.end()) {
    std::fprintf(stderr, "unknown verb '%s'\n\n", verb.c_str());
    std::fputs(kUsage, stderr);
    return 2;
  }

  CLI::App app{"multi-objective optimizer workbench"};
  CommonArgs args;
  args.out_dir = default_out_dir();
  app.add_option("--config", args.config_path, "key=value config file");
  app.add_option("--out", args.out_dir, "output directory");
  if (verb == "run") {
    app.add_flag("--diagnostics", args.diagnostics, "also write similarity.csv");
  }
  if (verb == "sweep") {
    app.add_option("--vary", args.vary, "lattice axis key=a,b,c (repeatable)");
  }
  if (verb != "verify-theorem") {
    app.add_option("overrides", args.overrides, "key=value overrides");
  }

  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (verb == "verify-theorem") return cmd_verify_theorem(args);
    if (verb == "run") return cmd_run(args);
    if (verb == "sweep") return cmd_sweep(args);
    return cmd_diag(args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: %s\n", verb.c_str(), e.what());
    return 1;
  }
}

// adia: command-line front end. Every command writes one CSV document whose
// leading '#' lines echo the resolved configuration.
//
// Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include "adia/adia.hpp"

namespace {

using namespace adia;
namespace fs = std::filesystem;

struct Options {
  int dim = 3;
  int size = 8;
  double t = 1.0;
  double mu = 1.0;
  double epsilon = 1.0;
  std::string boundary = "periodic";
  std::int64_t marked = 0;
  int threads = 0;
  std::string out;
  bool no_meta = false;
  bool gnuplot = false;
  std::string config;

  double s = 0.5;
  std::string method = "sine";
  std::int64_t dense_threshold = 4096;

  GridConfig grid;
  bool grover = false;

  std::vector<int> sizes;
  std::string quantity = "t_estimate";
  int fit_floor = -1;
  std::string per_size_dir;
  std::string from_csv;

  std::vector<double> runtimes;
  std::string schedule = "constant";
  std::string backend = "reduced";
  double step_tol = 1e-6;
  std::int64_t max_steps = std::int64_t{1} << 22;
};

LatticeSpec lattice(const Options& o) {
  LatticeSpec spec;
  spec.dimension = o.dim;
  spec.linear_size = o.size;
  spec.boundary = o.boundary == "open" ? Boundary::Open : Boundary::Periodic;
  spec.marked_site = o.marked;
  validate(spec);
  return spec;
}

ModelParams model(const Options& o) {
  ModelParams p{o.t, o.mu, o.epsilon};
  validate(p);
  return p;
}

OpenSolveOptions open_options(const Options& o) {
  OpenSolveOptions opts;
  opts.vectors = false;
  opts.dense_threshold = o.dense_threshold;
  static const std::map<std::string, OpenMethod> methods{
      {"auto", OpenMethod::Auto}, {"dense", OpenMethod::Dense}, {"lanczos", OpenMethod::Lanczos}, {"sine", OpenMethod::Sine}};
  opts.method = methods.at(o.method);
  return opts;
}

GridConfig grid(const Options& o) {
  GridConfig g = o.grid;
  g.threads = resolve_threads(o.threads);
  validate(g);
  return g;
}

// ---------------------------------------------------------------------------
// Output

class Output {
 public:
  Output(const CLI::App& cmd, const Options& o) : opts_(o) {
    doc_.comment(fmt::format("adia {}", cmd.get_name()));
    if (!o.no_meta)
      doc_.comment("generated", fmt::format("{:%Y-%m-%dT%H:%M:%SZ}",
                                            std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now())));
    std::istringstream cfg(cmd.config_to_str(true, false));
    for (std::string line; std::getline(cfg, line);)
      if (!line.empty() && line.front() != '[') doc_.comment(line);
    doc_.comment("resolved_threads", std::to_string(resolve_threads(o.threads)));
  }

  CsvDocument& doc() { return doc_; }

  /// Writes the document to --out (atomically) or to stdout, then the summary
  /// lines to stdout.
  void finish(const std::vector<std::string>& summary, const std::string& gnuplot_body = {}) {
    if (opts_.out.empty()) {
      if (opts_.gnuplot) throw ValidationError("--gnuplot needs --out");
      std::cout << doc_.str();
      for (const auto& s : summary) std::cout << (s.front() == '#' ? "" : "# ") << s << '\n';
      return;
    }
    write_atomic(opts_.out, doc_.str());
    if (opts_.gnuplot && !gnuplot_body.empty()) {
      std::string gp = "set datafile separator ','\nset key autotitle columnhead\n";
      gp += fmt::format("data = '{}'\n", fs::path(opts_.out).filename().string());
      gp += gnuplot_body;
      write_atomic(opts_.out + ".gp", gp);
    }
    for (const auto& s : summary) std::cout << s << '\n';
  }

 private:
  const Options& opts_;
  CsvDocument doc_;
};

using adia::format_number;

std::vector<std::string> point_row(const SpectralPoint& p) {
  return {format_number(p.s), format_number(p.e0), format_number(p.e1),
          format_number(p.gap), format_number(p.v01), format_number(p.integrand)};
}

const std::vector<std::string> kPointHeader{"s", "E0", "E1", "gap", "V01", "integrand"};

void peak_comments(CsvDocument& doc, const PeakSummary& pk) {
  doc.comment("height", format_number(pk.height));
  doc.comment("s_peak", format_number(pk.s_peak));
  doc.comment("width", format_number(pk.width));
  doc.comment("t_estimate", format_number(pk.t_estimate));
  doc.comment("t_lae", format_number(pk.t_lae));
  doc.comment("t_const", format_number(pk.t_const));
  doc.comment("min_gap", format_number(pk.min_gap));
  doc.comment("max_v01", format_number(pk.max_v01));
}

std::string peak_line(const PeakSummary& pk) {
  return fmt::format("height={} s_peak={} width={} t_estimate={} t_lae={} t_const={} min_gap={} max_v01={} bounds_hold={}",
                     format_number(pk.height), format_number(pk.s_peak), format_number(pk.width),
                     format_number(pk.t_estimate), format_number(pk.t_lae), format_number(pk.t_const),
                     format_number(pk.min_gap), format_number(pk.max_v01), pk.bounds_hold ? "true" : "false");
}

IntegrandCurve integrand_curve(const Options& o) {
  if (o.grover) return sample_integrand(grover_source(checked_site_count(o.dim, o.size)), grid(o));
  return sample_integrand(lattice_source(lattice(o), model(o), open_options(o)), grid(o));
}

// ---------------------------------------------------------------------------
// Commands

int cmd_spectrum(const CLI::App& cmd, const Options& o) {
  const auto spec = lattice(o);
  const auto p = lattice_source(spec, model(o), open_options(o))(o.s);
  Output out(cmd, o);
  out.doc().header(kPointHeader);
  out.doc().row(point_row(p));
  out.finish({});
  return 0;
}

int cmd_integrand(const CLI::App& cmd, const Options& o) {
  const auto curve = integrand_curve(o);
  const auto pk = summarize_peak(curve);
  Output out(cmd, o);
  peak_comments(out.doc(), pk);
  out.doc().header(kPointHeader);
  for (const auto& p : curve.points) out.doc().row(point_row(p));
  out.finish({peak_line(pk)}, "set logscale y\nset xlabel 's'\nplot data using 1:6 with lines\n");
  return 0;
}

std::vector<SizeResult> sizes_from_csv(const std::string& path, ScalingQuantity& q) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot read {}", path));
  std::vector<SizeResult> rows;
  bool header = true;
  std::string quantity;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      if (line != "N,L,quantity,value") throw ValidationError(fmt::format("{}: not a scaling CSV", path));
      header = false;
      continue;
    }
    std::vector<std::string> cell;
    std::istringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cell.push_back(c);
    if (cell.size() != 4) throw ValidationError(fmt::format("{}: malformed row '{}'", path, line));
    if (quantity.empty()) quantity = cell[2];
    if (cell[2] != quantity) throw ValidationError(fmt::format("{}: mixed quantities", path));
    SizeResult r;
    try {
      r.site_count = std::stoll(cell[0]);
      r.linear_size = std::stoi(cell[1]);
      r.value = std::stod(cell[3]);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("{}: malformed row '{}'", path, line));
    }
    rows.push_back(std::move(r));
  }
  if (quantity.empty()) throw ValidationError(fmt::format("{}: no data rows", path));
  q = parse_quantity(quantity);
  return rows;
}

std::string fit_row(const ScalingFit& f) {
  return fmt::format("{},{},{},{}", format_number(f.slope), format_number(f.intercept), format_number(f.r2),
                     f.n_points);
}

int cmd_scaling(const CLI::App& cmd, const Options& o) {
  ScalingReport rep;
  if (!o.from_csv.empty()) {
    ScalingQuantity q{};
    auto rows = sizes_from_csv(o.from_csv, q);
    rep = fit_sizes(o.dim, q, std::move(rows), o.fit_floor);
  } else {
    ScalingOptions so;
    so.grid = o.grid;
    so.grid.threads = 1;
    validate(so.grid);
    so.threads = resolve_threads(o.threads);
    so.fit_floor = o.fit_floor;
    so.keep_curves = !o.per_size_dir.empty();
    rep = runtime_scaling(o.dim, o.sizes, model(o), parse_quantity(o.quantity), so);
  }
  const std::string qname(to_string(rep.quantity));
  Output out(cmd, o);
  out.doc().comment("raw_fit", fmt::format("slope={} intercept={} r2={} n_points={}", format_number(rep.raw.slope),
                                           format_number(rep.raw.intercept), format_number(rep.raw.r2),
                                           rep.raw.n_points));
  if (rep.windowed)
    out.doc().comment("windowed_fit",
                      fmt::format("L>={} slope={} intercept={} r2={} n_points={}", rep.fit_floor,
                                  format_number(rep.windowed->slope), format_number(rep.windowed->intercept),
                                  format_number(rep.windowed->r2), rep.windowed->n_points));
  out.doc().header({"N", "L", "quantity", "value"});
  for (const auto& s : rep.sizes)
    out.doc().row({std::to_string(s.site_count), std::to_string(s.linear_size), qname, format_number(s.value)});

  if (!o.per_size_dir.empty()) {
    for (const auto& s : rep.sizes) {
      CsvDocument d;
      d.comment(fmt::format("adia integrand dim={} size={} quantity={}", o.dim, s.linear_size, qname));
      peak_comments(d, s.peak);
      d.header(kPointHeader);
      for (const auto& p : s.curve.points) d.row(point_row(p));
      write_atomic(fs::path(o.per_size_dir) / fmt::format("L{}.csv", s.linear_size), d.str());
    }
  }
  const ScalingFit& best = rep.windowed ? *rep.windowed : rep.raw;
  out.finish({"slope,intercept,r2,n_points", fit_row(best),
              fmt::format("# raw slope,intercept,r2,n_points = {}", fit_row(rep.raw))},
             "set logscale xy\nset xlabel 'N'\nplot data using 1:4 with linespoints\n");
  return 0;
}

int cmd_schedule(const CLI::App& cmd, const Options& o) {
  const auto curve = integrand_curve(o);
  const auto table = build_lae_schedule(curve, model(o));
  Output out(cmd, o);
  out.doc().comment("total_time", format_number(table.total()));
  out.doc().comment("quadrature_error", format_number(table.error));
  out.doc().header({"s", "tau"});
  for (std::size_t i = 0; i < table.s.size(); ++i) out.doc().row({format_number(table.s[i]), format_number(table.tau[i])});
  out.finish({fmt::format("total_time={} quadrature_error={} points={}", format_number(table.total()),
                          format_number(table.error), table.s.size())},
             "set xlabel 's'\nset ylabel 'tau'\nplot data using 1:2 with lines\n");
  return 0;
}

int cmd_dynamics(const CLI::App& cmd, const Options& o) {
  EvolutionConfig base;
  base.spec = lattice(o);
  base.params = model(o);
  base.backend = o.backend == "site" ? DynamicsBackend::Site : DynamicsBackend::Reduced;
  base.steps.tolerance = o.step_tol;
  base.steps.max_steps = o.max_steps;
  if (o.schedule == "lae") {
    base.schedule = ScheduleKind::LAE;
    const auto curve = sample_integrand(lattice_source(base.spec, base.params, open_options(o)), grid(o));
    base.lae = std::make_shared<const ScheduleTable>(build_lae_schedule(curve, base.params));
  }
  if (o.runtimes.empty()) throw ValidationError("--runtime needs at least one value");
  const auto sweep = sweep_runtime(base, o.runtimes, resolve_threads(o.threads));

  Output out(cmd, o);
  out.doc().header({"T", "P0", "norm_drift", "steps"});
  std::size_t failures = 0;
  double best = 0.0;
  std::vector<std::string> summary;
  for (const auto& e : sweep) {
    if (e.result) {
      out.doc().row({format_number(e.total_time), format_number(e.result->final_overlap),
                     format_number(e.result->norm_drift), std::to_string(e.result->steps)});
      best = std::max(best, e.result->final_overlap);
    } else {
      ++failures;
      out.doc().row({format_number(e.total_time), "nan", "nan", "0"});
      summary.push_back(fmt::format("failed T={}: {}", format_number(e.total_time), e.error));
    }
  }
  summary.insert(summary.begin(),
                 fmt::format("runs={} failures={} max_P0={}", sweep.size(), failures, format_number(best)));
  out.finish(summary, "set logscale x\nset xlabel 'T'\nset ylabel 'P0'\nplot data using 1:2 with linespoints\n");
  return failures == 0 ? 0 : 3;
}

int cmd_boundary(const CLI::App& cmd, const Options& o) {
  const auto rep = boundary_spread(o.dim, o.size, model(o), grid(o), resolve_threads(o.threads), open_options(o));
  Output out(cmd, o);
  out.doc().comment("orbit_count", std::to_string(rep.orbit_count));
  out.doc().comment("spread_height", format_number(rep.spread_height));
  out.doc().comment("spread_location", format_number(rep.spread_location));
  out.doc().header({"representative", "orbit_size", "folded", "height", "s_peak"});
  for (const auto& orb : rep.orbits)
    out.doc().row({std::to_string(orb.representative), std::to_string(orb.size), fmt::format("{}", fmt::join(orb.folded, ":")),
                   format_number(orb.height), format_number(orb.s_peak)});
  out.finish({fmt::format("orbits={} spread_height={} spread_location={} mean_height={} mean_location={}",
                          rep.orbit_count, format_number(rep.spread_height), format_number(rep.spread_location),
                          format_number(rep.mean_height), format_number(rep.mean_location))},
             "set logscale y\nset xlabel 'orbit'\nplot data using 0:4 with points\n");
  return 0;
}

// ---------------------------------------------------------------------------
// Parsing

void add_lattice(CLI::App* c, Options& o) {
  c->add_option("--dim", o.dim, "lattice dimension d")->capture_default_str();
  c->add_option("--size", o.size, "linear size L")->capture_default_str();
  c->add_option("--t", o.t, "hopping t")->capture_default_str();
  c->add_option("--mu", o.mu, "marked-site potential mu")->capture_default_str();
  c->add_option("--epsilon", o.epsilon, "adiabatic accuracy")->capture_default_str();
  c->add_option("--boundary", o.boundary, "periodic or open")
      ->check(CLI::IsMember({"periodic", "open"}))
      ->capture_default_str();
  c->add_option("--marked", o.marked, "marked site index (open grids)")->capture_default_str();
}

void add_common(CLI::App* c, Options& o) {
  c->add_option("--threads", o.threads, "worker threads (0: ADIA_THREADS or hardware)")->capture_default_str();
  c->add_option("--out", o.out, "CSV output path (stdout when absent)");
  c->add_flag("--no-meta", o.no_meta, "omit the timestamp comment");
  c->add_option("--config", o.config, "file of 'key = value' lines; flags take precedence");
}

void add_method(CLI::App* c, Options& o) {
  c->add_option("--method", o.method, "open-grid solver")
      ->check(CLI::IsMember({"auto", "dense", "lanczos", "sine"}))
      ->capture_default_str();
  c->add_option("--dense-threshold", o.dense_threshold, "largest N solved densely by --method auto")
      ->capture_default_str();
}

void add_grid(CLI::App* c, Options& o) {
  c->add_option("--base-points", o.grid.base_points, "uniform samples before refinement")->capture_default_str();
  c->add_option("--refine-ratio", o.grid.refine_ratio, "neighbour ratio that triggers refinement")
      ->capture_default_str();
  c->add_option("--max-depth", o.grid.max_depth, "refinement depth cap")->capture_default_str();
  c->add_option("--min-peak-points", o.grid.min_peak_points, "samples required inside the peak")
      ->capture_default_str();
  c->add_option("--quad-tol", o.grid.quad_tolerance, "relative quadrature tolerance")->capture_default_str();
}

/// Appends config-file entries as --key=value for every key that the
/// command line does not already set.
std::vector<std::string> with_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot read config file {}", path));
  auto given = [&](const std::string& key) {
    for (const auto& a : args)
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> extra;
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(fmt::format("{}:{}: expected 'key = value'", path, lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") throw ValidationError(fmt::format("{}:{}: invalid key", path, lineno));
    if (given(key)) continue;
    if (value == "true" || value == "false") {
      if (value == "true") extra.push_back("--" + key);
    } else {
      extra.push_back("--" + key + "=" + value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

int run(int argc, char** argv) {
  Options o;
  CLI::App app{"Adiabatic search by a hardcore boson on a cubic lattice"};
  app.require_subcommand(1);

  auto* spectrum = app.add_subcommand("spectrum", "E0, E1, gap and V01 at one s");
  add_lattice(spectrum, o);
  spectrum->add_option("--s", o.s, "interpolation parameter in [0, 1]")->capture_default_str();
  add_method(spectrum, o);

  auto* integrand = app.add_subcommand("integrand", "sample V01/g^2 over s and summarise its peak");
  add_lattice(integrand, o);
  add_method(integrand, o);
  add_grid(integrand, o);
  integrand->add_flag("--grover", o.grover, "use the Grover model with N = L^d");

  auto* scaling = app.add_subcommand("scaling", "size sweep with a log-log fit against N");
  scaling->add_option("--dim", o.dim, "lattice dimension d")->capture_default_str();
  scaling->add_option("--t", o.t, "hopping t")->capture_default_str();
  scaling->add_option("--mu", o.mu, "marked-site potential mu")->capture_default_str();
  scaling->add_option("--sizes", o.sizes, "ascending linear sizes")->delimiter(',');
  scaling->add_option("--quantity", o.quantity,
                      "t_estimate, t_lae, t_const, min_gap, max_v01, width or grover")
      ->capture_default_str();
  scaling->add_option("--fit-floor", o.fit_floor, "smallest L in the windowed fit (-1: per-dimension default)")
      ->capture_default_str();
  scaling->add_option("--per-size-dir", o.per_size_dir, "also write each size's integrand CSV here");
  scaling->add_option("--from-csv", o.from_csv, "refit an existing scaling CSV instead of sampling");
  add_grid(scaling, o);

  auto* schedule = app.add_subcommand("schedule", "locally adiabatic schedule tau(s)");
  add_lattice(schedule, o);
  add_method(schedule, o);
  add_grid(schedule, o);
  schedule->add_flag("--grover", o.grover, "use the Grover model with N = L^d");

  auto* dynamics = app.add_subcommand("dynamics", "final marked-site probability after runtime T");
  add_lattice(dynamics, o);
  add_method(dynamics, o);
  add_grid(dynamics, o);
  dynamics->add_option("--runtime", o.runtimes, "ascending total times")->delimiter(',')->required();
  dynamics->add_option("--schedule", o.schedule, "constant or lae")
      ->check(CLI::IsMember({"constant", "lae"}))
      ->capture_default_str();
  dynamics->add_option("--backend", o.backend, "reduced or site")
      ->check(CLI::IsMember({"reduced", "site"}))
      ->capture_default_str();
  dynamics->add_option("--step-tol", o.step_tol, "step-doubling tolerance on P0")->capture_default_str();
  dynamics->add_option("--max-steps", o.max_steps, "step cap")->capture_default_str();

  auto* boundary = app.add_subcommand("boundary", "peak spread over marked-site orbits of the open grid");
  boundary->add_option("--dim", o.dim, "lattice dimension d")->capture_default_str();
  boundary->add_option("--size", o.size, "linear size L")->capture_default_str();
  boundary->add_option("--t", o.t, "hopping t")->capture_default_str();
  boundary->add_option("--mu", o.mu, "marked-site potential mu")->capture_default_str();
  add_method(boundary, o);
  add_grid(boundary, o);

  for (auto* c : {spectrum, integrand, scaling, schedule, dynamics, boundary}) add_common(c, o);
  for (auto* c : {integrand, scaling, schedule, dynamics, boundary})
    c->add_flag("--gnuplot", o.gnuplot, "also write <out>.gp");

  std::vector<std::string> args(argv + 1, argv + argc);
  args = with_config(std::move(args));
  std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (spectrum->parsed()) return cmd_spectrum(*spectrum, o);
  if (integrand->parsed()) return cmd_integrand(*integrand, o);
  if (scaling->parsed()) {
    if (o.from_csv.empty() && o.sizes.empty()) throw ValidationError("--sizes is required");
    return cmd_scaling(*scaling, o);
  }
  if (schedule->parsed()) return cmd_schedule(*schedule, o);
  if (dynamics->parsed()) return cmd_dynamics(*dynamics, o);
  return cmd_boundary(*boundary, o);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const adia::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
}

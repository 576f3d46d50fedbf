#include "eit/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eit/config.hpp"
#include "eit/contact.hpp"
#include "eit/error.hpp"
#include "eit/experiments.hpp"
#include "eit/fem.hpp"
#include "eit/priors.hpp"
#include "eit/reconstruction.hpp"
#include "eit/sensitivity.hpp"

namespace eit {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json num_or_null(std::optional<double> v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

// Options shared by every subcommand.
struct Common {
  std::string config;
  std::string variant;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::vector<std::string> set;
};

/// Key-value configuration plus command-line overrides. Relative paths
/// resolve against the directory of the config file.
class Config {
 public:
  explicit Config(const Common& common) {
    if (!common.config.empty()) {
      kv_ = KeyValueFile::load(common.config);
      base_ = fs::path(common.config).parent_path();
    }
    for (const auto& assignment : common.set) {
      const auto eq = assignment.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw InputError("--set expects key=value, got '" + assignment + "'");
      }
      kv_.add(assignment.substr(0, eq), assignment.substr(eq + 1));
    }
    if (!common.variant.empty()) kv_.add("variant", common.variant);
    if (common.seed) kv_.add("seed", std::to_string(*common.seed));
    out_ = common.out;
  }

  std::optional<std::string> text(const std::string& key) const { return kv_.get(key); }
  double number(const std::string& key, double fallback) const {
    return kv_.get_double(key).value_or(fallback);
  }
  long long integer(const std::string& key, long long fallback) const {
    return kv_.get_int(key).value_or(fallback);
  }
  bool flag(const std::string& key, bool fallback) const { return kv_.get_bool(key).value_or(fallback); }
  std::vector<std::string> all(const std::string& key) const { return kv_.all(key); }

  std::optional<fs::path> path(const std::string& key) const {
    const auto v = kv_.get(key);
    if (!v) return std::nullopt;
    fs::path p(*v);
    if (p.is_relative()) p = base_ / p;
    if (!fs::exists(p)) throw InputError(key + ": file not found: " + p.string());
    return p;
  }
  fs::path required_path(const std::string& key) const {
    auto p = path(key);
    if (!p) throw InputError("missing configuration key '" + key + "'");
    return *p;
  }

  fs::path out_dir() const {
    fs::create_directories(out_);
    return out_;
  }

  std::uint64_t seed() const {
    const auto v = kv_.get_int("seed");
    if (v && *v < 0) throw InputError("seed must be nonnegative");
    return static_cast<std::uint64_t>(v.value_or(0));
  }

  ContactVariant variant() const { return parse_variant(kv_.get("variant").value_or("cem")); }

  DomainConductivity::Mode kappa_mode() const {
    const std::string mode = kv_.get("kappa_mode").value_or("nodal");
    if (mode == "nodal") return DomainConductivity::Mode::nodal;
    if (mode == "scalar") return DomainConductivity::Mode::scalar;
    throw InputError("kappa_mode must be nodal or scalar, got '" + mode + "'");
  }

  double amplitude() const {
    const double a = number("amplitude", 1e-3);
    if (!(a > 0.0)) throw InputError("amplitude must be positive");
    return a;
  }

  TankGeometry tank() const {
    TankGeometry t;
    t.circumference = number("tank.circumference", t.circumference);
    t.electrodes = static_cast<int>(integer("tank.electrodes", t.electrodes));
    t.electrode_width = number("tank.electrode_width", t.electrode_width);
    if (!(t.circumference > 0.0)) throw InputError("tank.circumference must be positive");
    return t;
  }

  PriorSpec prior() const {
    PriorSpec p;
    p.gamma_kappa = number("prior.gamma_kappa", p.gamma_kappa);
    p.lambda_kappa = number("prior.lambda_kappa", p.lambda_kappa);
    p.gamma_theta = number("prior.gamma_theta", p.gamma_theta);
    p.lambda_theta = number("prior.lambda_theta", p.lambda_theta);
    p.gamma_h = number("prior.gamma_h", p.gamma_h);
    p.gamma_l = number("prior.gamma_l", p.gamma_l);
    p.gamma_w = number("prior.gamma_w", p.gamma_w);
    p.sigma_mean = number("prior.sigma_mean", p.sigma_mean);
    p.noise_std = number("prior.noise_std", p.noise_std);
    p.validate();
    return p;
  }

  RunOptions solver() const {
    RunOptions o;
    o.max_iter = static_cast<int>(integer("solver.max_iter", o.max_iter));
    o.tol = number("solver.tol", o.tol);
    o.stall_iterations = static_cast<int>(integer("solver.stall_iterations", o.stall_iterations));
    o.line_search.c1 = number("solver.c1", o.line_search.c1);
    o.line_search.c2 = number("solver.c2", o.line_search.c2);
    o.line_search.max_halvings = static_cast<int>(integer("solver.max_halvings", o.line_search.max_halvings));
    o.line_search.wolfe = flag("solver.wolfe", o.line_search.wolfe);
    if (o.max_iter < 0) throw InputError("solver.max_iter must be nonnegative");
    if (!(o.tol >= 0.0)) throw InputError("solver.tol must be nonnegative");
    return o;
  }

 private:
  KeyValueFile kv_;
  fs::path base_;
  fs::path out_ = ".";
};

struct Geometry {
  std::shared_ptr<const TriMesh> mesh;
  std::vector<Interval> intervals;
  TankGeometry tank;
};

// Mesh and electrode intervals from files, or the built-in tank when absent.
Geometry load_geometry(const Config& cfg) {
  Geometry g;
  g.tank = cfg.tank();
  if (const auto p = cfg.path("mesh")) {
    g.mesh = std::make_shared<const TriMesh>(read_mesh(*p));
    if (!cfg.text("tank.circumference")) g.tank.circumference = g.mesh->perimeter;
  } else {
    g.mesh = std::make_shared<const TriMesh>(tank_mesh(g.tank));
  }
  if (const auto p = cfg.path("electrodes")) {
    g.intervals = read_intervals(*p);
  } else {
    g.intervals = g.tank.electrode_intervals();
  }
  return g;
}

std::vector<double> normalized(std::span<const ExtendedElectrode> electrodes, const std::vector<double>& widths) {
  std::vector<double> out(electrodes.size());
  for (std::size_t m = 0; m < electrodes.size(); ++m) out[m] = std::min(1.0, widths[m] / electrodes[m].length());
  return out;
}

Phantom load_phantom(const Config& cfg, double radius) {
  Phantom p = cfg.flag("scenario.two_inclusions", false) ? Phantom::two_inclusions(radius) : Phantom{};
  p.background = cfg.number("scenario.background", p.background);
  for (const auto& line : cfg.all("scenario.inclusion")) {
    std::istringstream in(line);
    std::string shape;
    in >> shape;
    std::vector<double> v;
    for (std::string tok; in >> tok;) v.push_back(parse_double(tok, "scenario.inclusion"));
    Inclusion inc;
    if (shape == "disk" && v.size() == 4) {
      inc.center = Vec2(v[0], v[1]);
      inc.radius = v[2];
      inc.sigma = v[3];
    } else if (shape == "polygon" && v.size() >= 7 && v.size() % 2 == 1) {
      inc.shape = Inclusion::Shape::polygon;
      inc.sigma = v[0];
      for (std::size_t i = 1; i < v.size(); i += 2) inc.vertices.emplace_back(v[i], v[i + 1]);
    } else {
      throw InputError("scenario.inclusion: expected 'disk cx cy r sigma' or 'polygon sigma x1 y1 x2 y2 x3 y3 ...', got '" +
                       line + "'");
    }
    if (!(inc.sigma > 0.0)) throw InputError("scenario.inclusion: conductivity must be positive");
    p.inclusions.push_back(inc);
  }
  if (!(p.background > 0.0)) throw InputError("scenario.background must be positive");
  return p;
}

void write_kappa_csv(const fs::path& path, const TriMesh& mesh, const DomainConductivity& kappa) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "node,x,y,kappa,sigma\n";
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const double k = kappa.at(i);
    out << i << ',' << num(mesh.nodes[i].x()) << ',' << num(mesh.nodes[i].y()) << ',' << num(k) << ','
        << num(std::exp(k)) << '\n';
  }
}

Eigen::VectorXd read_kappa_csv(const fs::path& path, int nodes) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("node,", 0) != 0) throw InputError(path.string() + ": expected header 'node,x,y,kappa,...'");
  Eigen::VectorXd k = Eigen::VectorXd::Constant(nodes, std::nan(""));
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() < 4) throw InputError(path.string() + ": short row '" + line + "'");
    const long long node = parse_int(cells[0], path.string());
    if (node < 0 || node >= nodes) throw InputError(path.string() + ": node index out of range");
    k[node] = parse_double(cells[3], path.string());
    ++rows;
  }
  if (rows != nodes || !k.allFinite()) {
    throw InputError(path.string() + ": expected " + std::to_string(nodes) + " nodes, got " + std::to_string(rows));
  }
  return k;
}

void write_zeta_csv(const fs::path& path, const ContactParams& contact,
                    std::span<const ExtendedElectrode> electrodes) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "electrode,t,s,zeta\n";
  constexpr int samples = 256;
  for (std::size_t m = 0; m < electrodes.size(); ++m) {
    for (int k = 0; k < samples; ++k) {
      const double t = static_cast<double>(k) / (samples - 1);
      out << m + 1 << ',' << num(t) << ',' << num(electrodes[m].to_arclength(t)) << ','
          << num(eval_zeta(contact, electrodes, static_cast<int>(m), t)) << '\n';
    }
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int cmd_forward(const Common& common, std::ostream& out) {
  const Config cfg(common);
  const Geometry g = load_geometry(cfg);
  const ContactVariant variant = cfg.variant();
  ForwardModel model{g.mesh, locate_electrodes(*g.mesh, g.intervals), variant,
                     {static_cast<int>(g.intervals.size()), cfg.amplitude()}};
  DomainConductivity kappa = DomainConductivity::scalar(std::log(cfg.number("forward.sigma", 0.02)));
  if (const auto p = cfg.path("forward.kappa")) {
    kappa = DomainConductivity::nodal(read_kappa_csv(*p, g.mesh->num_nodes()));
  }
  ContactParams contact;
  if (const auto p = cfg.path("forward.contact")) {
    contact = read_contact_csv(*p, model.electrodes);
    if (contact.variant != variant) throw InputError("forward.contact is a " + std::string(to_string(contact.variant)) + " file");
  } else {
    const double net = cfg.number("forward.contact_net", 0.03);
    const std::vector<double> widths(model.electrodes.size(), cfg.number("forward.ph_width", g.tank.electrode_width));
    contact = uniform_contact(variant, model.electrodes, net, normalized(model.electrodes, widths));
  }
  const ForwardSolution sol = model.forward(kappa, contact);
  const fs::path path = cfg.out_dir() / "voltages.csv";
  write_voltage_csv(path, measurements(sol), static_cast<int>(model.electrodes.size()));
  out << "wrote " << path.string() << " (" << model.num_measurements() << " voltages)\n";
  return 0;
}

int cmd_synth(const Common& common, std::ostream& out) {
  const Config cfg(common);
  const Geometry g = load_geometry(cfg);
  Scenario sc;
  sc.true_intervals = g.intervals;
  sc.extension = cfg.number("scenario.extension", 0.0);
  sc.seed = static_cast<std::uint64_t>(cfg.integer("scenario.seed", static_cast<long long>(cfg.seed())));
  sc.noise_std = cfg.number("scenario.noise_std", 0.0);
  sc.amplitude = cfg.amplitude();
  sc.contact_net = cfg.number("scenario.contact_net", sc.contact_net);
  const double radius = g.mesh->perimeter / (2.0 * 3.14159265358979323846);
  sc.phantom = load_phantom(cfg, radius);
  const int levels = static_cast<int>(cfg.integer("scenario.fine_levels", 1));

  const SynthData synth = synth_data(sc, *g.mesh, levels);
  const fs::path dir = cfg.out_dir();
  const int electrodes = static_cast<int>(g.intervals.size());
  write_voltage_csv(dir / "data.csv", synth.data, electrodes);
  write_voltage_csv(dir / "clean.csv", synth.clean, electrodes);
  write_truth(dir / "truth.txt", synth.truth);
  write_intervals(dir / "extended.txt", synth.truth.extended_intervals);
  write_intervals(dir / "true_electrodes.txt", synth.truth.true_intervals);

  double worst = 0.0;
  for (std::size_t m = 0; m < g.intervals.size(); ++m) {
    worst = std::max(worst, std::abs(synth.truth.extended_intervals[m].midpoint() - g.intervals[m].midpoint()));
  }
  out << "wrote " << (dir / "data.csv").string() << " (" << synth.data.size() << " voltages, fine mesh "
      << synth.truth.fine_nodes << " nodes, max midpoint displacement " << num(1e3 * worst) << " mm)\n";
  return 0;
}

int cmd_reconstruct(const Common& common, std::ostream& out) {
  const Config cfg(common);
  const Geometry g = load_geometry(cfg);
  const ContactVariant variant = cfg.variant();
  const auto mode = cfg.kappa_mode();
  const PriorSpec prior = cfg.prior();
  const RunOptions opts = cfg.solver();

  std::optional<TruthRecord> truth;
  if (const auto p = cfg.path("truth")) truth = read_truth(*p);
  std::vector<double> widths(g.intervals.size(), cfg.number("init.true_width", g.tank.electrode_width));
  if (truth) {
    if (truth->true_intervals.size() != g.intervals.size()) {
      throw InputError("truth record has " + std::to_string(truth->true_intervals.size()) + " electrodes, expected " +
                       std::to_string(g.intervals.size()));
    }
    for (std::size_t m = 0; m < widths.size(); ++m) widths[m] = truth->true_intervals[m].length();
  }

  ReconstructionRequest req;
  // Synthetic runs reconstruct on the extended electrodes recorded with the truth.
  req.intervals = truth && !cfg.text("electrodes") ? truth->extended_intervals : g.intervals;
  req.true_widths = widths;
  req.variant = variant;
  req.kappa_mode = mode;
  req.prior = prior;
  req.amplitude = cfg.amplitude();
  const std::string placement = cfg.text("init.cem_placement").value_or("given");
  if (placement != "given" && placement != "midpoint") throw InputError("init.cem_placement must be given or midpoint");
  req.cem_midpoint = placement == "midpoint";
  req.init_sigma = cfg.number("init.sigma", prior.sigma_mean);
  req.init_net = cfg.number("init.contact_net", req.init_net);
  if (const auto w = cfg.text("init.ph_width")) req.ph_width = parse_double(*w, "init.ph_width");
  req.options = opts;

  const int m_count = static_cast<int>(g.intervals.size());
  const Eigen::VectorXd data = read_voltage_csv(cfg.required_path("data"), m_count);
  const fs::path dir = cfg.out_dir();
  std::ofstream log(dir / "iterations.jsonl");
  if (!log) throw InputError("cannot write " + (dir / "iterations.jsonl").string());
  req.options.log = [&](const std::string& line) { log << line << '\n'; };
  const ReconstructionResult result = reconstruct(g.mesh, data, req);
  const GNState& state = result.state;
  const auto& problem = result.problem;
  const ContactSummary& summary = result.summary;

  write_kappa_csv(dir / "kappa.csv", *g.mesh, result.kappa);
  write_contact_csv(dir / "theta.csv", result.contact, problem.model.electrodes);
  write_zeta_csv(dir / "zeta.csv", result.contact, problem.model.electrodes);
  write_voltage_csv(dir / "fit.csv", state.residual + data, m_count);

  json terms = json::object();
  terms["data"] = state.terms.data;
  terms["kappa"] = state.terms.kappa;
  if (state.terms.theta) terms["theta"] = *state.terms.theta;
  terms["total"] = state.terms.total();

  std::optional<double> log_mean, log_std, err_mm;
  try {
    const ConductanceStats stats = conductance_stats(summary);
    log_mean = stats.mean;
    log_std = stats.std;
  } catch (const InputError&) {
  }
  if (truth) {
    try {
      err_mm = 1e3 * center_error(summary, truth->true_intervals);
    } catch (const InputError&) {
    }
  }
  json j;
  j["variant"] = std::string(to_string(variant));
  j["kappa_mode"] = mode == DomainConductivity::Mode::scalar ? "scalar" : "nodal";
  j["residual"] = state.residual.norm();
  j["sigma_mean"] = mean_conductivity(*g.mesh, result.kappa);
  j["objective_terms"] = terms;
  j["log_conductance_mean"] = num_or_null(log_mean);
  j["log_conductance_std"] = num_or_null(log_std);
  j["center_error_mm"] = num_or_null(err_mm);
  j["iterations"] = state.iteration;
  j["convergence_reason"] = state.reason;
  j["converged"] = state.converged;
  j["net_conductance"] = summary.net_conductance;
  write_json(dir / "summary.json", j);
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_check_jacobian(const Common& common, std::ostream& out, std::ostream& err) {
  const Config cfg(common);
  const Geometry g = load_geometry(cfg);
  if (g.mesh->num_nodes() > 1000) {
    err << "warning: finite differences over " << g.mesh->num_nodes()
        << " nodes are slow; a mesh below 1000 nodes or check.kappa_stride is recommended\n";
  }
  const ContactVariant variant = cfg.variant();
  const auto mode = cfg.kappa_mode();
  ForwardModel model{g.mesh, locate_electrodes(*g.mesh, g.intervals), variant,
                     {static_cast<int>(g.intervals.size()), cfg.amplitude()}};

  // A generic point: the homogeneous state with seeded multiplicative perturbations.
  std::mt19937_64 rng(cfg.seed());
  std::normal_distribution<double> noise(0.0, 0.1);
  const double k0 = std::log(cfg.number("check.sigma", 0.02));
  DomainConductivity kappa = DomainConductivity::scalar(k0);
  if (mode == DomainConductivity::Mode::nodal) {
    Eigen::VectorXd k(g.mesh->num_nodes());
    for (auto& v : k) v = k0 + noise(rng);
    kappa = DomainConductivity::nodal(k);
  }
  const std::vector<double> widths(model.electrodes.size(), cfg.number("check.ph_width", 0.6 * g.tank.electrode_width));
  ContactParams contact = uniform_contact(variant, model.electrodes, cfg.number("check.contact_net", 0.03),
                                          normalized(model.electrodes, widths));
  for (double& v : contact.theta) v *= 1.0 + noise(rng);
  contact = clamp_ph(contact);

  const JacobianCheck check =
      check_jacobian(model, kappa, contact, static_cast<int>(cfg.integer("check.kappa_stride", 1)));
  json j;
  j["kappa"] = check.kappa_max();
  j["theta"] = check.theta_max();
  j["kappa_columns"] = check.kappa_columns.size();
  j["theta_columns"] = check.theta_errors.size();
  write_json(cfg.out_dir() / "jacobian.json", j);
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_report(const Common& common, const std::vector<std::string>& runs, std::ostream& out) {
  if (runs.empty()) throw InputError("report needs at least one run directory");
  std::ostringstream table;
  table << "run,variant,kappa_mode,residual,sigma_mean,log_conductance_mean,log_conductance_std,center_error_mm,"
           "iterations,convergence_reason\n";
  auto cell = [](const json& v) { return v.is_null() ? std::string() : v.is_number() ? num(v.get<double>()) : v.dump(); };
  for (const auto& run : runs) {
    const fs::path path = fs::path(run) / "summary.json";
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw InputError(path.string() + ": " + e.what());
    }
    table << run << ',' << j.value("variant", "") << ',' << j.value("kappa_mode", "") << ','
          << cell(j["residual"]) << ',' << cell(j["sigma_mean"]) << ',' << cell(j["log_conductance_mean"]) << ','
          << cell(j["log_conductance_std"]) << ',' << cell(j["center_error_mm"]) << ',' << cell(j["iterations"])
          << ',' << j.value("convergence_reason", "") << '\n';
  }
  out << table.str();
  if (common.out != ".") {
    fs::create_directories(common.out);
    std::ofstream file(fs::path(common.out) / "report.csv");
    if (!file) throw InputError("cannot write report.csv");
    file << table.str();
  }
  return 0;
}

struct MeshOptions {
  double radius = 0.0;
  int boundary = 64;
  double growth = 1.0;
  bool tank = false;
};

int cmd_mesh(const Common& common, const MeshOptions& opts, std::ostream& out) {
  const Config cfg(common);
  const fs::path dir = cfg.out_dir();
  if (opts.tank) {
    const TankGeometry tank = cfg.tank();
    const TriMesh mesh = tank_mesh(tank);
    write_mesh(dir / "mesh.txt", mesh);
    write_intervals(dir / "electrodes.txt", tank.electrode_intervals());
    out << "wrote tank mesh with " << mesh.num_nodes() << " nodes and " << tank.electrodes << " electrodes\n";
    return 0;
  }
  if (!(opts.radius > 0.0) || opts.boundary < 3 || !(opts.growth >= 1.0)) {
    throw InputError("mesh needs --radius > 0, --boundary >= 3 and --growth >= 1, or --tank");
  }
  const TriMesh mesh = make_disk_mesh(opts.radius, opts.boundary, opts.growth);
  write_mesh(dir / "mesh.txt", mesh);
  out << "wrote disk mesh with " << mesh.num_nodes() << " nodes\n";
  return 0;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key-value configuration file");
  sub->add_option("--variant", c.variant, "contact model: cem, pl or ph");
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--set", c.set, "override a configuration key (key=value), repeatable");
}

}  // namespace

void write_voltage_csv(const fs::path& path, const Eigen::VectorXd& voltages, int electrodes) {
  if (electrodes < 2 || voltages.size() != static_cast<Eigen::Index>(electrodes) * (electrodes - 1)) {
    throw InputError("voltage vector has " + std::to_string(voltages.size()) + " entries for " +
                     std::to_string(electrodes) + " electrodes");
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "pattern,electrode,voltage\n";
  for (Eigen::Index k = 0; k < voltages.size(); ++k) {
    out << k / electrodes + 1 << ',' << k % electrodes + 1 << ',' << num(voltages[k]) << '\n';
  }
}

Eigen::VectorXd read_voltage_csv(const fs::path& path, int electrodes) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "pattern,electrode,voltage") {
    throw InputError(path.string() + ": expected header 'pattern,electrode,voltage'");
  }
  struct Row {
    long long pattern, electrode;
    double value;
    std::string where;
  };
  std::vector<Row> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != 3) throw InputError(where + ": expected three columns");
    rows.push_back({parse_int(cells[0], where), parse_int(cells[1], where), parse_double(cells[2], where), where});
  }
  const long long expected = static_cast<long long>(electrodes) * (electrodes - 1);
  if (static_cast<long long>(rows.size()) != expected) {
    throw InputError(path.string() + ": expected " + std::to_string(expected) + " voltages for " +
                     std::to_string(electrodes) + " electrodes, got " + std::to_string(rows.size()));
  }
  Eigen::VectorXd v = Eigen::VectorXd::Constant(expected, std::nan(""));
  for (const Row& r : rows) {
    if (r.pattern < 1 || r.pattern >= electrodes || r.electrode < 1 || r.electrode > electrodes) {
      throw InputError(r.where + ": pattern or electrode index out of range");
    }
    v[(r.pattern - 1) * electrodes + (r.electrode - 1)] = r.value;
  }
  if (!v.allFinite()) throw InputError(path.string() + ": repeated or non-finite voltages");
  return v;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Electrical impedance tomography with electrodeless contact models", "eit"};
  app.require_subcommand(1);
  Common common;
  auto* forward = app.add_subcommand("forward", "solve the forward problem and write voltages.csv");
  auto* synth = app.add_subcommand("synth", "generate synthetic data on a refined mesh");
  auto* reconstruct = app.add_subcommand("reconstruct", "Gauss-Newton reconstruction of kappa and contacts");
  auto* check = app.add_subcommand("check-jacobian", "compare analytic Jacobians with finite differences");
  auto* report = app.add_subcommand("report", "tabulate summary.json files of reconstruction runs");
  auto* mesh = app.add_subcommand("mesh", "write a disk or tank mesh");
  for (auto* sub : {forward, synth, reconstruct, check, report, mesh}) add_common(sub, common);
  std::vector<std::string> runs;
  report->add_option("runs", runs, "run directories containing summary.json");
  MeshOptions mesh_opts;
  mesh->add_option("--radius", mesh_opts.radius, "disk radius (m)");
  mesh->add_option("--boundary", mesh_opts.boundary, "boundary node count");
  mesh->add_option("--growth", mesh_opts.growth, "ring spacing growth towards the center");
  mesh->add_flag("--tank", mesh_opts.tank, "tank mesh and electrodes instead of a plain disk");

  std::vector<const char*> argv{"eit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*forward) return cmd_forward(common, out);
    if (*synth) return cmd_synth(common, out);
    if (*reconstruct) return cmd_reconstruct(common, out);
    if (*check) return cmd_check_jacobian(common, out, err);
    if (*report) return cmd_report(common, runs, out);
    if (*mesh) return cmd_mesh(common, mesh_opts, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace eit

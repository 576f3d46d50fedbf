#include "eit/experiments.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "eit/config.hpp"
#include "eit/error.hpp"

namespace eit {

namespace {

std::string number(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::vector<Interval> parse_intervals(const std::vector<std::string>& lines, const std::string& what) {
  std::vector<Interval> out;
  for (const auto& line : lines) {
    std::istringstream in(line);
    std::string a, b;
    if (!(in >> a >> b)) throw InputError(what + ": expected two numbers, got '" + line + "'");
    out.push_back({parse_double(a, what), parse_double(b, what)});
  }
  return out;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw InputError(what + ": not an unsigned integer: '" + text + "'");
  }
  return value;
}

}  // namespace

bool Inclusion::contains(const Vec2& p) const {
  if (shape == Shape::disk) return (p - center).squaredNorm() <= radius * radius;
  // Crossing-number test.
  bool inside = false;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x()) {
      inside = !inside;
    }
  }
  return inside;
}

double Phantom::sigma_at(const Vec2& p) const {
  double sigma = background;
  for (const auto& inc : inclusions) {
    if (inc.contains(p)) sigma = inc.sigma;
  }
  return sigma;
}

Eigen::VectorXd Phantom::log_sigma(const TriMesh& mesh) const {
  Eigen::VectorXd kappa(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) kappa[i] = std::log(sigma_at(mesh.nodes[i]));
  return kappa;
}

Phantom Phantom::two_inclusions(double radius) {
  Phantom p;
  p.background = 0.02;
  Inclusion insulating;
  insulating.center = Vec2(-0.35 * radius, 0.3 * radius);
  insulating.radius = 0.22 * radius;
  insulating.sigma = 1e-5;
  Inclusion conducting;
  conducting.center = Vec2(0.4 * radius, -0.25 * radius);
  conducting.radius = 0.2 * radius;
  conducting.sigma = 10.0;
  p.inclusions = {insulating, conducting};
  return p;
}

double TankGeometry::radius() const { return circumference / (2.0 * std::numbers::pi); }

std::vector<Interval> TankGeometry::electrode_intervals() const {
  if (electrodes < 2 || electrode_width <= 0.0 || electrodes * electrode_width >= circumference) {
    throw InputError("tank electrodes do not fit on the boundary");
  }
  std::vector<Interval> out;
  const double pitch = circumference / electrodes;
  for (int m = 0; m < electrodes; ++m) {
    const double c = (m + 0.5) * pitch;
    out.push_back({c - 0.5 * electrode_width, c + 0.5 * electrode_width});
  }
  return out;
}

TriMesh tank_mesh(const TankGeometry& tank) {
  // About 2.4 mm boundary spacing keeps a node between neighboring extended
  // electrodes for extensions up to about 22 mm; the interior coarsens inward.
  // Electrode ends sit on boundary nodes so exact geometry needs no snapping.
  const double h = 1.06 / 448;
  const double pitch = tank.circumference / tank.electrodes;
  const double half_gap = 0.5 * (pitch - tank.electrode_width);
  if (tank.electrodes < 1 || half_gap <= 0.0) throw InputError("tank electrodes overlap");
  const int n_gap = std::max(1, static_cast<int>(std::lround(half_gap / h)));
  const int n_el = std::max(1, static_cast<int>(std::lround(tank.electrode_width / h)));
  std::vector<double> s;
  for (int m = 0; m < tank.electrodes; ++m) {
    const double start = m * pitch;
    for (int k = 0; k < n_gap; ++k) s.push_back(start + half_gap * k / n_gap);
    for (int k = 0; k < n_el; ++k) s.push_back(start + half_gap + tank.electrode_width * k / n_el);
    for (int k = 0; k < n_gap; ++k) s.push_back(start + half_gap + tank.electrode_width + half_gap * k / n_gap);
  }
  for (double& x : s) x /= tank.radius();
  return make_disk_mesh(tank.radius(), s, 1.15);
}

ExtensionDraw randomize_extensions(const std::vector<Interval>& true_intervals, double extension,
                                   std::uint64_t seed, double perimeter) {
  if (extension < 0.0) throw InputError("extension must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ExtensionDraw draw;
  for (const auto& iv : true_intervals) {
    const double alpha = unit(rng);
    draw.alpha.push_back(alpha);
    draw.intervals.push_back({iv.a - alpha * extension, iv.b + (1.0 - alpha) * extension});
  }
  std::string problems;
  const std::size_t n = draw.intervals.size();
  for (std::size_t m = 0; m + 1 < n; ++m) {
    if (draw.intervals[m].b >= draw.intervals[m + 1].a) {
      problems += " (" + std::to_string(m + 1) + "," + std::to_string(m + 2) + ")";
    }
  }
  if (n > 1 && draw.intervals.back().b - perimeter >= draw.intervals.front().a) {
    problems += " (" + std::to_string(n) + ",1)";
  }
  if (!problems.empty()) throw InputError("extended electrodes overlap:" + problems);
  if (n > 0 && (draw.intervals.front().a < 0.0 || draw.intervals.back().b > perimeter)) {
    throw InputError("extended electrodes cross the arclength origin");
  }
  return draw;
}

SynthData synth_data(const Scenario& scenario, const TriMesh& mesh, int fine_levels) {
  if (fine_levels < 1) throw InputError("synthetic data needs at least one refinement level");
  if (!(scenario.amplitude > 0.0)) throw InputError("current amplitude must be positive");
  if (scenario.noise_std < 0.0) throw InputError("noise level must be nonnegative");
  TriMesh fine = refine_uniform(mesh);
  for (int level = 1; level < fine_levels; ++level) fine = refine_uniform(fine);
  auto fine_mesh = std::make_shared<const TriMesh>(std::move(fine));

  const ExtensionDraw draw = randomize_extensions(scenario.true_intervals, scenario.extension,
                                                  scenario.seed, mesh.perimeter);
  const int m_count = static_cast<int>(scenario.true_intervals.size());
  ForwardModel model{fine_mesh, locate_electrodes(*fine_mesh, scenario.true_intervals),
                     ContactVariant::cem, {m_count, scenario.amplitude}};
  const ContactParams contact = uniform_contact(ContactVariant::cem, model.electrodes, scenario.contact_net);
  const auto kappa = DomainConductivity::nodal(scenario.phantom.log_sigma(*fine_mesh));

  SynthData out;
  out.clean = measurements(model.forward(kappa, contact));
  out.data = out.clean;
  if (scenario.noise_std > 0.0) {
    std::seed_seq seq{static_cast<std::uint32_t>(scenario.seed),
                      static_cast<std::uint32_t>(scenario.seed >> 32), 0x6e6f6973u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, scenario.noise_std);
    for (Eigen::Index i = 0; i < out.data.size(); ++i) out.data[i] += noise(rng);
  }
  out.fine_mesh = fine_mesh;
  out.truth = {scenario.true_intervals, draw.intervals, draw.alpha, scenario.extension,
               scenario.seed, scenario.noise_std, scenario.amplitude, scenario.contact_net,
               scenario.phantom.background, fine_mesh->num_nodes(), fine_mesh->fingerprint};
  return out;
}

void assert_distinct_meshes(const SynthData& synth, const TikhonovProblem& problem) {
  if (synth.fine_mesh == problem.model.mesh ||
      synth.truth.fine_mesh_fingerprint == problem.model.mesh->fingerprint) {
    throw InputError("reconstruction mesh is the data-generating mesh");
  }
}

double residual_norm(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) {
    throw InputError("residual of vectors with " + std::to_string(u.size()) + " and " +
                     std::to_string(v.size()) + " entries");
  }
  return (u - v).norm();
}

double center_error(const ContactSummary& summary, const std::vector<Interval>& true_intervals) {
  if (summary.center.size() != true_intervals.size() || true_intervals.empty()) {
    throw InputError("center error needs one true interval per electrode");
  }
  double total = 0.0;
  for (std::size_t m = 0; m < true_intervals.size(); ++m) {
    if (!summary.center[m]) {
      throw InputError("electrode " + std::to_string(m + 1) + " has no contact center");
    }
    total += std::abs(true_intervals[m].midpoint() - *summary.center[m]);
  }
  return total / static_cast<double>(true_intervals.size());
}

ConductanceStats conductance_stats(const ContactSummary& summary) {
  for (std::size_t m = 0; m < summary.net_conductance.size(); ++m) {
    if (!(summary.net_conductance[m] > 0.0)) {
      throw InputError("electrode " + std::to_string(m + 1) + " has zero net conductance");
    }
  }
  if (!summary.log_mean || !summary.log_std) throw InputError("conductance statistics need two electrodes");
  return {*summary.log_mean, *summary.log_std};
}

std::vector<Interval> midpoint_placement(const std::vector<Interval>& extended,
                                         const std::vector<double>& widths) {
  if (extended.size() != widths.size()) throw InputError("one width per electrode is required");
  std::vector<Interval> out;
  for (std::size_t m = 0; m < extended.size(); ++m) {
    const double c = extended[m].midpoint();
    out.push_back({c - 0.5 * widths[m], c + 0.5 * widths[m]});
  }
  return out;
}

ReconstructionResult reconstruct(std::shared_ptr<const TriMesh> mesh, const Eigen::VectorXd& data,
                                 const ReconstructionRequest& request) {
  if (!mesh) throw InputError("reconstruction needs a mesh");
  const std::size_t count = request.intervals.size();
  if (request.true_widths.size() != count) throw InputError("one true width per electrode is required");
  if (request.cem_midpoint && request.variant != ContactVariant::cem) {
    throw InputError("midpoint placement applies to the cem variant only");
  }
  const auto intervals =
      request.cem_midpoint ? midpoint_placement(request.intervals, request.true_widths) : request.intervals;
  ForwardModel model{mesh, locate_electrodes(*mesh, intervals), request.variant,
                     {static_cast<int>(count), request.amplitude}};
  ReconstructionResult r{make_problem(std::move(model), data, request.prior, request.kappa_mode, request.true_widths),
                         {}, {}, {}, {}};
  const auto& electrodes = r.problem.model.electrodes;

  if (!(request.init_sigma > 0.0)) throw InputError("initial conductivity must be positive");
  const double k0 = std::log(request.init_sigma);
  const DomainConductivity kappa0 =
      request.kappa_mode == DomainConductivity::Mode::scalar
          ? DomainConductivity::scalar(k0)
          : DomainConductivity::nodal(Eigen::VectorXd::Constant(mesh->num_nodes(), k0));
  std::vector<double> w(count);
  for (std::size_t m = 0; m < count; ++m) {
    w[m] = std::min(1.0, request.ph_width.value_or(request.true_widths[m]) / electrodes[m].length());
  }
  const ContactParams contact0 = uniform_contact(request.variant, electrodes, request.init_net, w);

  r.state = run(r.problem, r.problem.stack(kappa0, contact0), request.options);
  r.kappa = r.problem.kappa_of(r.state.tau);
  r.contact = r.problem.contact_of(r.state.tau);
  r.summary = summarize(r.contact, electrodes);
  return r;
}

double mean_conductivity(const TriMesh& mesh, const DomainConductivity& kappa) {
  if (kappa.mode == DomainConductivity::Mode::scalar) return std::exp(kappa.kappa[0]);
  double total = 0.0, area = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const double a = mesh.triangle_area(t);
    for (int v : mesh.triangles[t]) total += a / 3.0 * std::exp(kappa.kappa[v]);
    area += a;
  }
  return total / area;
}

void write_truth(const std::filesystem::path& path, const TruthRecord& truth) {
  KeyValueFile f;
  f.add("seed", std::to_string(truth.seed));
  f.add("extension", number(truth.extension));
  f.add("noise_std", number(truth.noise_std));
  f.add("amplitude", number(truth.amplitude));
  f.add("contact_net", number(truth.contact_net));
  f.add("background_sigma", number(truth.background_sigma));
  f.add("fine_nodes", std::to_string(truth.fine_nodes));
  f.add("fine_mesh_fingerprint", std::to_string(truth.fine_mesh_fingerprint));
  for (std::size_t m = 0; m < truth.true_intervals.size(); ++m) {
    f.add("true_interval", number(truth.true_intervals[m].a) + " " + number(truth.true_intervals[m].b));
  }
  for (std::size_t m = 0; m < truth.extended_intervals.size(); ++m) {
    f.add("extended_interval",
          number(truth.extended_intervals[m].a) + " " + number(truth.extended_intervals[m].b));
    f.add("alpha", number(truth.alpha[m]));
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << f.to_string();
}

TruthRecord read_truth(const std::filesystem::path& path) {
  const KeyValueFile f = KeyValueFile::load(path);
  TruthRecord t;
  auto need = [&](const std::string& key) {
    const auto v = f.get(key);
    if (!v) throw InputError(path.string() + ": missing key " + key);
    return *v;
  };
  t.seed = parse_u64(need("seed"), "seed");
  t.extension = parse_double(need("extension"), "extension");
  t.noise_std = parse_double(need("noise_std"), "noise_std");
  t.amplitude = parse_double(need("amplitude"), "amplitude");
  t.contact_net = parse_double(need("contact_net"), "contact_net");
  t.background_sigma = parse_double(need("background_sigma"), "background_sigma");
  t.fine_nodes = static_cast<int>(parse_int(need("fine_nodes"), "fine_nodes"));
  t.fine_mesh_fingerprint = parse_u64(need("fine_mesh_fingerprint"), "fine_mesh_fingerprint");
  t.true_intervals = parse_intervals(f.all("true_interval"), "true_interval");
  t.extended_intervals = parse_intervals(f.all("extended_interval"), "extended_interval");
  for (const auto& a : f.all("alpha")) t.alpha.push_back(parse_double(a, "alpha"));
  if (t.extended_intervals.size() != t.true_intervals.size() || t.alpha.size() != t.true_intervals.size()) {
    throw InputError(path.string() + ": interval counts disagree");
  }
  return t;
}

}  // namespace eit

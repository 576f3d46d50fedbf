#include "eit/contact.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "eit/error.hpp"

namespace eit {

namespace {

constexpr double kGauss = 0.57735026918962576451;  // 1/sqrt(3)

int electrode_count(std::span<const ExtendedElectrode> electrodes) {
  return static_cast<int>(electrodes.size());
}

// Adds the segment (t0,v0)-(t1,v1) restricted to [0, 1].
void add_clipped(PiecewiseLinear& f, double t0, double t1, double v0, double v1) {
  if (!(t1 > t0)) return;
  const double c0 = std::max(t0, 0.0);
  const double c1 = std::min(t1, 1.0);
  if (!(c1 > c0)) return;
  const double slope = (v1 - v0) / (t1 - t0);
  f.add(c0, c1, v0 + slope * (c0 - t0), v0 + slope * (c1 - t0));
}

struct Hat {
  double h, l, w;
};

Hat hat_of(const ContactParams& params, int m, int count) {
  return {params.theta[m], params.theta[count + m], params.theta[2 * count + m]};
}

void check_size(const ContactParams& params, std::span<const ExtendedElectrode> electrodes) {
  const int expected = contact_param_count(params.variant, electrodes);
  if (static_cast<int>(params.theta.size()) != expected) {
    throw InputError(std::string(to_string(params.variant)) + " contact expects " +
                     std::to_string(expected) + " parameters, got " +
                     std::to_string(params.theta.size()));
  }
}

}  // namespace

void PiecewiseLinear::add(double t0, double t1, double v0, double v1) {
  if (!pieces_.empty() && t0 < pieces_.back().t1) {
    throw std::logic_error("PiecewiseLinear pieces must be added in order");
  }
  pieces_.push_back({t0, t1, v0, v1});
}

double PiecewiseLinear::operator()(double t) const {
  for (const auto& p : pieces_) {
    if (t >= p.t0 && t < p.t1) return p.v0 + (p.v1 - p.v0) * (t - p.t0) / (p.t1 - p.t0);
  }
  if (!pieces_.empty() && t == pieces_.back().t1 && t == 1.0) return pieces_.back().v1;
  return 0.0;
}

double PiecewiseLinear::moment(int power) const {
  double sum = 0.0;
  for (const auto& p : pieces_) {
    const double half = 0.5 * (p.t1 - p.t0);
    const double mid = 0.5 * (p.t1 + p.t0);
    for (double g : {-kGauss, kGauss}) {
      const double t = mid + g * half;
      const double v = p.v0 + (p.v1 - p.v0) * (t - p.t0) / (p.t1 - p.t0);
      sum += half * v * (power == 0 ? 1.0 : t);
    }
  }
  return sum;
}

std::string_view to_string(ContactVariant variant) {
  switch (variant) {
    case ContactVariant::cem: return "cem";
    case ContactVariant::pl: return "pl";
    case ContactVariant::ph: return "ph";
  }
  return "?";
}

ContactVariant parse_variant(std::string_view name) {
  if (name == "cem") return ContactVariant::cem;
  if (name == "pl") return ContactVariant::pl;
  if (name == "ph") return ContactVariant::ph;
  throw InputError("unknown contact variant '" + std::string(name) + "' (expected cem|pl|ph)");
}

int pl_offset(std::span<const ExtendedElectrode> electrodes, int m) {
  int offset = 0;
  for (int e = 0; e < m; ++e) offset += electrodes[e].num_interior_nodes();
  return offset;
}

int contact_param_count(ContactVariant variant, std::span<const ExtendedElectrode> electrodes) {
  switch (variant) {
    case ContactVariant::cem: return electrode_count(electrodes);
    case ContactVariant::pl: return pl_offset(electrodes, electrode_count(electrodes));
    case ContactVariant::ph: return 3 * electrode_count(electrodes);
  }
  return 0;
}

int contact_param_electrode(ContactVariant variant, std::span<const ExtendedElectrode> electrodes,
                            int k) {
  const int count = electrode_count(electrodes);
  if (k < 0 || k >= contact_param_count(variant, electrodes)) {
    throw InputError("contact parameter index " + std::to_string(k) + " out of range");
  }
  switch (variant) {
    case ContactVariant::cem: return k;
    case ContactVariant::ph: return k % count;
    case ContactVariant::pl: {
      for (int m = 0; m < count; ++m) {
        k -= electrodes[m].num_interior_nodes();
        if (k < 0) return m;
      }
    }
  }
  return -1;
}

PiecewiseLinear zeta_density(const ContactParams& params,
                             std::span<const ExtendedElectrode> electrodes, int m) {
  check_size(params, electrodes);
  const auto& e = electrodes[m];
  PiecewiseLinear f;
  switch (params.variant) {
    case ContactVariant::cem: {
      const double z = params.theta[m] * params.theta[m];
      f.add(0.0, 1.0, z, z);
      break;
    }
    case ContactVariant::pl: {
      const int offset = pl_offset(electrodes, m);
      auto nodal = [&](int i) {
        if (i == 0 || i == e.num_nodes() - 1) return 0.0;
        const double th = params.theta[offset + i - 1];
        return th * th;
      };
      for (int i = 0; i + 1 < e.num_nodes(); ++i) {
        f.add(e.node_t[i], e.node_t[i + 1], nodal(i), nodal(i + 1));
      }
      break;
    }
    case ContactVariant::ph: {
      const auto [h, l, w] = hat_of(params, m, electrode_count(electrodes));
      if (w <= 0.0) break;
      const double peak = 2.0 * h / w;
      add_clipped(f, l - 0.5 * w, l, 0.0, peak);
      add_clipped(f, l, l + 0.5 * w, peak, 0.0);
      break;
    }
  }
  return f;
}

double eval_zeta(const ContactParams& params, std::span<const ExtendedElectrode> electrodes,
                 int m, double t) {
  return zeta_density(params, electrodes, m)(t);
}

PiecewiseLinear dzeta_dtheta(const ContactParams& params,
                             std::span<const ExtendedElectrode> electrodes, int k) {
  check_size(params, electrodes);
  const int m = contact_param_electrode(params.variant, electrodes, k);
  const auto& e = electrodes[m];
  PiecewiseLinear f;
  switch (params.variant) {
    case ContactVariant::cem: {
      const double d = 2.0 * params.theta[k];
      f.add(0.0, 1.0, d, d);
      break;
    }
    case ContactVariant::pl: {
      const int i = k - pl_offset(electrodes, m) + 1;  // local node index
      const double d = 2.0 * params.theta[k];
      f.add(e.node_t[i - 1], e.node_t[i], 0.0, d);
      f.add(e.node_t[i], e.node_t[i + 1], d, 0.0);
      break;
    }
    case ContactVariant::ph: {
      const int count = electrode_count(electrodes);
      const auto [h, l, w] = hat_of(params, m, count);
      if (w <= 0.0) break;
      const double lo = l - 0.5 * w;
      const double hi = l + 0.5 * w;
      switch (k / count) {
        case 0:
          add_clipped(f, lo, l, 0.0, 2.0 / w);
          add_clipped(f, l, hi, 2.0 / w, 0.0);
          break;
        case 1: {
          const double slope = 4.0 * h / (w * w);
          add_clipped(f, lo, l, -slope, -slope);
          add_clipped(f, l, hi, slope, slope);
          break;
        }
        default: {
          const double edge = 2.0 * h / (w * w);
          add_clipped(f, lo, l, edge, -edge);
          add_clipped(f, l, hi, -edge, edge);
          break;
        }
      }
      break;
    }
  }
  return f;
}

ContactParams clamp_ph(ContactParams params) {
  if (params.variant != ContactVariant::ph) return params;
  const std::size_t count = params.theta.size() / 3;
  for (std::size_t m = 0; m < count; ++m) {
    double& h = params.theta[m];
    double& l = params.theta[count + m];
    double& w = params.theta[2 * count + m];
    h = std::max(h, kPhFloor);
    w = std::max(w, kPhFloor);
    if (w > 1.0) w = 1.0;
    if (l - 0.5 * w < 0.0) l = 0.5 * w;
    if (l + 0.5 * w > 1.0) l = 1.0 - 0.5 * w;
  }
  return params;
}

EdgeIntegrals integrate_on_edge(const PiecewiseLinear& density, double t_start, double t_end,
                                double electrode_length) {
  EdgeIntegrals out;
  const double span = t_end - t_start;
  for (const auto& p : density.pieces()) {
    const double x0 = std::max(p.t0, t_start);
    const double x1 = std::min(p.t1, t_end);
    if (!(x1 > x0)) continue;
    const double half = 0.5 * (x1 - x0);
    const double mid = 0.5 * (x1 + x0);
    const double weight = half * electrode_length;
    for (double g : {-kGauss, kGauss}) {
      const double t = mid + g * half;
      const double v = p.v0 + (p.v1 - p.v0) * (t - p.t0) / (p.t1 - p.t0);
      const double phi_b = (t - t_start) / span;
      const double phi_a = 1.0 - phi_b;
      const double wv = weight * v;
      out.aa += wv * phi_a * phi_a;
      out.ab += wv * phi_a * phi_b;
      out.bb += wv * phi_b * phi_b;
      out.a += wv * phi_a;
      out.b += wv * phi_b;
      out.total += wv;
    }
  }
  return out;
}

std::vector<EdgeIntegrals> edge_zeta_integrals(const ContactParams& params, const TriMesh& mesh,
                                               std::span<const ExtendedElectrode> electrodes) {
  std::vector<EdgeIntegrals> edges(mesh.num_boundary());
  for (int m = 0; m < electrode_count(electrodes); ++m) {
    const auto& e = electrodes[m];
    const PiecewiseLinear zeta = zeta_density(params, electrodes, m);
    for (int i = 0; i < e.num_edges(); ++i) {
      edges[e.first_position + i] =
          integrate_on_edge(zeta, e.node_t[i], e.node_t[i + 1], e.length());
    }
  }
  return edges;
}

ContactSummary summarize(const ContactParams& params,
                         std::span<const ExtendedElectrode> electrodes) {
  ContactSummary summary;
  const int count = electrode_count(electrodes);
  bool all_positive = true;
  std::vector<double> logs;
  for (int m = 0; m < count; ++m) {
    const auto& e = electrodes[m];
    const PiecewiseLinear zeta = zeta_density(params, electrodes, m);
    const double mass = zeta.moment(0);
    summary.net_conductance.push_back(e.length() * mass);
    if (mass > 0.0) {
      summary.center.emplace_back(e.to_arclength(zeta.moment(1) / mass));
      logs.push_back(std::log(e.length() * mass));
    } else {
      summary.center.emplace_back(std::nullopt);
      all_positive = false;
    }
  }
  if (all_positive && !logs.empty()) {
    double mean = 0.0;
    for (double v : logs) mean += v;
    mean /= static_cast<double>(logs.size());
    summary.log_mean = mean;
    if (logs.size() > 1) {
      double ss = 0.0;
      for (double v : logs) ss += (v - mean) * (v - mean);
      summary.log_std = std::sqrt(ss / static_cast<double>(logs.size() - 1));
    }
  }
  return summary;
}

ContactParams uniform_contact(ContactVariant variant, std::span<const ExtendedElectrode> electrodes,
                              double net, std::span<const double> ph_width) {
  if (!(net > 0.0)) throw InputError("initial net conductance must be positive");
  const int count = electrode_count(electrodes);
  ContactParams params{variant, {}};
  switch (variant) {
    case ContactVariant::cem:
      for (const auto& e : electrodes) params.theta.push_back(std::sqrt(net / e.length()));
      break;
    case ContactVariant::pl:
      for (const auto& e : electrodes) {
        const double first = e.node_t[1] - e.node_t[0];
        const double last = e.node_t[e.num_nodes() - 1] - e.node_t[e.num_nodes() - 2];
        const double plateau = e.length() * (1.0 - 0.5 * (first + last));
        const double value = std::sqrt(net / plateau);
        params.theta.insert(params.theta.end(), e.num_interior_nodes(), value);
      }
      break;
    case ContactVariant::ph:
      if (static_cast<int>(ph_width.size()) != count) {
        throw InputError("PH start needs one width per electrode");
      }
      params.theta.resize(3 * count);
      for (int m = 0; m < count; ++m) {
        params.theta[m] = net / electrodes[m].length();
        params.theta[count + m] = 0.5;
        params.theta[2 * count + m] = ph_width[m];
      }
      params = clamp_ph(std::move(params));
      break;
  }
  return params;
}

void write_contact_csv(const std::filesystem::path& path, const ContactParams& params,
                       std::span<const ExtendedElectrode> electrodes) {
  check_size(params, electrodes);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write contact file " + path.string());
  out << std::setprecision(17);
  out << "variant," << to_string(params.variant) << '\n';
  out << "electrode,param_name,value\n";
  const int count = electrode_count(electrodes);
  switch (params.variant) {
    case ContactVariant::cem:
      for (int m = 0; m < count; ++m) out << m + 1 << ",theta," << params.theta[m] << '\n';
      break;
    case ContactVariant::pl:
      for (int m = 0; m < count; ++m) {
        const int offset = pl_offset(electrodes, m);
        const auto& e = electrodes[m];
        for (int i = 1; i + 1 < e.num_nodes(); ++i) {
          out << m + 1 << ",node:" << e.node_ids[i] << ',' << params.theta[offset + i - 1] << '\n';
        }
      }
      break;
    case ContactVariant::ph:
      for (int m = 0; m < count; ++m) {
        out << m + 1 << ",h," << params.theta[m] << '\n';
        out << m + 1 << ",l," << params.theta[count + m] << '\n';
        out << m + 1 << ",w," << params.theta[2 * count + m] << '\n';
      }
      break;
  }
}

ContactParams read_contact_csv(const std::filesystem::path& path,
                               std::span<const ExtendedElectrode> electrodes) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open contact file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("variant,", 0) != 0) {
    throw InputError(path.string() + ": first line must be `variant,<cem|pl|ph>`");
  }
  ContactParams params{parse_variant(line.substr(8)), {}};
  const int count = electrode_count(electrodes);
  const int total = contact_param_count(params.variant, electrodes);
  params.theta.assign(total, 0.0);
  std::vector<bool> seen(total, false);

  std::map<int, int> pl_index;  // node id -> parameter
  if (params.variant == ContactVariant::pl) {
    for (int m = 0; m < count; ++m) {
      const int offset = pl_offset(electrodes, m);
      for (int i = 1; i + 1 < electrodes[m].num_nodes(); ++i) {
        pl_index[electrodes[m].node_ids[i]] = offset + i - 1;
      }
    }
  }

  std::getline(in, line);  // column header
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    std::string electrode_field, name, value_field;
    std::getline(row, electrode_field, ',');
    std::getline(row, name, ',');
    std::getline(row, value_field);
    int m = 0;
    double value = 0.0;
    try {
      m = std::stoi(electrode_field) - 1;
      value = std::stod(value_field);
    } catch (const std::exception&) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    if (m < 0 || m >= count) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": electrode out of range");
    }
    int k = -1;
    if (params.variant == ContactVariant::cem && name == "theta") {
      k = m;
    } else if (params.variant == ContactVariant::ph && (name == "h" || name == "l" || name == "w")) {
      k = (name == "h" ? 0 : name == "l" ? 1 : 2) * count + m;
    } else if (params.variant == ContactVariant::pl && name.rfind("node:", 0) == 0) {
      auto it = pl_index.find(std::stoi(name.substr(5)));
      if (it != pl_index.end()) k = it->second;
    }
    if (k < 0) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": unknown parameter '" +
                       name + "'");
    }
    params.theta[k] = value;
    seen[k] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw InputError(path.string() + ": missing contact parameters");
  }
  return params;
}

}  // namespace eit

#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "eit/contact.hpp"
#include "eit/fem.hpp"
#include "eit/mesh.hpp"

namespace eit::test {

inline TriMesh unit_square() {
  return build_boundary({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}});
}

/// Small disk with equally spaced electrodes of the given half-width, the
/// first centered half a pitch past the arclength origin.
struct DiskSetup {
  std::shared_ptr<const TriMesh> mesh;
  std::vector<Interval> intervals;
  std::vector<ExtendedElectrode> electrodes;

  ForwardModel model(ContactVariant variant, double amplitude = 1e-3) const {
    return {mesh, electrodes, variant, {static_cast<int>(electrodes.size()), amplitude}};
  }
};

inline DiskSetup disk_setup(int electrodes = 8, int boundary = 64, double growth = 1.1,
                            double radius = 0.1687, double half_width = 0.03) {
  DiskSetup s;
  s.mesh = std::make_shared<const TriMesh>(make_disk_mesh(radius, boundary, growth));
  const double pitch = s.mesh->perimeter / electrodes;
  for (int m = 0; m < electrodes; ++m) {
    const double c = (m + 0.5) * pitch;
    s.intervals.push_back({c - half_width, c + half_width});
  }
  s.electrodes = locate_electrodes(*s.mesh, s.intervals);
  return s;
}

/// Contact parameters away from any symmetry: each parameter perturbed by a
/// deterministic pattern, PH then clamped.
inline ContactParams perturbed_contact(ContactVariant variant,
                                       const std::vector<ExtendedElectrode>& electrodes,
                                       double net = 0.03, double width = 0.6) {
  std::vector<double> w(electrodes.size(), width);
  ContactParams c = uniform_contact(variant, electrodes, net, w);
  for (std::size_t k = 0; k < c.theta.size(); ++k) c.theta[k] *= 1.0 + 0.1 * std::sin(3.0 * k + 1.0);
  return variant == ContactVariant::ph ? clamp_ph(c) : c;
}

inline DomainConductivity wavy_kappa(const TriMesh& mesh, double sigma = 0.02) {
  Eigen::VectorXd k(mesh.num_nodes());
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const Vec2& p = mesh.nodes[i];
    k[i] = std::log(sigma) + 0.3 * std::sin(10 * p.x()) * std::cos(7 * p.y());
  }
  return DomainConductivity::nodal(k);
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("eit-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace eit::test

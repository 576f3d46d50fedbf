#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "eit/contact.hpp"
#include "eit/fem.hpp"
#include "eit/mesh.hpp"
#include "eit/priors.hpp"
#include "eit/reconstruction.hpp"

namespace eit {

/// Homogeneous inclusion, a disk or a counterclockwise polygon.
struct Inclusion {
  enum class Shape { disk, polygon };
  Shape shape = Shape::disk;
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  std::vector<Vec2> vertices;
  double sigma = 1.0;  // S/m

  bool contains(const Vec2& p) const;
};

/// Piecewise-constant conductivity; later inclusions win where they overlap.
struct Phantom {
  double background = 0.02;
  std::vector<Inclusion> inclusions;

  double sigma_at(const Vec2& p) const;
  /// Nodal log-conductivity on a mesh.
  Eigen::VectorXd log_sigma(const TriMesh& mesh) const;
  /// Insulating and conducting disk on a 0.02 S/m background, scaled to `radius`.
  static Phantom two_inclusions(double radius);
};

/// Tank geometry: a disk of the given circumference.
struct TankGeometry {
  double circumference = 1.06;  // m
  int electrodes = 16;
  double electrode_width = 0.02;  // m
  double radius() const;
  /// Equal electrodes, the first centered half a pitch after the arclength origin.
  std::vector<Interval> electrode_intervals() const;
};

/// Reconstruction-scale disk mesh for the tank (about 2.7k nodes).
TriMesh tank_mesh(const TankGeometry& tank);

struct Scenario {
  std::vector<Interval> true_intervals;
  double extension = 0.0;  // m
  std::uint64_t seed = 0;
  double noise_std = 0.0;  // V
  double amplitude = 1e-3;  // A
  double contact_net = 0.03;  // true net contact conductance per electrode, S
  Phantom phantom;
};

struct ExtensionDraw {
  std::vector<Interval> intervals;
  std::vector<double> alpha;
};

/// E_m = [a_m - alpha_m ext, b_m + (1 - alpha_m) ext] with alpha_m ~ U(0, 1)
/// drawn from a seeded 64-bit Mersenne twister.
ExtensionDraw randomize_extensions(const std::vector<Interval>& true_intervals, double extension,
                                   std::uint64_t seed, double perimeter);

struct TruthRecord {
  std::vector<Interval> true_intervals;
  std::vector<Interval> extended_intervals;
  std::vector<double> alpha;
  double extension = 0.0;
  std::uint64_t seed = 0;
  double noise_std = 0.0;
  double amplitude = 0.0;
  double contact_net = 0.0;
  double background_sigma = 0.0;
  int fine_nodes = 0;
  std::uint64_t fine_mesh_fingerprint = 0;
};

struct SynthData {
  Eigen::VectorXd data;   // noisy
  Eigen::VectorXd clean;  // noiseless
  TruthRecord truth;
  std::shared_ptr<const TriMesh> fine_mesh;
};

/// Forward data on `mesh` refined `fine_levels` times, with CEM contacts of net
/// conductance `contact_net` confined to the true electrodes, plus i.i.d.
/// Gaussian noise.
SynthData synth_data(const Scenario& scenario, const TriMesh& mesh, int fine_levels = 1);

/// Throws if the reconstruction problem uses the data-generating mesh.
void assert_distinct_meshes(const SynthData& synth, const TikhonovProblem& problem);

double residual_norm(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Mean |s_m - s_hat_m| over electrodes, in meters.
double center_error(const ContactSummary& summary, const std::vector<Interval>& true_intervals);

struct ConductanceStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
};
ConductanceStats conductance_stats(const ContactSummary& summary);

/// CEM electrodes of the true width centered in each extended electrode.
std::vector<Interval> midpoint_placement(const std::vector<Interval>& extended,
                                         const std::vector<double>& widths);

/// One reconstruction in the standard setup: homogeneous start at
/// `init_sigma`, every contact at net conductance `init_net`, PH hats centered
/// with physical width `ph_width` (true width when unset).
struct ReconstructionRequest {
  std::vector<Interval> intervals;  // extended electrodes
  std::vector<double> true_widths;  // |e_m|, m
  ContactVariant variant = ContactVariant::cem;
  DomainConductivity::Mode kappa_mode = DomainConductivity::Mode::nodal;
  PriorSpec prior;
  double amplitude = 1e-3;
  bool cem_midpoint = false;  // CEM electrodes of true width centered in E_m
  double init_sigma = 0.02;
  double init_net = 1e-3;
  std::optional<double> ph_width;
  RunOptions options;
};

struct ReconstructionResult {
  TikhonovProblem problem;
  GNState state;
  DomainConductivity kappa;
  ContactParams contact;
  ContactSummary summary;
};

ReconstructionResult reconstruct(std::shared_ptr<const TriMesh> mesh, const Eigen::VectorXd& data,
                                 const ReconstructionRequest& request);

/// Area-weighted mean of exp(kappa).
double mean_conductivity(const TriMesh& mesh, const DomainConductivity& kappa);

void write_truth(const std::filesystem::path& path, const TruthRecord& truth);
TruthRecord read_truth(const std::filesystem::path& path);

}  // namespace eit

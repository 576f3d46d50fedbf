#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "eit/contact.hpp"
#include "eit/mesh.hpp"

namespace eit {

/// Log-conductivity kappa = log(sigma), either one value for the whole domain
/// or one value per mesh node (interpolated linearly, then exponentiated).
struct DomainConductivity {
  enum class Mode { scalar, nodal };
  Mode mode = Mode::scalar;
  Eigen::VectorXd kappa = Eigen::VectorXd::Zero(1);

  static DomainConductivity scalar(double kappa);
  static DomainConductivity nodal(Eigen::VectorXd kappa);

  int size() const { return static_cast<int>(kappa.size()); }
  double at(int node) const { return mode == Mode::scalar ? kappa[0] : kappa[node]; }
  std::uint64_t fingerprint() const;
};

/// Current basis I^(i) = c (e_1 - e_{i+1}), i = 1..M-1.
struct CurrentPatternSet {
  int electrodes = 0;
  double amplitude = 1e-3;

  int count() const { return electrodes - 1; }
  /// M x (M-1) matrix whose columns are the patterns.
  Eigen::MatrixXd patterns() const;
};

/// Orthonormal basis of the zero-mean subspace of R^M (Helmert contrasts).
Eigen::MatrixXd zero_mean_basis(int electrodes);

/// Grounded system in the unknowns (u, c) with U = Q c, Q = zero_mean_basis(M).
/// The matrix is symmetric positive definite for admissible contacts.
struct GroundedSystem {
  Eigen::SparseMatrix<double> matrix;  // (N + M - 1) square, full storage
  Eigen::MatrixXd ground;              // Q
  int num_nodes = 0;
  int num_electrodes = 0;
  std::uint64_t mesh_fingerprint = 0;
  std::uint64_t kappa_fingerprint = 0;
  std::uint64_t contact_fingerprint = 0;
};

std::uint64_t contact_fingerprint(const ContactParams& contact,
                                  std::span<const ExtendedElectrode> electrodes);

GroundedSystem assemble(const TriMesh& mesh, std::span<const ExtendedElectrode> electrodes,
                        const DomainConductivity& kappa, const ContactParams& contact);

/// Element stiffness factor: integral of sigma over triangle t with the
/// three-point edge-midpoint rule, and its derivative with respect to the
/// nodal log-conductivity of each vertex.
struct TriangleSigma {
  double integral = 0.0;
  std::array<double, 3> d_kappa{};
};
TriangleSigma triangle_sigma(const TriMesh& mesh, const DomainConductivity& kappa, int t);

/// Gradients of the three vertex basis functions of triangle t.
std::array<Vec2, 3> basis_gradients(const TriMesh& mesh, int t);

struct ForwardSolution {
  Eigen::MatrixXd u;  // N x (M-1) nodal potentials, one column per pattern
  Eigen::MatrixXd U;  // M x (M-1) electrode potentials, zero mean per column
  CurrentPatternSet currents;
  std::shared_ptr<const GroundedSystem> system;
  std::shared_ptr<const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> factor;

  /// Solves the grounded system for an arbitrary zero-sum current vector.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_pattern(const Eigen::VectorXd& current) const;
};

ForwardSolution solve(std::shared_ptr<const GroundedSystem> system, const CurrentPatternSet& currents);

/// Concatenated electrode potentials, row (i, m) -> i * M + m (0-based).
Eigen::VectorXd measurements(const ForwardSolution& solution);

/// Counters of factorizations and back-substitutions performed by `solve`.
struct SolverStats {
  std::uint64_t factorizations = 0;
  std::uint64_t back_substitutions = 0;
};
SolverStats solver_stats();

/// Mesh, electrodes, contact variant and currents bundled for repeated
/// forward evaluations at different (kappa, theta).
struct ForwardModel {
  std::shared_ptr<const TriMesh> mesh;
  std::vector<ExtendedElectrode> electrodes;
  ContactVariant variant = ContactVariant::cem;
  CurrentPatternSet currents;

  int num_measurements() const { return currents.electrodes * currents.count(); }
  ForwardSolution forward(const DomainConductivity& kappa, const ContactParams& contact) const;
};

}  // namespace eit

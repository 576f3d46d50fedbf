#include "eit/fem.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "eit/error.hpp"
#include "eit/hash.hpp"
#include "eit/parallel.hpp"

namespace eit {

namespace {

std::atomic<std::uint64_t> g_factorizations{0};
std::atomic<std::uint64_t> g_back_substitutions{0};

}  // namespace

std::uint64_t contact_fingerprint(const ContactParams& contact,
                                  std::span<const ExtendedElectrode> electrodes) {
  Hasher h;
  h.add(static_cast<int>(contact.variant));
  h.add(std::span<const double>(contact.theta));
  for (const auto& e : electrodes) h.add(e.first_position).add(e.last_position);
  return h.digest();
}

DomainConductivity DomainConductivity::scalar(double kappa) {
  DomainConductivity d;
  d.mode = Mode::scalar;
  d.kappa = Eigen::VectorXd::Constant(1, kappa);
  return d;
}

DomainConductivity DomainConductivity::nodal(Eigen::VectorXd kappa) {
  DomainConductivity d;
  d.mode = Mode::nodal;
  d.kappa = std::move(kappa);
  return d;
}

std::uint64_t DomainConductivity::fingerprint() const {
  Hasher h;
  h.add(static_cast<int>(mode));
  h.add(std::span<const double>(kappa.data(), static_cast<std::size_t>(kappa.size())));
  return h.digest();
}

Eigen::MatrixXd CurrentPatternSet::patterns() const {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(electrodes, count());
  for (int i = 0; i < count(); ++i) {
    p(0, i) = amplitude;
    p(i + 1, i) = -amplitude;
  }
  return p;
}

Eigen::MatrixXd zero_mean_basis(int electrodes) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(electrodes, electrodes - 1);
  for (int k = 1; k < electrodes; ++k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    for (int i = 0; i < k; ++i) q(i, k - 1) = scale;
    q(k, k - 1) = -k * scale;
  }
  return q;
}

std::array<Vec2, 3> basis_gradients(const TriMesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  const Vec2& p0 = mesh.nodes[tri[0]];
  const Vec2& p1 = mesh.nodes[tri[1]];
  const Vec2& p2 = mesh.nodes[tri[2]];
  const double twice_area = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
  auto grad = [&](const Vec2& a, const Vec2& b) -> Vec2 {
    // Gradient of the basis function of the vertex opposite edge a->b.
    return Vec2(a.y() - b.y(), b.x() - a.x()) / twice_area;
  };
  return {grad(p1, p2), grad(p2, p0), grad(p0, p1)};
}

TriangleSigma triangle_sigma(const TriMesh& mesh, const DomainConductivity& kappa, int t) {
  const auto& tri = mesh.triangles[t];
  const double third = mesh.triangle_area(t) / 3.0;
  TriangleSigma out;
  if (kappa.mode == DomainConductivity::Mode::scalar) {
    out.integral = 3.0 * third * std::exp(kappa.kappa[0]);
    return out;
  }
  const double k0 = kappa.kappa[tri[0]];
  const double k1 = kappa.kappa[tri[1]];
  const double k2 = kappa.kappa[tri[2]];
  const double s01 = std::exp(0.5 * (k0 + k1));
  const double s12 = std::exp(0.5 * (k1 + k2));
  const double s20 = std::exp(0.5 * (k2 + k0));
  out.integral = third * (s01 + s12 + s20);
  out.d_kappa = {0.5 * third * (s01 + s20), 0.5 * third * (s01 + s12), 0.5 * third * (s12 + s20)};
  return out;
}

GroundedSystem assemble(const TriMesh& mesh, std::span<const ExtendedElectrode> electrodes,
                        const DomainConductivity& kappa, const ContactParams& contact) {
  const int n = mesh.num_nodes();
  const int m_count = static_cast<int>(electrodes.size());
  if (m_count < 2) throw InputError("at least two electrodes are required");
  if (kappa.mode == DomainConductivity::Mode::nodal && kappa.size() != n) {
    throw InputError("nodal log-conductivity has " + std::to_string(kappa.size()) +
                     " values for a mesh with " + std::to_string(n) + " nodes");
  }
  for (double th : contact.theta) {
    if (!std::isfinite(th)) throw NumericalError("non-finite contact parameter");
  }

  GroundedSystem sys;
  sys.num_nodes = n;
  sys.num_electrodes = m_count;
  sys.ground = zero_mean_basis(m_count);
  sys.mesh_fingerprint = mesh.fingerprint;
  sys.kappa_fingerprint = kappa.fingerprint();
  sys.contact_fingerprint = contact_fingerprint(contact, electrodes);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(9 * mesh.triangles.size() + 8 * mesh.num_boundary());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto grads = basis_gradients(mesh, t);
    const double s = triangle_sigma(mesh, kappa, t).integral;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) triplets.emplace_back(tri[a], tri[b], s * grads[a].dot(grads[b]));
    }
  }

  const auto edges = edge_zeta_integrals(contact, mesh, electrodes);
  Eigen::VectorXd electrode_mass = Eigen::VectorXd::Zero(m_count);
  // Coupling A_uU(i, m) = -int zeta phi_i over E_m; each node touches one electrode.
  std::vector<std::pair<int, double>> coupling(n, {-1, 0.0});
  for (int m = 0; m < m_count; ++m) {
    const auto& e = electrodes[m];
    for (int p = e.first_position; p < e.last_position; ++p) {
      const auto& ei = edges[p];
      auto [i, j] = mesh.boundary_edge(p);
      triplets.emplace_back(i, i, ei.aa);
      triplets.emplace_back(i, j, ei.ab);
      triplets.emplace_back(j, i, ei.ab);
      triplets.emplace_back(j, j, ei.bb);
      coupling[i] = {m, coupling[i].second - ei.a};
      coupling[j] = {m, coupling[j].second - ei.b};
      electrode_mass[m] += ei.total;
    }
    if (!(electrode_mass[m] > 0.0)) {
      throw NumericalError("electrode " + std::to_string(m + 1) + " has zero contact");
    }
  }

  const Eigen::MatrixXd& q = sys.ground;
  for (int i = 0; i < n; ++i) {
    const auto [m, value] = coupling[i];
    if (m < 0 || value == 0.0) continue;
    for (int c = 0; c < m_count - 1; ++c) {
      const double entry = value * q(m, c);
      if (entry == 0.0) continue;
      triplets.emplace_back(i, n + c, entry);
      triplets.emplace_back(n + c, i, entry);
    }
  }
  const Eigen::MatrixXd electrode_block = q.transpose() * electrode_mass.asDiagonal() * q;
  for (int r = 0; r < m_count - 1; ++r) {
    for (int c = 0; c < m_count - 1; ++c) triplets.emplace_back(n + r, n + c, electrode_block(r, c));
  }

  const int size = n + m_count - 1;
  sys.matrix.resize(size, size);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.matrix.makeCompressed();
  return sys;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> ForwardSolution::solve_pattern(
    const Eigen::VectorXd& current) const {
  const int n = system->num_nodes;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(system->matrix.rows());
  rhs.tail(system->num_electrodes - 1) = system->ground.transpose() * current;
  const Eigen::VectorXd x = factor->solve(rhs);
  ++g_back_substitutions;
  return {x.head(n), system->ground * x.tail(system->num_electrodes - 1)};
}

ForwardSolution solve(std::shared_ptr<const GroundedSystem> system,
                      const CurrentPatternSet& currents) {
  if (currents.electrodes != system->num_electrodes) {
    throw InputError("current patterns are for " + std::to_string(currents.electrodes) +
                     " electrodes, system has " + std::to_string(system->num_electrodes));
  }
  auto factor = std::make_shared<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>(system->matrix);
  ++g_factorizations;
  if (factor->info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "factorization of the grounded system failed (size " << system->matrix.rows()
        << ", min diagonal " << system->matrix.diagonal().minCoeff() << ")";
    throw NumericalError(msg.str());
  }

  ForwardSolution sol;
  sol.currents = currents;
  sol.system = std::move(system);
  sol.factor = std::move(factor);
  const int patterns = currents.count();
  sol.u.resize(sol.system->num_nodes, patterns);
  sol.U.resize(currents.electrodes, patterns);
  const Eigen::MatrixXd p = currents.patterns();
  parallel_for(patterns, [&](int i) {
    auto [u, U] = sol.solve_pattern(p.col(i));
    sol.u.col(i) = u;
    sol.U.col(i) = U;
  });
  return sol;
}

Eigen::VectorXd measurements(const ForwardSolution& solution) {
  const auto& U = solution.U;
  return Eigen::Map<const Eigen::VectorXd>(U.data(), U.size());
}

SolverStats solver_stats() {
  return {g_factorizations.load(), g_back_substitutions.load()};
}

ForwardSolution ForwardModel::forward(const DomainConductivity& kappa,
                                      const ContactParams& contact) const {
  if (contact.variant != variant) throw InputError("contact variant does not match the model");
  auto system = std::make_shared<const GroundedSystem>(assemble(*mesh, electrodes, kappa, contact));
  return solve(std::move(system), currents);
}

}  // namespace eit

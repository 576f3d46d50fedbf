#include "eit/sensitivity.hpp"

#include <cmath>

#include <Eigen/LU>

#include "eit/error.hpp"
#include "eit/parallel.hpp"

namespace eit {

Eigen::MatrixXd Jacobian::stacked() const {
  Eigen::MatrixXd j(kappa.rows(), kappa.cols() + theta.cols());
  j << kappa, theta;
  return j;
}

std::vector<Eigen::MatrixXd> kappa_bilinear_forms(const ForwardSolution& solution,
                                                  const TriMesh& mesh,
                                                  const DomainConductivity& kappa) {
  if (solution.system->mesh_fingerprint != mesh.fingerprint ||
      solution.system->kappa_fingerprint != kappa.fingerprint()) {
    throw InputError("forward solution was not computed for this mesh and log-conductivity");
  }
  const int patterns = solution.currents.count();
  std::vector<Eigen::MatrixXd> forms(kappa.size(), Eigen::MatrixXd::Zero(patterns, patterns));
  Eigen::MatrixXd grad(2, patterns);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto g = basis_gradients(mesh, t);
    for (int i = 0; i < patterns; ++i) {
      grad.col(i) = g[0] * solution.u(tri[0], i) + g[1] * solution.u(tri[1], i) +
                    g[2] * solution.u(tri[2], i);
    }
    const Eigen::MatrixXd gram = grad.transpose() * grad;
    const TriangleSigma sigma = triangle_sigma(mesh, kappa, t);
    if (kappa.mode == DomainConductivity::Mode::scalar) {
      forms[0].noalias() -= sigma.integral * gram;
    } else {
      for (int a = 0; a < 3; ++a) forms[tri[a]].noalias() -= sigma.d_kappa[a] * gram;
    }
  }
  return forms;
}

std::vector<Eigen::MatrixXd> contact_bilinear_forms(const ForwardSolution& solution,
                                                    const TriMesh& mesh,
                                                    std::span<const ExtendedElectrode> electrodes,
                                                    const ContactParams& contact) {
  const int params = contact_param_count(contact.variant, electrodes);
  if (static_cast<int>(contact.theta.size()) != params) {
    throw InputError("contact parameter count mismatch: expected " + std::to_string(params) +
                     ", got " + std::to_string(contact.theta.size()));
  }
  if (solution.system->mesh_fingerprint != mesh.fingerprint ||
      solution.system->contact_fingerprint != contact_fingerprint(contact, electrodes)) {
    throw InputError("forward solution was not computed for this mesh and contact");
  }
  const int patterns = solution.currents.count();
  std::vector<Eigen::MatrixXd> forms(params, Eigen::MatrixXd::Zero(patterns, patterns));
  parallel_for(params, [&](int k) {
    const int m = contact_param_electrode(contact.variant, electrodes, k);
    const auto& e = electrodes[m];
    const PiecewiseLinear density = dzeta_dtheta(contact, electrodes, k);
    Eigen::VectorXd ga(patterns), gb(patterns);
    Eigen::MatrixXd& form = forms[k];
    for (int i = 0; i < e.num_edges(); ++i) {
      const EdgeIntegrals w = integrate_on_edge(density, e.node_t[i], e.node_t[i + 1], e.length());
      if (w.aa == 0.0 && w.ab == 0.0 && w.bb == 0.0) continue;
      const int na = e.node_ids[i];
      const int nb = e.node_ids[i + 1];
      ga = solution.U.row(m) - solution.u.row(na);
      gb = solution.U.row(m) - solution.u.row(nb);
      form.noalias() -= w.aa * ga * ga.transpose();
      form.noalias() -= w.ab * (ga * gb.transpose() + gb * ga.transpose());
      form.noalias() -= w.bb * gb * gb.transpose();
    }
  });
  return forms;
}

Eigen::MatrixXd columns_from_bilinear(const std::vector<Eigen::MatrixXd>& forms,
                                      const CurrentPatternSet& currents) {
  const int m_count = currents.electrodes;
  const Eigen::MatrixXd q = zero_mean_basis(m_count);
  // U' = Q a with (P^T Q) a = b: the Gram system of the current basis on the
  // zero-mean subspace.
  const Eigen::MatrixXd gram = currents.patterns().transpose() * q;
  const Eigen::MatrixXd lift = q * gram.partialPivLu().inverse();
  Eigen::MatrixXd columns(m_count * currents.count(), static_cast<Eigen::Index>(forms.size()));
  for (std::size_t k = 0; k < forms.size(); ++k) {
    const Eigen::MatrixXd derivative = lift * forms[k].transpose();
    columns.col(static_cast<Eigen::Index>(k)) =
        Eigen::Map<const Eigen::VectorXd>(derivative.data(), derivative.size());
  }
  return columns;
}

Eigen::MatrixXd jacobian_kappa(const ForwardSolution& solution, const TriMesh& mesh,
                               const DomainConductivity& kappa) {
  return columns_from_bilinear(kappa_bilinear_forms(solution, mesh, kappa), solution.currents);
}

Eigen::MatrixXd jacobian_contact(const ForwardSolution& solution, const TriMesh& mesh,
                                 std::span<const ExtendedElectrode> electrodes,
                                 const ContactParams& contact) {
  return columns_from_bilinear(contact_bilinear_forms(solution, mesh, electrodes, contact),
                               solution.currents);
}

Eigen::VectorXd fd_oracle(const VectorMap& f, const Eigen::VectorXd& x0, int k, double step) {
  if (!(step > 0.0)) throw InputError("finite-difference step must be positive");
  if (k < 0 || k >= x0.size()) throw InputError("finite-difference index out of range");
  Eigen::VectorXd plus = x0;
  Eigen::VectorXd minus = x0;
  plus[k] += step;
  minus[k] -= step;
  return (f(plus) - f(minus)) / (2.0 * step);
}

double fd_step(double value) { return 1e-6 * std::max(1.0, std::abs(value)); }

Eigen::VectorXd relative_column_errors(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
  if (analytic.rows() != fd.rows() || analytic.cols() != fd.cols()) {
    throw InputError("Jacobian shapes differ");
  }
  Eigen::VectorXd err(analytic.cols());
  for (Eigen::Index k = 0; k < analytic.cols(); ++k) {
    const double diff = (analytic.col(k) - fd.col(k)).norm();
    const double scale = fd.col(k).norm();
    err[k] = diff == 0.0 ? 0.0 : diff / (scale > 0.0 ? scale : analytic.col(k).norm());
  }
  return err;
}

JacobianCheck check_jacobian(const ForwardModel& model, const DomainConductivity& kappa,
                             const ContactParams& contact, int kappa_stride) {
  if (kappa_stride < 1) throw InputError("kappa stride must be positive");
  const ForwardSolution solution = model.forward(kappa, contact);
  const Eigen::MatrixXd jk = jacobian_kappa(solution, *model.mesh, kappa);
  const Eigen::MatrixXd jt = jacobian_contact(solution, *model.mesh, model.electrodes, contact);

  JacobianCheck check;
  for (int k = 0; k < kappa.size(); k += kappa_stride) check.kappa_columns.push_back(k);
  const int nk = static_cast<int>(check.kappa_columns.size());
  Eigen::MatrixXd fd_k(jk.rows(), nk), an_k(jk.rows(), nk);
  const VectorMap fk = [&](const Eigen::VectorXd& x) {
    DomainConductivity d = kappa;
    d.kappa = x;
    return measurements(model.forward(d, contact));
  };
  parallel_for(nk, [&](int c) {
    const int k = check.kappa_columns[c];
    fd_k.col(c) = fd_oracle(fk, kappa.kappa, k, fd_step(kappa.kappa[k]));
    an_k.col(c) = jk.col(k);
  });
  check.kappa_errors = relative_column_errors(an_k, fd_k);

  const Eigen::VectorXd theta0 =
      Eigen::Map<const Eigen::VectorXd>(contact.theta.data(), static_cast<Eigen::Index>(contact.theta.size()));
  const VectorMap ft = [&](const Eigen::VectorXd& x) {
    const ContactParams c{contact.variant, std::vector<double>(x.data(), x.data() + x.size())};
    return measurements(model.forward(kappa, c));
  };
  Eigen::MatrixXd fd_t(jt.rows(), jt.cols());
  parallel_for(static_cast<int>(jt.cols()), [&](int k) {
    fd_t.col(k) = fd_oracle(ft, theta0, k, fd_step(theta0[k]));
  });
  check.theta_errors = relative_column_errors(jt, fd_t);
  return check;
}

}  // namespace eit

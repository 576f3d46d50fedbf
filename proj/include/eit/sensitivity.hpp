#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "eit/contact.hpp"
#include "eit/fem.hpp"

namespace eit {

/// Rows follow measurements(): row (i, m) = i * M + m for pattern i, electrode m.
struct Jacobian {
  Eigen::MatrixXd kappa;
  Eigen::MatrixXd theta;

  Eigen::MatrixXd stacked() const;
};

/// B_k(i, j) = U'_k(I^(i)) . I^(j): the adjoint bilinear values of the
/// derivative with respect to parameter k, one (M-1)x(M-1) block per parameter.
std::vector<Eigen::MatrixXd> kappa_bilinear_forms(const ForwardSolution& solution,
                                                  const TriMesh& mesh,
                                                  const DomainConductivity& kappa);
std::vector<Eigen::MatrixXd> contact_bilinear_forms(const ForwardSolution& solution,
                                                    const TriMesh& mesh,
                                                    std::span<const ExtendedElectrode> electrodes,
                                                    const ContactParams& contact);

/// Recovers the zero-mean derivative vectors U'(I^(i)) from their inner products
/// with the current basis and stacks them into one Jacobian column per block.
Eigen::MatrixXd columns_from_bilinear(const std::vector<Eigen::MatrixXd>& forms,
                                      const CurrentPatternSet& currents);

Eigen::MatrixXd jacobian_kappa(const ForwardSolution& solution, const TriMesh& mesh,
                               const DomainConductivity& kappa);
Eigen::MatrixXd jacobian_contact(const ForwardSolution& solution, const TriMesh& mesh,
                                 std::span<const ExtendedElectrode> electrodes,
                                 const ContactParams& contact);

using VectorMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Central difference (f(x + h e_k) - f(x - h e_k)) / (2h).
Eigen::VectorXd fd_oracle(const VectorMap& f, const Eigen::VectorXd& x0, int k, double step);

/// Default relative step 1e-6 * max(1, |x_k|).
double fd_step(double value);

/// ||a - f|| / ||f|| per column (0 when both columns vanish).
Eigen::VectorXd relative_column_errors(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd);

/// Analytic Jacobians against central differences of the full forward map.
struct JacobianCheck {
  std::vector<int> kappa_columns;  // checked kappa indices
  Eigen::VectorXd kappa_errors;
  Eigen::VectorXd theta_errors;
  double kappa_max() const { return kappa_errors.size() ? kappa_errors.maxCoeff() : 0.0; }
  double theta_max() const { return theta_errors.size() ? theta_errors.maxCoeff() : 0.0; }
};

/// Checks every theta column and every `kappa_stride`-th kappa column.
JacobianCheck check_jacobian(const ForwardModel& model, const DomainConductivity& kappa,
                             const ContactParams& contact, int kappa_stride = 1);

}  // namespace eit

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "eit/contact.hpp"
#include "eit/mesh.hpp"

namespace eit {

/// Prior and noise model. With the default unit noise the gammas read as
/// ratios against the noise level. noise_std scales the noise block only.
struct PriorSpec {
  double gamma_kappa = 10.0;
  double lambda_kappa = 0.03;  // m
  double gamma_theta = 500.0;
  double lambda_theta = 3e-3;  // m
  double gamma_h = 1e3;
  double gamma_l = std::pow(10.0, 1.5);
  double gamma_w = 1e2;
  double sigma_mean = 0.02;  // S/m, kappa mean is log(sigma_mean)
  double noise_std = 1.0;

  /// Throws InputError naming the first non-positive field.
  void validate() const;
};

/// Squared-exponential kernel over mesh nodes.
Eigen::MatrixXd cov_kappa(const TriMesh& mesh, double gamma, double lambda);

/// Shorter-arc distance between two arclength positions on a loop.
double boundary_distance(double s, double t, double perimeter);

/// Boundary kernel over the PL parameters (interior electrode nodes),
/// conditioned on zero contact at both endpoints of every electrode.
/// Block diagonal across electrodes.
Eigen::MatrixXd cov_pl(const TriMesh& mesh, std::span<const ExtendedElectrode> electrodes,
                       double gamma, double lambda);

/// diag(gamma_h^2 I, gamma_l^2 I, gamma_w^2 I) in the (h.., l.., w..) order.
Eigen::MatrixXd cov_ph(int electrodes, double gamma_h, double gamma_l, double gamma_w);

/// Prior means of the contact parameters.
std::vector<double> contact_prior_mean(ContactVariant variant,
                                       std::span<const ExtendedElectrode> electrodes,
                                       std::span<const double> true_widths = {});

/// One diagonal block of the whitener. For a covariance G = U U^T with U upper
/// triangular the block is L = U^{-1}, so L^T L = G^{-1}.
class WhitenerBlock {
 public:
  /// Standard deviations only (G diagonal).
  static WhitenerBlock diagonal(Eigen::VectorXd std_devs);
  /// Dense SPD covariance. If it does not factor as given, a diagonal jitter is
  /// escalated from 1e-10 * scale^2 by factors of ten up to 1e-6 * scale^2.
  static WhitenerBlock dense(Eigen::MatrixXd covariance, double scale);

  int size() const;
  bool is_diagonal() const { return !dense_; }
  double jitter() const { return jitter_; }

  /// L x
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// L X, column by column.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  /// U^T X, so that (U^T X)^T (U^T X) = X^T G X.
  Eigen::MatrixXd factor_transpose_times(const Eigen::MatrixXd& x) const;
  /// G x with the covariance actually factored (jitter included).
  Eigen::MatrixXd covariance_times(const Eigen::MatrixXd& x) const;
  /// ||L x||^2 = x^T G^{-1} x
  double quadratic(const Eigen::VectorXd& x) const { return apply(x).squaredNorm(); }
  /// Explicit L (upper triangular); for diagnostics and tests.
  Eigen::MatrixXd matrix() const;
  /// The factored covariance.
  Eigen::MatrixXd covariance() const;

 private:
  bool dense_ = false;
  Eigen::VectorXd std_devs_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd upper_;  // G = U U^T
  double jitter_ = 0.0;
};

/// Block-diagonal whitener for the stacked residual (noise, kappa, theta).
/// Absent blocks are unpenalized and take no rows.
struct StackedWhitener {
  WhitenerBlock noise;
  std::optional<WhitenerBlock> kappa;
  std::optional<WhitenerBlock> theta;

  int rows() const;
};

StackedWhitener build_whitener(int measurements, double noise_std,
                               std::optional<WhitenerBlock> kappa,
                               std::optional<WhitenerBlock> theta);

}  // namespace eit

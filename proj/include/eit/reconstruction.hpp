#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eit/fem.hpp"
#include "eit/priors.hpp"
#include "eit/sensitivity.hpp"

namespace eit {

/// Tikhonov functional
///   F(tau) = ||U(tau) - V||^2_{G_noise^-1} + ||kappa - kappa_mu||^2_{G_kappa^-1}
///          + ||theta - theta_mu||^2_{G_theta^-1},
/// with tau = (kappa, theta) stacked in that order. A block without a whitener
/// is unpenalized.
struct TikhonovProblem {
  ForwardModel model;
  DomainConductivity::Mode kappa_mode = DomainConductivity::Mode::nodal;
  Eigen::VectorXd data;
  StackedWhitener whitener;
  Eigen::VectorXd kappa_mean;
  Eigen::VectorXd theta_mean;

  int kappa_size() const;
  int theta_size() const;
  int size() const { return kappa_size() + theta_size(); }

  Eigen::VectorXd stack(const DomainConductivity& kappa, const ContactParams& contact) const;
  DomainConductivity kappa_of(const Eigen::VectorXd& tau) const;
  ContactParams contact_of(const Eigen::VectorXd& tau) const;
  /// Projects onto the parameter domain (PH clamp; identity otherwise).
  Eigen::VectorXd project(const Eigen::VectorXd& tau) const;
};

/// Builds a problem with the standard priors: smoothness prior on nodal kappa
/// (omitted for scalar kappa), conditioned boundary prior for PL, diagonal
/// prior for PH and no contact prior for CEM. `true_widths` (|e_m|) set the
/// PH width mean.
TikhonovProblem make_problem(ForwardModel model, Eigen::VectorXd data, const PriorSpec& prior,
                             DomainConductivity::Mode kappa_mode,
                             std::span<const double> true_widths = {});

struct ObjectiveTerms {
  double data = 0.0;
  double kappa = 0.0;
  std::optional<double> theta;  // absent when theta is unpenalized

  double total() const { return data + kappa + theta.value_or(0.0); }
};

/// Objective and the forward solution it was computed from.
struct Evaluation {
  Eigen::VectorXd tau;
  ObjectiveTerms terms;
  Eigen::VectorXd residual;  // U(tau) - V
  ForwardSolution solution;
};

/// Evaluates F at project(tau).
Evaluation evaluate(const TikhonovProblem& problem, const Eigen::VectorXd& tau);
ObjectiveTerms objective(const TikhonovProblem& problem, const Eigen::VectorXd& tau);

/// Full Jacobian [dU/dkappa, dU/dtheta] at an evaluated point.
Eigen::MatrixXd jacobian(const TikhonovProblem& problem, const Evaluation& at);

/// Gauss-Newton direction: the minimizer over d of
///   ||W_n (r + J d)||^2 + sum over penalized blocks ||W_p (tau_p - mu_p + d_p)||^2.
/// Solved in measurement space: with K = G_noise + J_p G_p J_p^T the penalized
/// part is d_p = -(tau_p - mu_p) - G_p J_p^T K^{-1}(s + J_f d_f), s = r - J_p (tau_p - mu_p),
/// and the unpenalized part d_f is the K^{-1}-weighted least-squares solution.
Eigen::VectorXd gn_direction(const TikhonovProblem& problem, const Eigen::VectorXd& tau,
                             const Eigen::VectorXd& residual, const Eigen::MatrixXd& jac);

/// F'(tau) d = 2 [(W_n r).(W_n J d) + sum_p (W_p delta_p).(W_p d_p)]
double directional_derivative(const TikhonovProblem& problem, const Eigen::VectorXd& tau,
                              const Eigen::VectorXd& residual, const Eigen::MatrixXd& jac,
                              const Eigen::VectorXd& d);

struct LineSearchOptions {
  double c1 = 1e-4;
  int max_halvings = 30;
  bool wolfe = false;  // additionally enforce the curvature condition
  double c2 = 0.9;
};

struct LineSearchResult {
  bool accepted = false;
  double step = 0.0;
  int evaluations = 0;
  std::optional<Evaluation> point;
};

/// Backtracking from t = 1 by halving until
///   F(project(tau + t d)) <= F(tau) + c1 t F'(tau) d.
LineSearchResult line_search(const TikhonovProblem& problem, const Evaluation& current,
                             double slope, const Eigen::VectorXd& d,
                             const LineSearchOptions& options = {});

struct RunOptions {
  int max_iter = 50;
  double tol = 1e-8;
  int stall_iterations = 3;
  LineSearchOptions line_search;
  /// Receives one JSON object per accepted iteration.
  std::function<void(const std::string&)> log;
};

struct IterationRecord {
  int iteration = 0;
  ObjectiveTerms terms;
  double step = 0.0;
  double direction_norm = 0.0;
};

struct GNState {
  Eigen::VectorXd tau;
  ObjectiveTerms terms;
  Eigen::VectorXd residual;
  int iteration = 0;
  double last_step = 0.0;
  double last_direction_norm = 0.0;
  bool converged = false;
  std::string reason;
  std::vector<IterationRecord> history;  // entry 0 is the start point
};

std::string to_json_line(const IterationRecord& record);

GNState run(const TikhonovProblem& problem, const Eigen::VectorXd& tau0,
            const RunOptions& options = {});

struct ScalarFit {
  double kappa = 0.0;
  double sigma = 0.0;
  ContactParams contact;
  double residual = 0.0;  // ||U - V||_2
  GNState state;
};

/// Scalar log-conductivity fit without a kappa penalty; the contact prior of
/// the problem is kept. `problem` must be in scalar mode.
ScalarFit scalar_fit(const TikhonovProblem& problem, double kappa0, const ContactParams& contact0,
                     const RunOptions& options = {});

}  // namespace eit

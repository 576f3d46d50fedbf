#include "eit/reconstruction.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "eit/error.hpp"

namespace eit {

namespace {

struct Block {
  int offset;
  int size;
  const WhitenerBlock* whitener;  // null when unpenalized
  const Eigen::VectorXd* mean;
};

std::vector<Block> blocks(const TikhonovProblem& p) {
  return {{0, p.kappa_size(), p.whitener.kappa ? &*p.whitener.kappa : nullptr, &p.kappa_mean},
          {p.kappa_size(), p.theta_size(), p.whitener.theta ? &*p.whitener.theta : nullptr,
           &p.theta_mean}};
}

void check_problem(const TikhonovProblem& p) {
  if (p.data.size() != p.model.num_measurements()) {
    throw InputError("data has " + std::to_string(p.data.size()) + " entries, model produces " +
                     std::to_string(p.model.num_measurements()));
  }
  if (p.whitener.noise.size() != p.data.size()) throw InputError("noise whitener size mismatch");
  for (const Block& b : blocks(p)) {
    if (b.whitener && b.whitener->size() != b.size) throw InputError("prior whitener size mismatch");
    if (b.whitener && b.mean->size() != b.size) throw InputError("prior mean size mismatch");
  }
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int TikhonovProblem::kappa_size() const {
  return kappa_mode == DomainConductivity::Mode::scalar ? 1 : model.mesh->num_nodes();
}

int TikhonovProblem::theta_size() const {
  return contact_param_count(model.variant, model.electrodes);
}

Eigen::VectorXd TikhonovProblem::stack(const DomainConductivity& kappa,
                                       const ContactParams& contact) const {
  if (kappa.mode != kappa_mode || kappa.size() != kappa_size()) {
    throw InputError("log-conductivity does not match the problem parametrization");
  }
  if (contact.variant != model.variant || static_cast<int>(contact.theta.size()) != theta_size()) {
    throw InputError("contact parameters do not match the problem parametrization");
  }
  Eigen::VectorXd tau(size());
  tau.head(kappa_size()) = kappa.kappa;
  tau.tail(theta_size()) = Eigen::Map<const Eigen::VectorXd>(contact.theta.data(), theta_size());
  return tau;
}

DomainConductivity TikhonovProblem::kappa_of(const Eigen::VectorXd& tau) const {
  if (kappa_mode == DomainConductivity::Mode::scalar) return DomainConductivity::scalar(tau[0]);
  return DomainConductivity::nodal(tau.head(kappa_size()));
}

ContactParams TikhonovProblem::contact_of(const Eigen::VectorXd& tau) const {
  const Eigen::VectorXd theta = tau.tail(theta_size());
  return {model.variant, std::vector<double>(theta.data(), theta.data() + theta.size())};
}

Eigen::VectorXd TikhonovProblem::project(const Eigen::VectorXd& tau) const {
  if (model.variant != ContactVariant::ph) return tau;
  Eigen::VectorXd out = tau;
  const ContactParams clamped = clamp_ph(contact_of(tau));
  out.tail(theta_size()) = Eigen::Map<const Eigen::VectorXd>(clamped.theta.data(), theta_size());
  return out;
}

TikhonovProblem make_problem(ForwardModel model, Eigen::VectorXd data, const PriorSpec& prior,
                             DomainConductivity::Mode kappa_mode,
                             std::span<const double> true_widths) {
  prior.validate();
  TikhonovProblem p;
  p.model = std::move(model);
  p.kappa_mode = kappa_mode;
  p.data = std::move(data);
  const auto& mesh = *p.model.mesh;
  const auto& electrodes = p.model.electrodes;

  std::optional<WhitenerBlock> kappa_block;
  p.kappa_mean = Eigen::VectorXd::Constant(p.kappa_size(), std::log(prior.sigma_mean));
  if (kappa_mode == DomainConductivity::Mode::nodal) {
    kappa_block = WhitenerBlock::dense(cov_kappa(mesh, prior.gamma_kappa, prior.lambda_kappa),
                                       prior.gamma_kappa);
  }

  std::optional<WhitenerBlock> theta_block;
  switch (p.model.variant) {
    case ContactVariant::cem:
      break;
    case ContactVariant::pl:
      theta_block = WhitenerBlock::dense(
          cov_pl(mesh, electrodes, prior.gamma_theta, prior.lambda_theta), prior.gamma_theta);
      break;
    case ContactVariant::ph:
      theta_block = WhitenerBlock::diagonal(
          cov_ph(static_cast<int>(electrodes.size()), prior.gamma_h, prior.gamma_l, prior.gamma_w)
              .diagonal()
              .cwiseSqrt());
      break;
  }
  const std::vector<double> theta_mean = contact_prior_mean(p.model.variant, electrodes, true_widths);
  p.theta_mean = Eigen::Map<const Eigen::VectorXd>(theta_mean.data(), theta_mean.size());
  p.whitener = build_whitener(p.model.num_measurements(), prior.noise_std, std::move(kappa_block),
                              std::move(theta_block));
  check_problem(p);
  return p;
}

Evaluation evaluate(const TikhonovProblem& problem, const Eigen::VectorXd& tau) {
  check_problem(problem);
  if (tau.size() != problem.size()) throw InputError("parameter vector size mismatch");
  Evaluation ev{problem.project(tau), {}, {}, {}};
  ev.solution = problem.model.forward(problem.kappa_of(ev.tau), problem.contact_of(ev.tau));
  ev.residual = measurements(ev.solution) - problem.data;
  ev.terms.data = problem.whitener.noise.quadratic(ev.residual);
  const auto bs = blocks(problem);
  if (bs[0].whitener) {
    ev.terms.kappa = bs[0].whitener->quadratic(ev.tau.head(bs[0].size) - *bs[0].mean);
  }
  if (bs[1].whitener) {
    ev.terms.theta = bs[1].whitener->quadratic(ev.tau.tail(bs[1].size) - *bs[1].mean);
  }
  return ev;
}

ObjectiveTerms objective(const TikhonovProblem& problem, const Eigen::VectorXd& tau) {
  return evaluate(problem, tau).terms;
}

Eigen::MatrixXd jacobian(const TikhonovProblem& problem, const Evaluation& at) {
  const auto& mesh = *problem.model.mesh;
  Jacobian j;
  j.kappa = jacobian_kappa(at.solution, mesh, problem.kappa_of(at.tau));
  j.theta = jacobian_contact(at.solution, mesh, problem.model.electrodes, problem.contact_of(at.tau));
  return j.stacked();
}

Eigen::VectorXd gn_direction(const TikhonovProblem& problem, const Eigen::VectorXd& tau,
                             const Eigen::VectorXd& residual, const Eigen::MatrixXd& jac) {
  check_problem(problem);
  const int n = static_cast<int>(residual.size());
  if (jac.rows() != n || jac.cols() != problem.size() || tau.size() != problem.size()) {
    throw InputError("Gauss-Newton inputs have inconsistent sizes");
  }
  const auto bs = blocks(problem);

  // K = Gn + sum_b J_b G_b J_b^T is never formed. With Ln the noise whitener
  // and A_b = Ln J_b U_b, K = Ln^{-1} (I + sum_b A_b A_b^T) Ln^{-T}, and the
  // middle factor is R^T R for the QR of [A_1^T; A_2^T; ...; I]. This keeps
  // the conditioning of J rather than squaring it.
  const auto& noise = problem.whitener.noise;
  Eigen::VectorXd s = residual;
  std::vector<Eigen::MatrixXd> gjt(bs.size());
  std::vector<Eigen::MatrixXd> at;
  Eigen::Index stacked_rows = n;
  int free_count = 0;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    const Block& b = bs[i];
    if (b.size == 0) continue;
    const auto jb = jac.middleCols(b.offset, b.size);
    if (!b.whitener) {
      free_count += b.size;
      continue;
    }
    gjt[i] = b.whitener->covariance_times(jb.transpose());
    const Eigen::MatrixXd lj = noise.apply(Eigen::MatrixXd(jb));
    at.push_back(b.whitener->factor_transpose_times(lj.transpose()));
    stacked_rows += b.size;
    s.noalias() -= jb * (tau.segment(b.offset, b.size) - *b.mean);
  }
  Eigen::MatrixXd stacked(stacked_rows, n);
  Eigen::Index row = 0;
  for (const auto& a : at) {
    stacked.middleRows(row, a.rows()) = a;
    row += a.rows();
  }
  stacked.bottomRows(n).setIdentity();
  if (!stacked.allFinite()) throw NumericalError("Jacobian has non-finite entries");
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  // C = Ln^{-1} R^T satisfies K = C C^T.
  const auto c_solve = [&](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    return r.transpose().triangularView<Eigen::Lower>().solve(noise.apply(x));
  };
  const Eigen::MatrixXd ln = noise.matrix();
  const auto k_solve = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::VectorXd y = r.triangularView<Eigen::Upper>().solve(c_solve(x));
    return ln.transpose() * y;
  };

  Eigen::VectorXd d = Eigen::VectorXd::Zero(problem.size());
  Eigen::VectorXd rhs = s;
  if (free_count > 0) {
    Eigen::MatrixXd jf(n, free_count);
    int col = 0;
    for (const Block& b : bs) {
      if (b.whitener || b.size == 0) continue;
      jf.middleCols(col, b.size) = jac.middleCols(b.offset, b.size);
      col += b.size;
    }
    const Eigen::MatrixXd a = c_solve(jf);
    const Eigen::VectorXd c = c_solve(s);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < free_count) {
      throw NumericalError("unpenalized parameters are not identifiable from the data (rank " +
                           std::to_string(qr.rank()) + " of " + std::to_string(free_count) + ")");
    }
    const Eigen::VectorXd df = -qr.solve(c);
    col = 0;
    for (const Block& b : bs) {
      if (b.whitener || b.size == 0) continue;
      d.segment(b.offset, b.size) = df.segment(col, b.size);
      col += b.size;
    }
    rhs.noalias() += jf * df;
  }
  const Eigen::VectorXd g = k_solve(rhs);
  for (std::size_t i = 0; i < bs.size(); ++i) {
    const Block& b = bs[i];
    if (!b.whitener || b.size == 0) continue;
    d.segment(b.offset, b.size) = -(tau.segment(b.offset, b.size) - *b.mean) - gjt[i] * g;
  }
  return d;
}

double directional_derivative(const TikhonovProblem& problem, const Eigen::VectorXd& tau,
                              const Eigen::VectorXd& residual, const Eigen::MatrixXd& jac,
                              const Eigen::VectorXd& d) {
  const auto& noise = problem.whitener.noise;
  double slope = noise.apply(residual).dot(noise.apply(Eigen::VectorXd(jac * d)));
  for (const Block& b : blocks(problem)) {
    if (!b.whitener || b.size == 0) continue;
    const Eigen::VectorXd delta = tau.segment(b.offset, b.size) - *b.mean;
    slope += b.whitener->apply(delta).dot(b.whitener->apply(Eigen::VectorXd(d.segment(b.offset, b.size))));
  }
  return 2.0 * slope;
}

LineSearchResult line_search(const TikhonovProblem& problem, const Evaluation& current,
                             double slope, const Eigen::VectorXd& d,
                             const LineSearchOptions& options) {
  LineSearchResult result;
  if (!(slope < 0.0)) return result;
  // A trial point whose forward problem breaks down counts as a rejected step.
  auto trial = [&](double t) -> std::optional<Evaluation> {
    ++result.evaluations;
    try {
      return evaluate(problem, current.tau + t * d);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };
  const double f0 = current.terms.total();
  auto armijo = [&](const Evaluation& ev, double t) {
    return ev.terms.total() <= f0 + options.c1 * t * slope;
  };

  if (!options.wolfe) {
    double t = 1.0;
    for (int k = 0; k <= options.max_halvings; ++k, t *= 0.5) {
      std::optional<Evaluation> ev = trial(t);
      if (ev && armijo(*ev, t)) {
        result.accepted = true;
        result.step = t;
        result.point = std::move(ev);
        return result;
      }
    }
    return result;
  }

  // Bisection on [lo, hi] for the weak Wolfe conditions; the step never
  // exceeds one, so a full step that only misses the curvature test is kept.
  double lo = 0.0, hi = 1.0, t = 1.0;
  for (int k = 0; k <= options.max_halvings; ++k) {
    std::optional<Evaluation> trial_point = trial(t);
    if (!trial_point || !armijo(*trial_point, t)) {
      hi = t;
    } else {
      Evaluation& ev = *trial_point;
      const Eigen::MatrixXd jac = jacobian(problem, ev);
      const double s = directional_derivative(problem, ev.tau, ev.residual, jac, d);
      const bool curvature = s >= options.c2 * slope;
      if (!result.point || t > result.step) {
        result.accepted = true;
        result.step = t;
        result.point = ev;
      }
      if (curvature || t == 1.0) {
        result.step = t;
        result.point = std::move(ev);
        return result;
      }
      lo = t;
    }
    t = 0.5 * (lo + hi);
  }
  return result;
}

std::string to_json_line(const IterationRecord& r) {
  std::string s = "{\"iteration\":" + std::to_string(r.iteration);
  s += ",\"F\":" + format_double(r.terms.total());
  s += ",\"data\":" + format_double(r.terms.data);
  s += ",\"kappa\":" + format_double(r.terms.kappa);
  s += ",\"theta\":" + (r.terms.theta ? format_double(*r.terms.theta) : std::string("null"));
  s += ",\"step\":" + format_double(r.step);
  s += ",\"direction_norm\":" + format_double(r.direction_norm) + "}";
  return s;
}

namespace {

// PH parameters on the clamp boundary whose direction points outward. The
// projection would discard those components, so the step along the rest is
// recomputed with them held fixed.
std::vector<int> outward_at_bounds(const TikhonovProblem& p, const Eigen::VectorXd& tau,
                                   const Eigen::VectorXd& d) {
  std::vector<int> out;
  if (p.model.variant != ContactVariant::ph) return out;
  constexpr double eps = 1e-12;
  const int off = p.kappa_size();
  const int count = p.theta_size() / 3;
  for (int m = 0; m < count; ++m) {
    const int ih = off + m, il = off + count + m, iw = off + 2 * count + m;
    const double l = tau[il], w = tau[iw];
    if (tau[ih] <= kPhFloor * (1.0 + eps) && d[ih] < 0.0) out.push_back(ih);
    if ((w >= 1.0 - eps && d[iw] > 0.0) || (w <= kPhFloor * (1.0 + eps) && d[iw] < 0.0)) out.push_back(iw);
    if ((l <= 0.5 * w + eps && d[il] < 0.0) || (l >= 1.0 - 0.5 * w - eps && d[il] > 0.0)) out.push_back(il);
  }
  return out;
}

// Gauss-Newton direction with the outward-pointing PH bounds held fixed. With
// a diagonal theta prior a zero Jacobian column decouples the parameter, so
// zeroing the column and then the entry gives the reduced step exactly.
Eigen::VectorXd bounded_direction(const TikhonovProblem& p, const Evaluation& at, const Eigen::MatrixXd& jac) {
  Eigen::VectorXd d = gn_direction(p, at.tau, at.residual, jac);
  if (!p.whitener.theta || !p.whitener.theta->is_diagonal()) return d;
  std::vector<bool> fixed(d.size(), false);
  Eigen::MatrixXd reduced;
  for (;;) {
    bool added = false;
    for (int i : outward_at_bounds(p, at.tau, d)) {
      if (!fixed[i]) fixed[i] = added = true;
    }
    if (!added) return d;
    if (reduced.size() == 0) reduced = jac;
    for (int i = 0; i < d.size(); ++i) {
      if (fixed[i]) reduced.col(i).setZero();
    }
    d = gn_direction(p, at.tau, at.residual, reduced);
    for (int i = 0; i < d.size(); ++i) {
      if (fixed[i]) d[i] = 0.0;
    }
  }
}

}  // namespace

GNState run(const TikhonovProblem& problem, const Eigen::VectorXd& tau0, const RunOptions& options) {
  if (options.max_iter < 0) throw InputError("max_iter must be nonnegative");
  Evaluation current = evaluate(problem, tau0);
  GNState state;
  auto record = [&](double step, double dnorm) {
    IterationRecord r{state.iteration, current.terms, step, dnorm};
    state.history.push_back(r);
    if (options.log) options.log(to_json_line(r));
  };
  record(0.0, 0.0);

  int stalled = 0;
  state.reason = "maximum iterations reached";
  while (state.iteration < options.max_iter) {
    const Eigen::MatrixXd jac = jacobian(problem, current);
    const Eigen::VectorXd d = bounded_direction(problem, current, jac);
    const double dnorm = d.norm();
    state.last_direction_norm = dnorm;
    if (dnorm == 0.0) {
      state.converged = true;
      state.reason = "zero direction";
      break;
    }
    const double slope = directional_derivative(problem, current.tau, current.residual, jac, d);
    if (!(slope < 0.0)) {
      state.converged = true;
      state.reason = "stationary point";
      break;
    }
    LineSearchResult ls = line_search(problem, current, slope, d, options.line_search);
    if (!ls.accepted) {
      state.reason = "line search failed";
      break;
    }
    const double f_old = current.terms.total();
    const double step_norm = (ls.point->tau - current.tau).norm();
    current = std::move(*ls.point);
    ++state.iteration;
    state.last_step = ls.step;
    record(ls.step, dnorm);

    const double f_new = current.terms.total();
    const double rel = (f_old - f_new) / std::max(std::abs(f_old), std::numeric_limits<double>::min());
    stalled = rel < options.tol ? stalled + 1 : 0;
    if (stalled >= options.stall_iterations) {
      state.converged = true;
      state.reason = "relative decrease below tolerance";
      break;
    }
    if (step_norm < options.tol * std::max(1.0, current.tau.norm())) {
      state.converged = true;
      state.reason = "step below tolerance";
      break;
    }
  }
  state.tau = current.tau;
  state.terms = current.terms;
  state.residual = current.residual;
  return state;
}

ScalarFit scalar_fit(const TikhonovProblem& problem, double kappa0, const ContactParams& contact0,
                     const RunOptions& options) {
  if (problem.kappa_mode != DomainConductivity::Mode::scalar || problem.whitener.kappa) {
    throw InputError("scalar_fit needs an unpenalized scalar log-conductivity");
  }
  const Eigen::VectorXd tau0 = problem.stack(DomainConductivity::scalar(kappa0), contact0);
  ScalarFit fit;
  fit.state = run(problem, tau0, options);
  fit.kappa = fit.state.tau[0];
  fit.sigma = std::exp(fit.kappa);
  fit.contact = problem.contact_of(fit.state.tau);
  fit.residual = fit.state.residual.norm();
  return fit;
}

}  // namespace eit

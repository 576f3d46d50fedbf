#include "eit/priors.hpp"

#include <algorithm>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "eit/error.hpp"

namespace eit {

void PriorSpec::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"gamma_kappa", gamma_kappa}, {"lambda_kappa", lambda_kappa}, {"gamma_theta", gamma_theta},
      {"lambda_theta", lambda_theta}, {"gamma_h", gamma_h},          {"gamma_l", gamma_l},
      {"gamma_w", gamma_w},           {"sigma_mean", sigma_mean},     {"noise_std", noise_std},
  };
  for (const auto& [name, value] : fields) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw InputError(std::string("prior field ") + name + " must be positive");
    }
  }
}

Eigen::MatrixXd cov_kappa(const TriMesh& mesh, double gamma, double lambda) {
  if (!(gamma > 0.0) || !(lambda > 0.0)) throw InputError("cov_kappa: gamma and lambda must be positive");
  const int n = mesh.num_nodes();
  const double var = gamma * gamma;
  const double inv = 1.0 / (2.0 * lambda * lambda);
  Eigen::MatrixXd cov(n, n);
  for (int j = 0; j < n; ++j) {
    cov(j, j) = var;
    for (int i = j + 1; i < n; ++i) {
      const double value = var * std::exp(-(mesh.nodes[i] - mesh.nodes[j]).squaredNorm() * inv);
      cov(i, j) = value;
      cov(j, i) = value;
    }
  }
  return cov;
}

double boundary_distance(double s, double t, double perimeter) {
  double d = std::fmod(std::abs(s - t), perimeter);
  return std::min(d, perimeter - d);
}

Eigen::MatrixXd cov_pl(const TriMesh& mesh, std::span<const ExtendedElectrode> electrodes,
                       double gamma, double lambda) {
  if (!(gamma > 0.0) || !(lambda > 0.0)) throw InputError("cov_pl: gamma and lambda must be positive");
  const int total = contact_param_count(ContactVariant::pl, electrodes);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(total, total);
  const double var = gamma * gamma;
  const double inv = 1.0 / (2.0 * lambda * lambda);
  for (std::size_t m = 0; m < electrodes.size(); ++m) {
    const auto& e = electrodes[m];
    const int nodes = e.num_nodes();
    const int inner = e.num_interior_nodes();
    if (inner < 1) {
      throw InputError("electrode " + std::to_string(m + 1) + " has no interior boundary node");
    }
    std::vector<double> s(nodes);
    for (int i = 0; i < nodes; ++i) s[i] = e.to_arclength(e.node_t[i]);
    auto kernel = [&](int i, int j) {
      const double d = boundary_distance(s[i], s[j], mesh.perimeter);
      return var * std::exp(-d * d * inv);
    };
    // Interior nodes are 1..nodes-2, the endpoints 0 and nodes-1.
    Eigen::MatrixXd gii(inner, inner), gib(inner, 2);
    Eigen::Matrix2d gbb;
    const int ends[2] = {0, nodes - 1};
    for (int i = 0; i < inner; ++i) {
      for (int j = 0; j < inner; ++j) gii(i, j) = kernel(i + 1, j + 1);
      for (int b = 0; b < 2; ++b) gib(i, b) = kernel(i + 1, ends[b]);
    }
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) gbb(a, b) = kernel(ends[a], ends[b]);
    }
    // 1 - exp(-d^2 / 2 lambda^2) underflows to 0 once the endpoints coincide.
    const double det = gbb.determinant();
    if (!(det > 1e-14 * var * var)) {
      throw InputError("cov_pl: endpoint covariance of electrode " + std::to_string(m + 1) +
                       " is singular");
    }
    const int offset = pl_offset(electrodes, static_cast<int>(m));
    cov.block(offset, offset, inner, inner) = gii - gib * gbb.inverse() * gib.transpose();
  }
  return cov;
}

Eigen::MatrixXd cov_ph(int electrodes, double gamma_h, double gamma_l, double gamma_w) {
  if (electrodes < 2) throw InputError("cov_ph needs at least two electrodes");
  Eigen::VectorXd diag(3 * electrodes);
  diag.segment(0, electrodes).setConstant(gamma_h * gamma_h);
  diag.segment(electrodes, electrodes).setConstant(gamma_l * gamma_l);
  diag.segment(2 * electrodes, electrodes).setConstant(gamma_w * gamma_w);
  return diag.asDiagonal();
}

std::vector<double> contact_prior_mean(ContactVariant variant,
                                       std::span<const ExtendedElectrode> electrodes,
                                       std::span<const double> true_widths) {
  const int count = static_cast<int>(electrodes.size());
  switch (variant) {
    case ContactVariant::cem:
    case ContactVariant::pl:
      return std::vector<double>(contact_param_count(variant, electrodes), 0.0);
    case ContactVariant::ph: {
      if (static_cast<int>(true_widths.size()) != count) {
        throw InputError("PH prior mean needs one true electrode width per electrode");
      }
      std::vector<double> mean(3 * count, 0.0);
      for (int m = 0; m < count; ++m) {
        mean[count + m] = 0.5;
        mean[2 * count + m] = true_widths[m] / electrodes[m].length();
      }
      return mean;
    }
  }
  return {};
}

WhitenerBlock WhitenerBlock::diagonal(Eigen::VectorXd std_devs) {
  if ((std_devs.array() <= 0.0).any()) throw InputError("standard deviations must be positive");
  WhitenerBlock block;
  block.std_devs_ = std::move(std_devs);
  return block;
}

WhitenerBlock WhitenerBlock::dense(Eigen::MatrixXd covariance, double scale) {
  const Eigen::Index n = covariance.rows();
  if (covariance.cols() != n) throw InputError("covariance must be square");
  if (!covariance.isApprox(covariance.transpose(), 1e-12)) {
    throw InputError("covariance is not symmetric");
  }
  // Factor the reversed matrix, P G P = R R^T with R lower; then
  // G = (P R P)(P R P)^T and P R P is upper triangular.
  const Eigen::MatrixXd reversed = covariance.reverse();
  const double var = scale * scale;
  // Plain factorization first, then jitter from 1e-10 * var upwards.
  for (double jitter = 0.0; jitter <= 1e-6 * var * (1.0 + 1e-12);
       jitter = jitter == 0.0 ? 1e-10 * var : 10.0 * jitter) {
    Eigen::MatrixXd shifted = reversed;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::MatrixXd lower = llt.matrixL();
    if (!(lower.diagonal().array() > 0.0).all() || !lower.allFinite()) continue;
    WhitenerBlock block;
    block.dense_ = true;
    block.jitter_ = jitter;
    block.upper_ = lower.reverse();
    block.cov_ = std::move(covariance);
    block.cov_.diagonal().array() += jitter;
    return block;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance, Eigen::EigenvaluesOnly);
  std::ostringstream msg;
  msg << "covariance factorization failed after jitter " << 1e-6 * var << " (size " << n
      << ", eigenvalue range [" << eig.eigenvalues().minCoeff() << ", "
      << eig.eigenvalues().maxCoeff() << "])";
  throw NumericalError(msg.str());
}

int WhitenerBlock::size() const {
  return static_cast<int>(dense_ ? upper_.rows() : std_devs_.size());
}

Eigen::VectorXd WhitenerBlock::apply(const Eigen::VectorXd& x) const {
  if (x.size() != size()) throw InputError("whitener size mismatch");
  if (!dense_) return x.cwiseQuotient(std_devs_);
  return upper_.triangularView<Eigen::Upper>().solve(x);
}

Eigen::MatrixXd WhitenerBlock::apply(const Eigen::MatrixXd& x) const {
  if (x.rows() != size()) throw InputError("whitener size mismatch");
  if (!dense_) return std_devs_.cwiseInverse().asDiagonal() * x;
  return upper_.triangularView<Eigen::Upper>().solve(x);
}

Eigen::MatrixXd WhitenerBlock::factor_transpose_times(const Eigen::MatrixXd& x) const {
  if (x.rows() != size()) throw InputError("whitener size mismatch");
  if (!dense_) return std_devs_.asDiagonal() * x;
  return upper_.transpose().triangularView<Eigen::Lower>() * x;
}

Eigen::MatrixXd WhitenerBlock::covariance_times(const Eigen::MatrixXd& x) const {
  if (!dense_) return std_devs_.array().square().matrix().asDiagonal() * x;
  return cov_ * x;
}

Eigen::MatrixXd WhitenerBlock::matrix() const {
  return apply(Eigen::MatrixXd(Eigen::MatrixXd::Identity(size(), size())));
}

Eigen::MatrixXd WhitenerBlock::covariance() const {
  if (!dense_) return std_devs_.array().square().matrix().asDiagonal();
  return cov_;
}

int StackedWhitener::rows() const {
  return noise.size() + (kappa ? kappa->size() : 0) + (theta ? theta->size() : 0);
}

StackedWhitener build_whitener(int measurements, double noise_std,
                               std::optional<WhitenerBlock> kappa,
                               std::optional<WhitenerBlock> theta) {
  if (!(noise_std > 0.0)) throw InputError("noise standard deviation must be positive");
  return {WhitenerBlock::diagonal(Eigen::VectorXd::Constant(measurements, noise_std)),
          std::move(kappa), std::move(theta)};
}

}  // namespace eit

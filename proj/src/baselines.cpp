// SPDX-License-Identifier: Apache-2.0
#include "skybeam/baselines.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace skybeam {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

MatrixXcd to_eigen(const CMat& m) {
  MatrixXcd out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(i, j) = m.at(i, j);
  return out;
}

CMat from_eigen(const MatrixXcd& m) {
  CMat out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) = m(i, j);
  return out;
}

double user_noise(const PrecodeProblem& p, int u) {
  double n = p.noise_w;
  if (!p.extra_noise_w.empty()) n += p.extra_noise_w[u];
  return n;
}

void check_problem(const PrecodeProblem& p) {
  if (p.h.rows < 1 || p.h.cols < 1) throw std::invalid_argument("empty channel matrix");
  if (p.noise_w <= 0) throw std::invalid_argument("noise power must be positive");
  if (p.p_max_w <= 0) throw std::invalid_argument("non-positive power budget");
  if (!p.extra_noise_w.empty() && static_cast<int>(p.extra_noise_w.size()) != p.h.rows)
    throw std::invalid_argument("extra noise size must match user count");
}

double sum_rate(const PrecodeProblem& p, const MatrixXcd& H, const MatrixXcd& W) {
  // effective stream gains c(u, j) = h_u . w_j (plain product, rows as vectors)
  MatrixXcd c = H * W.transpose();
  double total = 0.0;
  for (int u = 0; u < H.rows(); ++u) {
    double sig = std::norm(c(u, u));
    double interf = 0.0;
    for (int j = 0; j < H.rows(); ++j)
      if (j != u) interf += std::norm(c(u, j));
    total += std::log2(1.0 + sig / (interf + user_noise(p, u)));
  }
  return total;
}

// Equal-power matched filter that leaves zero rows as zero beams; used only
// as a solver starting point where dead channels must not abort the run.
MatrixXcd mrt_lenient(const MatrixXcd& H, double p_max) {
  int K = static_cast<int>(H.rows());
  MatrixXcd W = MatrixXcd::Zero(K, H.cols());
  double per = std::sqrt(p_max / K);
  for (int u = 0; u < K; ++u) {
    double n = H.row(u).norm();
    if (n > 0) W.row(u) = H.row(u).conjugate() * (per / n);
  }
  return W;
}

}  // namespace

CMat mrt(const PrecodeProblem& p) {
  check_problem(p);
  MatrixXcd H = to_eigen(p.h);
  int K = p.h.rows;
  MatrixXcd W(K, p.h.cols);
  double per = std::sqrt(p.p_max_w / K);
  for (int u = 0; u < K; ++u) {
    double n = H.row(u).norm();
    if (n == 0.0) throw std::invalid_argument("degenerate channel row");
    W.row(u) = H.row(u).conjugate() * (per / n);
  }
  return from_eigen(W);
}

CMat zf(const PrecodeProblem& p) {
  check_problem(p);
  if (p.h.rows > p.h.cols) throw std::invalid_argument("ZF infeasible: more users than antennas");
  MatrixXcd H = to_eigen(p.h);
  MatrixXcd G = H * H.adjoint();
  Eigen::FullPivLU<MatrixXcd> lu(G);
  if (!lu.isInvertible()) throw std::invalid_argument("ZF infeasible: rank-deficient channel");
  // columns of H^H G^{-1} satisfy h_u . col_v = delta(u, v)
  MatrixXcd P = H.adjoint() * lu.inverse();
  int K = p.h.rows;
  MatrixXcd W(K, p.h.cols);
  double per = std::sqrt(p.p_max_w / K);
  for (int u = 0; u < K; ++u) {
    VectorXcd col = P.col(u);
    double n = col.norm();
    if (n == 0.0) throw std::invalid_argument("ZF infeasible: null precoding direction");
    W.row(u) = (col / n).transpose() * per;
  }
  return from_eigen(W);
}

double solver_sum_rate(const PrecodeProblem& p, const CMat& w) {
  check_problem(p);
  return sum_rate(p, to_eigen(p.h), to_eigen(w));
}

WmmseResult wmmse(const PrecodeProblem& p) {
  check_problem(p);
  MatrixXcd H = to_eigen(p.h);
  int K = p.h.rows;
  int N = p.h.cols;
  if (H.norm() == 0.0) throw std::invalid_argument("degenerate channel matrix");

  // start from the better of the nulling and matched-filter constructions
  MatrixXcd W = mrt_lenient(H, p.p_max_w);
  double best_obj = sum_rate(p, H, W);
  try {
    PrecodeProblem q = p;
    MatrixXcd Wz = to_eigen(zf(q));
    double oz = sum_rate(p, H, Wz);
    if (oz > best_obj) {
      W = Wz;
      best_obj = oz;
    }
  } catch (const std::invalid_argument&) {
    // nulling infeasible, keep the matched filter
  }
  MatrixXcd best_w = W;

  WmmseResult res;
  double prev = best_obj;
  int it = 0;
  for (; it < p.max_iters; ++it) {
    // scalar receivers and inverse-MSE weights for the current beams
    MatrixXcd c = H * W.transpose();
    VectorXcd g(K);
    VectorXd v(K);
    for (int u = 0; u < K; ++u) {
      double t = user_noise(p, u);
      for (int j = 0; j < K; ++j) t += std::norm(c(u, j));
      g(u) = std::conj(c(u, u)) / t;
      double e = 1.0 - std::norm(c(u, u)) / t;
      if (e < 1e-300) e = 1e-300;
      v(u) = 1.0 / e;
    }

    // transmitter update: quadratic normal matrix shared by all users
    MatrixXcd A = MatrixXcd::Zero(N, N);
    MatrixXcd rhs(N, K);
    for (int u = 0; u < K; ++u) {
      VectorXcd a = H.row(u).transpose();  // no conjugation: plain-product convention
      A.noalias() += (v(u) * std::norm(g(u))) * (a.conjugate() * a.transpose());
      rhs.col(u) = (v(u) * std::conj(g(u))) * a.conjugate();
    }
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(A);
    VectorXd lam = es.eigenvalues();
    const MatrixXcd& V = es.eigenvectors();
    MatrixXcd b = V.adjoint() * rhs;  // [N x K] coordinates in the eigenbasis

    double lam_max = lam.size() ? lam.cwiseAbs().maxCoeff() : 0.0;
    double drop = 1e-12 * std::max(lam_max, 1.0);
    auto power_at = [&](double mu) {
      double s = 0.0;
      for (int i = 0; i < N; ++i) {
        double den = lam(i) + mu;
        if (mu == 0.0 && lam(i) <= drop) continue;  // pseudo-inverse at the boundary
        for (int u = 0; u < K; ++u) s += std::norm(b(i, u)) / (den * den);
      }
      return s;
    };
    double mu = 0.0;
    if (power_at(0.0) > p.p_max_w) {
      double hi = 1.0;
      while (power_at(hi) > p.p_max_w) hi *= 2.0;
      double lo = 0.0;
      for (int s = 0; s < 200; ++s) {
        mu = 0.5 * (lo + hi);
        (power_at(mu) > p.p_max_w ? lo : hi) = mu;
      }
      mu = hi;
    }
    for (int u = 0; u < K; ++u) {
      VectorXcd y = VectorXcd::Zero(N);
      for (int i = 0; i < N; ++i) {
        double den = lam(i) + mu;
        if (mu == 0.0 && lam(i) <= drop) continue;
        y(i) = b(i, u) / den;
      }
      W.row(u) = (V * y).transpose();
    }

    double obj = sum_rate(p, H, W);
    res.trace.push_back(obj);
    if (obj > best_obj) {
      best_obj = obj;
      best_w = W;
    }
    if (std::abs(obj - prev) / std::max(1.0, std::abs(prev)) < 1e-8) {
      ++it;
      break;
    }
    prev = obj;
  }
  res.iterations = it;

  // spend the whole budget: uniform up-scaling never lowers any SINR
  double pw = best_w.squaredNorm();
  if (pw > 0) best_w *= std::sqrt(p.p_max_w / pw);
  res.w = from_eigen(best_w);
  return res;
}

}  // namespace skybeam

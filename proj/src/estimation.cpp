#include "gazefix/estimation.hpp"

#include <algorithm>
#include <cmath>

namespace gazefix {
namespace {

using Eigen::Matrix4d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void symmetrize_and_floor(Matrix4d& P) {
  P = 0.5 * (P + P.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix4d> eig(P);
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin < 0.0) {
    P += (-lmin + 1e-12) * Matrix4d::Identity();
  }
}

// Measurement rows for one observation set. Layout: odometry v (3 rows),
// odometry w_X,w_Y (2 rows, fixation mode only), then 2 rows per valid flow
// sample.
struct Measurement {
  VectorXd innovation;
  MatrixXd H;
  VectorXd R;  // diagonal
  int flow_row_begin = 0;
};

Measurement build_measurement(const EkfState& s, const EkfConfig& cfg,
                              const FlowObservation& obs) {
  int n_flow = 0;
  for (const auto& f : obs.samples) {
    if (f.valid) ++n_flow;
  }
  const int n_odom = 3 + (cfg.fixation_constraint ? 2 : 0);
  const int rows = n_odom + 2 * n_flow;

  Measurement m;
  m.innovation.resize(rows);
  m.H = MatrixXd::Zero(rows, 4);
  m.R.resize(rows);
  m.flow_row_begin = n_odom;

  m.innovation.head<3>() = obs.measured_twist.v - s.v;
  m.H.block<3, 3>(0, 0).setIdentity();
  m.R.head<3>().setConstant(cfg.r_odom_v);

  if (cfg.fixation_constraint) {
    // Fixation couples the executed rotation to v and d_f, so the gyro rows
    // observe d_f whenever there is lateral motion.
    const Vec2 w_pred = fixation_coupling({s.v.x(), s.v.y()}, s.d_f);
    m.innovation(3) = obs.measured_twist.w.x() - w_pred.x();
    m.innovation(4) = obs.measured_twist.w.y() - w_pred.y();
    m.H(3, 1) = s.d_f;
    m.H(3, 3) = s.v.y();
    m.H(4, 0) = -s.d_f;
    m.H(4, 3) = -s.v.x();
    m.R(3) = cfg.r_odom_w;
    m.R(4) = cfg.r_odom_w;
  }

  int r = n_odom;
  for (const auto& f : obs.samples) {
    if (!f.valid) continue;
    const double x = f.p.x, y = f.p.y;
    Vec2 pred;
    if (cfg.fixation_constraint) {
      // Flow of a point on the fixated object (disparity d_f) while the
      // camera executes the coupled rotation: d_f * (x v_X + y v_Y + v_Z) * p.
      const double sdot = x * s.v.x() + y * s.v.y() + s.v.z();
      pred = s.d_f * sdot * Vec2(x, y);
      m.H(r, 0) = s.d_f * x * x;
      m.H(r, 1) = s.d_f * y * x;
      m.H(r, 2) = s.d_f * x;
      m.H(r, 3) = sdot * x;
      m.H(r + 1, 0) = s.d_f * x * y;
      m.H(r + 1, 1) = s.d_f * y * y;
      m.H(r + 1, 2) = s.d_f * y;
      m.H(r + 1, 3) = sdot * y;
    } else {
      // Translation-only motion: plain parallax of a point at disparity d_f.
      pred = s.d_f * Vec2(-s.v.x() + x * s.v.z(), -s.v.y() + y * s.v.z());
      m.H(r, 0) = -s.d_f;
      m.H(r, 2) = s.d_f * x;
      m.H(r, 3) = -s.v.x() + x * s.v.z();
      m.H(r + 1, 1) = -s.d_f;
      m.H(r + 1, 2) = s.d_f * y;
      m.H(r + 1, 3) = -s.v.y() + y * s.v.z();
    }
    m.innovation(r) = f.flow.x() - pred.x();
    m.innovation(r + 1) = f.flow.y() - pred.y();
    m.R(r) = cfg.r_flow;
    m.R(r + 1) = cfg.r_flow;
    r += 2;
  }
  return m;
}

}  // namespace

EkfState EkfState::initial() {
  EkfState s;
  s.v.setZero();
  s.d_f = 1.0;
  s.P.setZero();
  s.P.diagonal() << 0.01, 0.01, 0.01, 4.0;
  return s;
}

EkfState predict(const EkfState& state, const EkfConfig& cfg, double dt) {
  EkfState out = state;
  // Z_f shrinks at exactly v_Z under fixation; in inverse depth that is
  // d_f' = d_f / (1 - v_Z d_f dt), integrated exactly over the step.
  double denom = 1.0 - state.v.z() * state.d_f * dt;
  denom = std::max(denom, 0.2);
  out.d_f = std::clamp(state.d_f / denom, cfg.d_min, cfg.d_max);

  Matrix4d F = Matrix4d::Identity();
  const double inv2 = 1.0 / (denom * denom);
  F(3, 3) = inv2;
  F(3, 2) = state.d_f * state.d_f * dt * inv2;

  Matrix4d Q = Matrix4d::Zero();
  Q.diagonal() << cfg.q_accel * dt, cfg.q_accel * dt, cfg.q_accel * dt,
      cfg.q_df * dt;
  out.P = F * state.P * F.transpose() + Q;
  symmetrize_and_floor(out.P);
  return out;
}

EkfState update(const EkfState& state, const EkfConfig& cfg,
                const FlowObservation& obs) {
  const Measurement m = build_measurement(state, cfg, obs);
  const int rows = static_cast<int>(m.innovation.size());
  if (rows == 0) return state;

  MatrixXd S = m.H * state.P * m.H.transpose();
  S.diagonal() += m.R;
  const MatrixXd K = S.ldlt().solve(m.H * state.P).transpose();

  EkfState out = state;
  const Eigen::Vector4d dx = K * m.innovation;
  out.v += dx.head<3>();
  out.d_f = std::clamp(state.d_f + dx(3), cfg.d_min, cfg.d_max);

  const Matrix4d IKH = Matrix4d::Identity() - K * m.H;
  out.P = IKH * state.P * IKH.transpose() +
          K * m.R.asDiagonal() * K.transpose();
  symmetrize_and_floor(out.P);
  return out;
}

ConsistencyResult check_consistency(const EkfState& state, const EkfConfig& cfg,
                                    const FlowObservation& obs) {
  ConsistencyResult res;
  res.state = state;
  const Measurement m = build_measurement(state, cfg, obs);
  const int rows = static_cast<int>(m.innovation.size()) - m.flow_row_begin;
  if (rows <= 0) return res;  // no flow evidence, nothing to contradict

  const MatrixXd Hf = m.H.bottomRows(rows);
  const VectorXd nu = m.innovation.tail(rows);
  MatrixXd S = Hf * state.P * Hf.transpose();
  S.diagonal() += m.R.tail(rows);
  res.mahalanobis_sq = nu.dot(S.ldlt().solve(nu));
  res.dof = rows;
  if (res.mahalanobis_sq > cfg.innovation_gate * rows) {
    res.consistent = false;
    // Scale the d_f row/column so the block stays positive semi-definite.
    const double s = std::sqrt(cfg.inflation);
    res.state.P.row(3) *= s;
    res.state.P.col(3) *= s;
  }
  return res;
}

std::pair<double, double> estimated_distance(const EkfState& state) {
  const double z = 1.0 / state.d_f;
  const double sigma = std::sqrt(std::max(0.0, state.P(3, 3))) * z * z;
  return {z, sigma};
}

}  // namespace gazefix

// Extended Kalman filter over camera linear velocity and inverse fixation
// distance d_f. The motion model carries the rigid-motion consequence of
// fixation (d_f grows as the camera closes in); the observation model fuses
// odometry — whose angular rows observe d_f through the fixation coupling —
// with optic-flow samples on the fixated object. A flow-innovation gate
// inflates uncertainty when the target moves or fixation breaks, which is
// what lets the estimate recover.

#pragma once

#include "gazefix/geometry.hpp"
#include "gazefix/optics.hpp"

#include <Eigen/Dense>

#include <vector>

namespace gazefix {

struct EkfConfig {
  double q_accel = 2e-2;   // velocity process noise PSD, m^2/s^3
  double q_df = 1e-4;      // d_f process noise, 1/m^2 per s
  double r_odom_v = 1e-6;  // odometry linear velocity variance, (m/s)^2
  double r_odom_w = 1e-6;  // odometry angular velocity variance, (rad/s)^2
  double r_flow = 4e-4;    // flow variance, (units/s)^2
  double innovation_gate = 2.5;  // flow Mahalanobis^2 per degree of freedom
  double inflation = 10.0;       // d_f variance factor on gate breach
  bool fixation_constraint = true;
  double d_min = 1.0 / 20.0;   // 1/m
  double d_max = 1.0 / 0.02;
};

struct EkfState {
  Vec3 v = Vec3::Zero();
  double d_f = 1.0;
  Eigen::Matrix4d P = Eigen::Matrix4d::Zero();

  static EkfState initial();
};

struct FlowObservation {
  std::vector<FlowSample> samples;  // on target edges; invalid ones ignored
  Twist measured_twist;             // noisy odometry
  double dt = 0.04;
};

EkfState predict(const EkfState& state, const EkfConfig& cfg, double dt);

EkfState update(const EkfState& state, const EkfConfig& cfg,
                const FlowObservation& obs);

struct ConsistencyResult {
  bool consistent = true;
  EkfState state;            // inflated on breach, untouched otherwise
  double mahalanobis_sq = 0.0;
  int dof = 0;
};

ConsistencyResult check_consistency(const EkfState& state, const EkfConfig& cfg,
                                    const FlowObservation& obs);

// (Z_f, sigma_Z) by first-order transform of d_f.
std::pair<double, double> estimated_distance(const EkfState& state);

}  // namespace gazefix

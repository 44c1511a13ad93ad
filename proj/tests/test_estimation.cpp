#include "gazefix/estimation.hpp"
#include "gazefix/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace gazefix;

namespace {

FlowSample exact_sample(const ImagePoint& p, const Vec3& v_true, double d_true,
                        double d_f_true, bool fixation) {
  FlowSample s;
  s.p = p;
  Twist t;
  t.v = v_true;
  if (fixation) {
    const Vec2 w = fixation_coupling({v_true.x(), v_true.y()}, d_f_true);
    t.w = {w.x(), w.y(), 0.0};
  }
  s.flow = image_velocity(p, d_true, t);
  s.confidence = 1.0;
  s.valid = true;
  return s;
}

// Synthetic closed-loop: true state moves with cyclic lateral velocity under
// perfect fixation; observations are exact plus optional Gaussian noise.
struct SyntheticRun {
  EkfState state = EkfState::initial();
  double z_true;
  double t = 0.0;

  SyntheticRun(double z) : z_true(z) {}

  void advance(EkfConfig cfg, Rng* noise, double sigma_v, double sigma_w,
               double sigma_flow, int steps, double dt = 0.04) {
    for (int i = 0; i < steps; ++i) {
      t += dt;
      const Vec3 v_true{0.05 * std::sin(1.5 * t), 0.05 * std::cos(1.5 * t), 0.0};
      const double d_true = 1.0 / z_true;
      FlowObservation obs;
      obs.dt = dt;
      obs.measured_twist.v = v_true;
      if (cfg.fixation_constraint) {
        const Vec2 w = fixation_coupling({v_true.x(), v_true.y()}, d_true);
        obs.measured_twist.w = {w.x(), w.y(), 0.0};
      }
      if (noise) {
        for (int k = 0; k < 3; ++k) {
          obs.measured_twist.v(k) += noise->gaussian(sigma_v);
          obs.measured_twist.w(k) += noise->gaussian(sigma_w);
        }
      }
      for (int k = 0; k < 8; ++k) {
        const ImagePoint p{0.03 * std::cos(k * kPi / 4.0),
                           0.03 * std::sin(k * kPi / 4.0)};
        FlowSample s =
            exact_sample(p, v_true, d_true, d_true, cfg.fixation_constraint);
        if (noise) {
          s.flow.x() += noise->gaussian(sigma_flow);
          s.flow.y() += noise->gaussian(sigma_flow);
        }
        obs.samples.push_back(s);
      }
      state = predict(state, cfg, dt);
      state = update(state, cfg, obs);
    }
  }
};

}  // namespace

TEST_SUITE_BEGIN("estimation");

TEST_CASE("predict propagates d_f by the approach rate") {
  EkfConfig cfg;
  EkfState s = EkfState::initial();
  s.d_f = 2.0;

  SUBCASE("no approach, no drift") {
    s.v = {0.1, -0.05, 0.0};
    const EkfState out = predict(s, cfg, 0.04);
    CHECK(out.d_f == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("closing in raises the inverse distance exactly") {
    s.v = {0.0, 0.0, 0.1};
    const EkfState out = predict(s, cfg, 0.04);
    // Exact oracle: Z 0.5 -> 0.5 - 0.1*0.04, so d_f = 1/0.496.
    CHECK(out.d_f == doctest::Approx(1.0 / 0.496).epsilon(1e-12));
    CHECK(out.d_f == doctest::Approx(2.016).epsilon(1e-3));
  }

  SUBCASE("process noise grows the covariance") {
    const EkfState out = predict(s, cfg, 0.04);
    CHECK(out.P.trace() > s.P.trace());
  }
}

TEST_CASE("covariance stays symmetric PSD through random sequences") {
  EkfConfig cfg;
  Rng rng(3);
  EkfState s = EkfState::initial();
  for (int i = 0; i < 300; ++i) {
    s.v = {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.1, 0.1)};
    s = predict(s, cfg, 0.04);
    FlowObservation obs;
    obs.dt = 0.04;
    obs.measured_twist.v = {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), 0.0};
    obs.measured_twist.w = {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), 0.0};
    for (int k = 0; k < 3; ++k) {
      FlowSample f;
      f.p = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
      f.flow = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
      f.valid = true;
      obs.samples.push_back(f);
    }
    s = update(s, cfg, obs);
    const Eigen::Matrix4d sym = s.P - s.P.transpose();
    CHECK(sym.norm() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(s.P);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("consistent evidence tightens the estimate") {
  EkfConfig cfg;
  EkfState s = EkfState::initial();
  const double prior_err = std::abs(1.0 / s.d_f - 0.25);
  SyntheticRun run(0.25);
  run.advance(cfg, nullptr, 0, 0, 0, 30);
  const double post_err = std::abs(1.0 / run.state.d_f - 0.25);
  CHECK(post_err < prior_err);
}

TEST_CASE("no lateral motion leaves d_f uninformed by the gyro rows") {
  EkfConfig cfg;
  EkfState s = EkfState::initial();
  const double var0 = s.P(3, 3);
  FlowObservation obs;
  obs.dt = 0.04;
  obs.measured_twist = Twist{};  // v = 0: the coupling carries nothing
  for (int i = 0; i < 50; ++i) s = update(s, cfg, obs);
  CHECK(s.P(3, 3) >= 0.95 * var0);
}

TEST_CASE("convergence at 15 cm with odometry noise") {
  EkfConfig cfg;
  Rng rng(11);
  SyntheticRun run(0.15);
  run.advance(cfg, &rng, 1e-3, 1e-3, 5e-3, 200);
  const auto [z, sigma] = estimated_distance(run.state);
  CHECK(std::abs(z - 0.15) < 0.005);
}

TEST_CASE("observability: variance collapses only with lateral motion") {
  EkfConfig cfg;
  SyntheticRun run(0.3);
  const double var0 = run.state.P(3, 3);
  run.advance(cfg, nullptr, 0, 0, 0, 200);
  CHECK(run.state.P(3, 3) < 0.01 * var0);

  // Frozen camera: d_f variance never drops below the prior.
  EkfState still = EkfState::initial();
  for (int i = 0; i < 200; ++i) {
    FlowObservation obs;
    obs.dt = 0.04;
    for (int k = 0; k < 8; ++k) {
      FlowSample f;
      f.p = {0.02 * k - 0.07, 0.01};
      f.flow = Vec2::Zero();  // nothing moves
      f.valid = true;
      obs.samples.push_back(f);
    }
    still = predict(still, cfg, 0.04);
    still = update(still, cfg, obs);
  }
  CHECK(still.P(3, 3) >= 4.0);
}

TEST_CASE("fixation advantage under identical noise") {
  // Same trajectory, same noise draws; the constraint must win at every
  // tested distance.
  for (double z : {0.15, 0.5, 2.0}) {
    EkfConfig fix_cfg;
    fix_cfg.fixation_constraint = true;
    EkfConfig trans_cfg;
    trans_cfg.fixation_constraint = false;

    double fix_err = 0.0, trans_err = 0.0;
    for (std::uint64_t seed : {101u, 202u, 303u}) {
      Rng rng_a(seed), rng_b(seed);
      SyntheticRun a(z), b(z);
      a.advance(fix_cfg, &rng_a, 1e-3, 1e-3, 5e-3, 250);
      b.advance(trans_cfg, &rng_b, 1e-3, 1e-3, 5e-3, 250);
      fix_err += std::abs(1.0 / a.state.d_f - z);
      trans_err += std::abs(1.0 / b.state.d_f - z);
    }
    CHECK(fix_err < trans_err);
  }
}

TEST_CASE("consistency gate flags a teleported target and recovers") {
  EkfConfig cfg;
  SyntheticRun run(0.25);
  run.advance(cfg, nullptr, 0, 0, 0, 120);
  CHECK(std::abs(1.0 / run.state.d_f - 0.25) < 1e-3);

  // The world jumps to twice the distance; the stale prediction now
  // contradicts the measured flow.
  const double z_new = 0.5;
  const double t0 = run.t;
  const Vec3 v_true{0.05 * std::sin(1.5 * t0 + 0.06), 0.05 * std::cos(1.5 * t0 + 0.06), 0.0};
  FlowObservation obs;
  obs.dt = 0.04;
  obs.measured_twist.v = v_true;
  // Executed rotation still follows the stale estimate: fixation broke.
  const Vec2 w_exec = fixation_coupling({v_true.x(), v_true.y()}, run.state.d_f);
  obs.measured_twist.w = {w_exec.x(), w_exec.y(), 0.0};
  for (int k = 0; k < 8; ++k) {
    const ImagePoint p{0.03 * std::cos(k * kPi / 4.0), 0.03 * std::sin(k * kPi / 4.0)};
    FlowSample s;
    s.p = p;
    Twist t;
    t.v = v_true;
    t.w = obs.measured_twist.w;
    s.flow = image_velocity(p, 1.0 / z_new, t);
    s.valid = true;
    obs.samples.push_back(s);
  }
  const auto check = check_consistency(run.state, cfg, obs);
  CHECK_FALSE(check.consistent);
  CHECK(check.state.P(3, 3) == doctest::Approx(run.state.P(3, 3) * cfg.inflation));

  SUBCASE("zero innovation is consistent and untouched") {
    SyntheticRun settled(0.25);
    settled.advance(cfg, nullptr, 0, 0, 0, 120);
    FlowObservation clean;
    clean.dt = 0.04;
    const double tc = settled.t;
    clean.measured_twist.v = {0.05 * std::sin(1.5 * tc), 0.05 * std::cos(1.5 * tc), 0.0};
    const Vec2 w = fixation_coupling(
        {clean.measured_twist.v.x(), clean.measured_twist.v.y()}, settled.state.d_f);
    clean.measured_twist.w = {w.x(), w.y(), 0.0};
    const auto ok = check_consistency(settled.state, cfg, clean);
    CHECK(ok.consistent);
    CHECK(ok.state.P == settled.state.P);
  }

  SUBCASE("empty samples never flag") {
    FlowObservation empty;
    empty.dt = 0.04;
    const auto ok = check_consistency(run.state, cfg, empty);
    CHECK(ok.consistent);
  }
}

TEST_CASE("estimated distance and its first-order sigma") {
  EkfState s = EkfState::initial();
  s.d_f = 2.0;
  s.P.setZero();
  auto [z, sigma] = estimated_distance(s);
  CHECK(z == doctest::Approx(0.5));
  CHECK(sigma == doctest::Approx(0.0));

  s.P(3, 3) = 1e-4;
  std::tie(z, sigma) = estimated_distance(s);
  CHECK(sigma == doctest::Approx(0.01 / 4.0));
}

TEST_CASE("NEES stays inside the chi-square band") {
  // 50 Monte-Carlo runs under the filter's own assumptions (white velocity
  // disturbance, Gaussian measurement noise); average the final normalized
  // squared error over runs and compare against the 95% chi-square band for
  // 4 x 50 degrees of freedom.
  EkfConfig cfg;
  cfg.q_accel = 4e-3;
  const int runs = 50;
  const int steps = 150;
  const double dt = 0.04;
  const double sigma_v = 1e-3, sigma_w = 1e-3, sigma_flow = 5e-3;

  double nees_sum = 0.0;
  for (int r = 0; r < runs; ++r) {
    Rng rng(1000 + r);
    Vec3 v_true{0.04, -0.02, 0.0};
    double z_true = 0.3;
    EkfState s = EkfState::initial();
    for (int i = 0; i < steps; ++i) {
      // Truth: white acceleration matching q_accel, frozen distance.
      for (int k = 0; k < 3; ++k) {
        v_true(k) += rng.gaussian(std::sqrt(cfg.q_accel * dt));
      }
      z_true = z_true / (1.0 - 0.0);  // lateral only
      const double d_true = 1.0 / z_true;
      FlowObservation obs;
      obs.dt = dt;
      obs.measured_twist.v = v_true;
      const Vec2 w = fixation_coupling({v_true.x(), v_true.y()}, d_true);
      obs.measured_twist.w = {w.x(), w.y(), 0.0};
      for (int k = 0; k < 3; ++k) {
        obs.measured_twist.v(k) += rng.gaussian(sigma_v);
        obs.measured_twist.w(k) += rng.gaussian(sigma_w);
      }
      for (int k = 0; k < 8; ++k) {
        const ImagePoint p{0.03 * std::cos(k * kPi / 4.0),
                           0.03 * std::sin(k * kPi / 4.0)};
        FlowSample f = exact_sample(p, v_true, d_true, d_true, true);
        f.flow.x() += rng.gaussian(sigma_flow);
        f.flow.y() += rng.gaussian(sigma_flow);
        obs.samples.push_back(f);
      }
      EkfConfig run_cfg = cfg;
      run_cfg.r_odom_v = sigma_v * sigma_v;
      run_cfg.r_odom_w = sigma_w * sigma_w;
      run_cfg.r_flow = sigma_flow * sigma_flow;
      s = predict(s, run_cfg, dt);
      s = update(s, run_cfg, obs);
    }
    Eigen::Vector4d err;
    err << s.v - v_true, s.d_f - 1.0 / z_true;
    nees_sum += err.dot(s.P.ldlt().solve(err));
  }
  const double avg_nees = nees_sum / runs;
  // Wilson-Hilferty bounds for chi2 with 4*runs dof, scaled by runs.
  const int dof = 4 * runs;
  auto chi2_quantile = [&](double zq) {
    const double h = 2.0 / (9.0 * dof);
    return dof * std::pow(1.0 - h + zq * std::sqrt(h), 3.0);
  };
  const double lo = chi2_quantile(-1.96) / runs;
  const double hi = chi2_quantile(1.96) / runs;
  INFO("avg NEES = " << avg_nees << " band [" << lo << ", " << hi << "]");
  CHECK(avg_nees >= lo);
  CHECK(avg_nees <= hi);
}

TEST_SUITE_END();

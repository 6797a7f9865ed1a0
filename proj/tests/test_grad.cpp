#include "support.hpp"

#include <doctest.h>

using namespace springfit;
using namespace springfit::testing;

namespace {

/// One object node tied to one driven controller node, plus an unconnected
/// controller node. Two frames, one substep: the loss has a closed form.
struct OneSpring
{
  SystemTopology topology;
  PhysicsConfig config;
  ControllerTrajectory controller;
  ObservationSequence observations;
  Vec3d observed = Vec3d(0.004, -0.002, 0.051);
  Vec3d tracked = Vec3d(0.001, 0.003, 0.049);
};

OneSpring one_spring()
{
  OneSpring c;
  const Vec3d x0(0.0, 0.0, 0.05);
  const Vec3d c0(0.012, 0.003, 0.056);
  const Vec3d c1(0.015, 0.001, 0.060);
  const Vec3d far(1.0, 1.0, 1.0);
  c.topology.rest.resize(3, 3);
  c.topology.rest << x0, c0, far;
  c.topology.mass = Eigen::VectorXd::Ones(3);
  c.topology.object_count = 1;
  c.topology.springs = {Spring{0, 1, 350.0, 1.7, 0.009, SpringKind::contact}};
  c.topology.object_spring_count = 0;
  c.config.global.collision.ground_height = -1.0;
  c.config.gravity = Vec3d(0.0, 0.0, -9.8);
  c.config.frame_dt = 1.0 / 30.0;
  c.config.substeps = 1;
  c.controller.frame_dt = c.config.frame_dt;
  PointCloud f0(3, 2), f1(3, 2);
  f0 << c0, far;
  f1 << c1, far;
  c.controller.frames = {f0, f1};
  c.observations.frame_dt = c.config.frame_dt;
  c.observations.clouds = {PointCloud(x0), PointCloud(c.observed)};
  c.observations.tracks = {PointCloud(x0), PointCloud(c.tracked)};
  return c;
}

/// Noise-free scene whose observations come from the simulator at its own
/// substep count, so the true parameters are an exact zero of the loss.
std::pair<Scene, ObservationSequence> self_consistent_scene()
{
  SceneSpec spec;
  spec.counts = {6, 6, 1};
  spec.controller_rows = spec.controller_cols = 4;
  spec.sparse_k = 8;
  spec.truth = {0.021, 8, 400.0, {0.0, 1.0, 0.0}};
  spec.frames = 8;
  spec.substeps = 8;
  spec.reference_factor = 1;
  spec.amplitude = 0.01;
  return generate(spec);
}

} // namespace

TEST_CASE("one-substep gradient matches the closed form")
{
  const OneSpring c = one_spring();
  const double lambda = 0.7;
  const Spring& sp = c.topology.springs.front();
  const double dt = c.config.frame_dt;
  const Vec3d x0 = c.topology.rest.col(0);
  const Vec3d c0 = c.controller.frames[0].col(0);
  const Vec3d vc = (c.controller.frames[1].col(0) - c0) / dt;
  const Vec3d d = c0 - x0;
  const double len = d.norm();
  const Vec3d u = d / len;
  const Vec3d f_spring = sp.stiffness * (len - sp.rest_length) * u;
  const Vec3d f_damp = sp.damping * vc;
  const Vec3d x1 = x0 + dt * dt * (f_spring + f_damp + c.config.gravity);
  const Vec3d g = 4.0 * (x1 - c.observed) + 2.0 * lambda * (x1 - c.tracked);
  const double loss = 2.0 * (x1 - c.observed).squaredNorm() + lambda * (x1 - c.tracked).squaredNorm();
  const Eigen::Matrix3d jac =
    sp.stiffness * ((1.0 - sp.rest_length / len) * Eigen::Matrix3d::Identity() + (sp.rest_length / len) * u * u.transpose());
  const Vec3d d_c0 = dt * dt * jac.transpose() * g - dt * sp.damping * g;
  const Vec3d d_c1 = dt * sp.damping * g;

  const GradientReport r = loss_and_grad(c.topology, c.config, spring_params(c.topology), c.controller,
                                         c.observations, lambda);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  CHECK(rel(r.loss, loss) <= 1e-10);
  REQUIRE(r.d_log_params.size() == 2);
  CHECK(rel(r.d_log_params[0], g.dot(dt * dt * f_spring)) <= 1e-10);
  CHECK(rel(r.d_log_params[1], g.dot(dt * dt * f_damp)) <= 1e-10);
  for (int k = 0; k < 3; ++k) {
    CHECK(rel(r.d_controller[0](k, 0), d_c0[k]) <= 1e-10);
    CHECK(rel(r.d_controller[1](k, 0), d_c1[k]) <= 1e-10);
  }
  // The far controller node has no springs and so no dynamic path.
  CHECK(r.d_controller[0].col(1).isZero(0.0));
  CHECK(r.d_controller[1].col(1).isZero(0.0));
}

TEST_CASE("spring-parameter gradients match finite differences")
{
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    CAPTURE(seed);
    const GradientCase g = make_gradient_case(seed, 16 + 5 * static_cast<Eigen::Index>(seed), 4 + static_cast<int>(seed), 3 + static_cast<int>(seed) % 6);
    const FdStats s = check_param_gradient(g);
    CHECK(s.checked >= 30);
    CHECK(s.worst <= 1e-4);
  }
}

TEST_CASE("controller gradients match finite differences")
{
  for (std::uint64_t seed = 11; seed <= 15; ++seed) {
    CAPTURE(seed);
    const GradientCase g = make_gradient_case(seed, 20, 5, 4);
    const FdStats s = check_controller_gradient(g);
    CHECK(s.checked >= 30);
    CHECK(s.worst <= 1e-4);
  }
}

TEST_CASE("track weight enters linearly")
{
  const GradientCase g = make_gradient_case(3);
  const GradientReport a = loss_and_grad(g.topology, g.config, g.params, g.controller, g.observations, 0.0);
  const GradientReport b = loss_and_grad(g.topology, g.config, g.params, g.controller, g.observations, 1.0);
  const GradientReport c = loss_and_grad(g.topology, g.config, g.params, g.controller, g.observations, 2.0);
  CHECK(std::abs((c.loss - b.loss) - (b.loss - a.loss)) <= 1e-12 * c.loss);
  CHECK(((c.d_log_params - b.d_log_params) - (b.d_log_params - a.d_log_params)).norm() <=
        1e-9 * c.d_log_params.norm());
}

TEST_CASE("gradient vanishes at the true parameters of a noise-free scene")
{
  const auto [scene, obs] = self_consistent_scene();
  const PhysicsConfig cfg = scene.spec.physics();
  const SpringParams truth = spring_params(scene.truth.topology);
  const GradientReport at_truth =
    loss_and_grad(scene.truth.topology, cfg, truth, scene.truth.controller, obs, 1.0);
  SpringParams doubled = truth;
  doubled.stiffness *= 2.0;
  const GradientReport perturbed =
    loss_and_grad(scene.truth.topology, cfg, doubled, scene.truth.controller, obs, 1.0);
  CHECK(at_truth.loss <= 1e-20);
  REQUIRE(perturbed.d_log_params.norm() > 0.0);
  CHECK(at_truth.d_log_params.norm() <= 1e-6 * perturbed.d_log_params.norm());
}

TEST_CASE("displaced static controller is pulled back")
{
  SceneSpec spec;
  spec.counts = {6, 6, 1};
  spec.controller_rows = spec.controller_cols = 4;
  spec.sparse_k = 8;
  spec.truth = {0.021, 8, 400.0, {0.0, 1.0, 0.0}};
  spec.frames = 6;
  spec.substeps = 8;
  spec.reference_factor = 1;
  spec.amplitude = 0.0;
  const auto [scene, obs] = generate(spec);
  ControllerTrajectory moved = scene.truth.controller;
  for (std::size_t f = 1; f < moved.frames.size(); ++f)
    moved.frames[f].row(0).array() += 0.002;
  const SpringParams p = spring_params(scene.truth.topology);
  const GradientReport r = loss_and_grad_controller(scene.truth.topology, spec.physics(), p, moved, obs, 1.0);
  // Descending the gradient moves the displaced frames back along -x.
  double along_x = 0.0;
  for (std::size_t f = 1; f < moved.frames.size(); ++f)
    along_x += r.d_controller[f].row(0).sum();
  CHECK(along_x > 0.0);
  CHECK(r.loss > 0.0);
}

TEST_CASE("gradient evaluation reports frame-count mismatch and divergence")
{
  GradientCase g = make_gradient_case(4);
  ObservationSequence short_obs = g.observations;
  short_obs.clouds.pop_back();
  short_obs.tracks.pop_back();
  CHECK_THROWS_AS(loss_and_grad(g.topology, g.config, g.params, g.controller, short_obs, 1.0), std::invalid_argument);
  SpringParams huge = g.params;
  huge.stiffness.setConstant(1e9);
  CHECK_THROWS_AS(loss_and_grad(g.topology, g.config, huge, g.controller, g.observations, 1.0), SimulationDiverged);
}

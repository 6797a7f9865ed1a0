#pragma once

// Shared oracles and fixtures for the unit and acceptance tests.

#include <springfit/fit.hpp>
#include <springfit/scenegen.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace springfit::testing {

inline PointCloud random_cloud(std::mt19937_64& rng, Eigen::Index n, double extent = 1.0)
{
  std::uniform_real_distribution<double> u(0.0, extent);
  PointCloud p(3, n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (int d = 0; d < 3; ++d)
      p(d, c) = u(rng);
  return p;
}

/// Exhaustive scan sorted by (distance, index).
inline std::vector<Neighbor> brute_knn(const PointCloud& pts, const Vec3d& q, Eigen::Index k)
{
  std::vector<std::pair<double, Eigen::Index>> all;
  for (Eigen::Index i = 0; i < pts.cols(); ++i)
    all.emplace_back((pts.col(i) - q).squaredNorm(), i);
  std::sort(all.begin(), all.end());
  std::vector<Neighbor> out;
  for (Eigen::Index i = 0; i < k; ++i)
    out.push_back({all[static_cast<std::size_t>(i)].second, std::sqrt(all[static_cast<std::size_t>(i)].first)});
  return out;
}

inline std::vector<Neighbor> brute_radius(const PointCloud& pts, const Vec3d& q, double r)
{
  std::vector<std::pair<double, Eigen::Index>> all;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const double sq = (pts.col(i) - q).squaredNorm();
    if (sq <= r * r)
      all.emplace_back(sq, i);
  }
  std::sort(all.begin(), all.end());
  std::vector<Neighbor> out;
  for (const auto& [sq, i] : all)
    out.push_back({i, std::sqrt(sq)});
  return out;
}

inline double brute_directed(const PointCloud& a, const PointCloud& b)
{
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      best = std::min(best, (a.col(i) - b.col(j)).squaredNorm());
    sum += best;
  }
  return sum / static_cast<double>(a.cols());
}

inline double brute_chamfer(const PointCloud& a, const PointCloud& b)
{
  return brute_directed(a, b) + brute_directed(b, a);
}

/// Small random spring system with random per-spring parameters, a moving
/// controller and observations produced by a different parameter set plus
/// jitter, so the loss and its gradients are far from zero.
struct GradientCase
{
  SystemTopology topology;
  PhysicsConfig config;
  SpringParams params;
  ControllerTrajectory controller;
  ObservationSequence observations;
};

inline GradientCase make_gradient_case(std::uint64_t seed, Eigen::Index nodes = 24, int frames = 6,
                                       int substeps = 6)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GradientCase g;

  PointCloud rest(3, nodes);
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nodes))));
  for (Eigen::Index i = 0; i < nodes; ++i)
    rest.col(i) = Vec3d(0.01 * static_cast<double>(i % side), 0.01 * static_cast<double>(i / side), 0.05) +
                  0.002 * Vec3d(u(rng), u(rng), u(rng));

  ControllerTrajectory ctl;
  ctl.frame_dt = 1.0 / 30.0;
  PointCloud c0(3, 4);
  for (int k = 0; k < 4; ++k)
    c0.col(k) = rest.col(k) + Vec3d(0.0, 0.0, 0.004);
  const Vec3d drift(0.004 * u(rng), 0.004 * u(rng), 0.006);
  for (int f = 0; f < frames; ++f) {
    PointCloud cf = c0;
    const double s = static_cast<double>(f) / (frames - 1);
    cf.colwise() += s * drift;
    for (int k = 0; k < 4; ++k)
      cf.col(k) += 0.0005 * s * Vec3d(u(rng), u(rng), u(rng));
    ctl.frames.push_back(cf);
  }
  g.controller = ctl;

  GlobalParams global{0.017, 6, 200.0, {0.0, 0.8, 0.2}};
  g.topology = build_topology(rest, ctl.frames.front(), global);
  g.config.global = global;
  g.config.gravity = Vec3d(0.0, 0.0, -0.5);
  g.config.frame_dt = ctl.frame_dt;
  g.config.substeps = substeps;

  g.params = spring_params(g.topology);
  for (Eigen::Index k = 0; k < g.params.size(); ++k) {
    g.params.stiffness[k] *= std::exp(0.5 * u(rng));
    g.params.damping[k] *= std::exp(0.5 * u(rng));
  }

  // Observations from perturbed physics, jittered, with half the nodes tracked.
  SystemTopology other = g.topology;
  for (auto& s : other.springs)
    s.stiffness *= 1.8;
  const auto frames_obs = object_frames(rollout(other, g.config, ctl), other.object_count);
  std::normal_distribution<double> jitter(0.0, 0.001);
  g.observations.frame_dt = ctl.frame_dt;
  for (const auto& f : frames_obs) {
    PointCloud cloud = f;
    for (Eigen::Index c = 0; c < cloud.cols(); ++c)
      for (int d = 0; d < 3; ++d)
        cloud(d, c) += jitter(rng);
    g.observations.clouds.push_back(cloud);
    PointCloud tracks(3, nodes / 2);
    for (Eigen::Index k = 0; k < nodes / 2; ++k)
      tracks.col(k) = f.col(2 * k);
    g.observations.tracks.push_back(tracks);
  }
  return g;
}

struct FdStats
{
  double worst = 0.0;  // largest relative error over checked components
  Eigen::Index checked = 0;
  Eigen::Index total = 0;
};

/// Relative error per component, for components whose magnitude exceeds `floor`
/// in either estimate.
inline void compare(const Eigen::VectorXd& analytic, const Eigen::VectorXd& fd, double floor, FdStats& stats)
{
  for (Eigen::Index k = 0; k < analytic.size(); ++k) {
    ++stats.total;
    const double scale = std::max(std::abs(analytic[k]), std::abs(fd[k]));
    if (scale <= floor)
      continue;
    ++stats.checked;
    stats.worst = std::max(stats.worst, std::abs(analytic[k] - fd[k]) / scale);
  }
}

/// Central difference with step h, Richardson-extrapolated against step h/2 to
/// cancel the O(h^2) truncation term.
template <typename F>
double richardson(F&& f, double h)
{
  const double wide = (f(h) - f(-h)) / (2.0 * h);
  const double narrow = (f(0.5 * h) - f(-0.5 * h)) / h;
  return (4.0 * narrow - wide) / 3.0;
}

inline FdStats check_param_gradient(const GradientCase& g, double lambda_tr = 1.0, double h = 1e-5,
                                    double floor = 1e-8)
{
  const GradientReport r =
    loss_and_grad_params(g.topology, g.config, g.params, g.controller, g.observations, lambda_tr);
  const Eigen::VectorXd base = g.params.to_log();
  Eigen::VectorXd fd(base.size());
  auto loss_at = [&](Eigen::Index k, double step) {
    Eigen::VectorXd p = base;
    p[k] += step;
    SystemTopology t = g.topology;
    apply_spring_params(t, SpringParams::from_log(p));
    return rollout_loss(t, g.config, g.controller, g.observations, lambda_tr);
  };
  for (Eigen::Index k = 0; k < base.size(); ++k)
    fd[k] = richardson([&](double step) { return loss_at(k, step); }, h);
  FdStats stats;
  compare(r.d_log_params, fd, floor, stats);
  return stats;
}

inline FdStats check_controller_gradient(const GradientCase& g, double lambda_tr = 1.0, double h = 1e-5,
                                         double floor = 1e-8)
{
  const GradientReport r =
    loss_and_grad_controller(g.topology, g.config, g.params, g.controller, g.observations, lambda_tr);
  SystemTopology topo = g.topology;
  apply_spring_params(topo, g.params);
  Eigen::VectorXd fd(r.controller_flat().size());
  Eigen::Index k = 0;
  for (std::size_t f = 0; f < g.controller.frames.size(); ++f)
    for (Eigen::Index c = 0; c < g.controller.node_count(); ++c)
      for (int d = 0; d < 3; ++d)
        fd[k++] = richardson(
          [&](double step) {
            ControllerTrajectory moved = g.controller;
            moved.frames[f](d, c) += step;
            return rollout_loss(topo, g.config, moved, g.observations, lambda_tr);
          },
          h);
  FdStats stats;
  compare(r.controller_flat(), fd, floor, stats);
  return stats;
}

} // namespace springfit::testing

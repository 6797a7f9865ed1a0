#pragma once

#include <springfit/grad.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace springfit {

/// Everything a fit needs besides its hyperparameters. Gravity, frame dt,
/// substeps and ground height in `config` are treated as known constants.
struct FitProblem
{
  PointCloud object_rest;
  ControllerTrajectory controller;
  ObservationSequence observations;
  PhysicsConfig config;
  double lambda_tr = 1.0;
};

/// Zero-order search settings. Bounds apply to the searched quantities.
struct ZeroOrderConfig
{
  int iterations = 100;  // generations
  int population = 16;  // 8 stalls in radius/degree basins depending on the start
  std::uint64_t seed = 0;
  GlobalParams initial;  // radius 0.002 m, degree 3, stiffness 1000 N/m
  double min_radius = 5e-4;
  double max_radius = 0.08;
  int max_degree_bound = 50;
  double min_stiffness = 1.0;
  double max_stiffness = 1e5;
  bool search_collision = true;
  /// Initial sampling spread on the unit-normalized search box.
  double initial_spread = 0.3;
  /// Generations without a relative gain above `min_relative_gain` before the
  /// search restarts.
  int patience = 15;
  double min_relative_gain = 1e-3;
};

/// Adaptive-moment gradient descent settings; the learning rate is multiplied
/// by `decay` after every step.
struct AdamConfig
{
  int iterations = 200;
  double learning_rate = 1e-3;
  double decay = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamConfig first_order() { return {}; }
  static AdamConfig refinement() { return {40, 2e-5, 0.99}; }
};

struct FitResult
{
  GlobalParams global;
  /// Topology built from `global`, carrying the fitted per-spring parameters.
  SystemTopology topology;
  double loss = 0.0;
  std::vector<double> zero_order_curve;   // best-so-far loss per iteration
  std::vector<double> first_order_curve;  // loss at every evaluated iterate
  std::vector<double> refine_curve;
  std::optional<ControllerTrajectory> refined_controller;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::vector<std::string> warnings;
};

/// Covariance-adapting evolution strategy with restarts over (log radius, max
/// degree, log stiffness and, optionally, the collision factors) with
/// homogeneous spring parameters. Returns the best candidate seen. Throws when
/// every candidate fails.
FitResult fit_zero_order(const FitProblem& problem, const ZeroOrderConfig& config);

/// Adam over per-spring log-stiffness and log-damping on the topology of
/// `start`. Returns the lowest-loss iterate.
FitResult fit_first_order(const FitProblem& problem, const FitResult& start, const AdamConfig& config);

/// Adam over every controller position of every frame with the object model
/// of `model` held fixed. Returns the lowest-loss trajectory.
FitResult refine_controller(const FitProblem& problem, const FitResult& model, const AdamConfig& config);

/// Zero-order then first-order.
FitResult fit_pipeline(const FitProblem& problem, const ZeroOrderConfig& zero_order,
                       const AdamConfig& first_order);

/// Fitting loss of a homogeneous model built from `global`; +inf when the
/// topology has no contact or the rollout diverges.
double evaluate_global(const FitProblem& problem, const GlobalParams& global);

/// Runs `fn(i)` for i in [0, count) on up to hardware_concurrency threads.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

} // namespace springfit

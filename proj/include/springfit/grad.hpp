#pragma once

#include <springfit/observations.hpp>
#include <springfit/sim.hpp>

namespace springfit {

/// Loss value and its gradients. Spring gradients are taken with respect to
/// log-stiffness and log-damping and interleaved like SpringParams::to_log.
struct GradientReport
{
  double loss = 0.0;
  Eigen::VectorXd d_log_params;
  /// d(loss)/d(controller position), one 3 x C block per frame.
  std::vector<PointCloud> d_controller;

  Eigen::VectorXd d_log_stiffness() const;
  Eigen::VectorXd d_log_damping() const;
  /// All controller gradients flattened frame-major.
  Eigen::VectorXd controller_flat() const;
};

/// Fitting loss of a full rollout, (1/T) sum_t [chamfer_t + lambda_tr * track_t]
/// over frames 1..T. Throws SimulationDiverged.
double rollout_loss(const SystemTopology& topology, const PhysicsConfig& config,
                    const ControllerTrajectory& controller, const ObservationSequence& observations,
                    double lambda_tr);

/// Reverse-mode gradients through every substep of the rollout. The topology
/// (including rest lengths) is held fixed; `params` overrides its per-spring
/// stiffness and damping.
GradientReport loss_and_grad(const SystemTopology& topology, const PhysicsConfig& config,
                             const SpringParams& params, const ControllerTrajectory& controller,
                             const ObservationSequence& observations, double lambda_tr);

/// Same evaluation; named for the spring-parameter use.
GradientReport loss_and_grad_params(const SystemTopology& topology, const PhysicsConfig& config,
                                    const SpringParams& params,
                                    const ControllerTrajectory& controller,
                                    const ObservationSequence& observations, double lambda_tr);

/// Same evaluation; named for the controller-trajectory use.
GradientReport loss_and_grad_controller(const SystemTopology& topology, const PhysicsConfig& config,
                                        const SpringParams& params,
                                        const ControllerTrajectory& controller,
                                        const ObservationSequence& observations, double lambda_tr);

} // namespace springfit

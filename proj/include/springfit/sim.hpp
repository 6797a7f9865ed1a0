#pragma once

#include <springfit/model.hpp>

#include <vector>

namespace springfit {

/// Springs shorter than this contribute no elastic force.
inline constexpr double kLengthGuard = 1e-9;

/// Hooke force on node i from a spring to node j.
template <typename Scalar>
Vec3<Scalar> spring_force(const Vec3<Scalar>& xi, const Vec3<Scalar>& xj, Scalar stiffness,
                          Scalar rest_length, Scalar guard = Scalar(kLengthGuard))
{
  const Vec3<Scalar> d = xj - xi;
  const Scalar len = d.norm();
  if (len <= guard)
    return Vec3<Scalar>::Zero();
  return stiffness * (len - rest_length) * (d / len);
}

/// Dashpot force on node i. Damps the full relative velocity, not only its
/// component along the spring.
template <typename Scalar>
Vec3<Scalar> damping_force(const Vec3<Scalar>& vi, const Vec3<Scalar>& vj, Scalar damping)
{
  return -damping * (vi - vj);
}

struct SimState
{
  PointCloud positions;  // all nodes, topology order
  PointCloud velocities;
  double time = 0.0;
  /// Number of spring evaluations skipped by the length guard so far.
  std::size_t coincident_springs = 0;

  PointCloud object_positions(Eigen::Index object_count) const
  {
    return positions.leftCols(object_count);
  }
};

/// Per-frame controller node positions; constant node count, >= 2 frames.
struct ControllerTrajectory
{
  std::vector<PointCloud> frames;
  double frame_dt = 1.0 / 30.0;

  Eigen::Index frame_count() const { return static_cast<Eigen::Index>(frames.size()); }
  Eigen::Index node_count() const { return frames.empty() ? 0 : frames.front().cols(); }
  void validate() const;
  /// Trajectory restricted to the given controller nodes.
  ControllerTrajectory select(const std::vector<Eigen::Index>& nodes) const;
};

/// Boundary condition for one substep: controller positions at the end of the
/// substep and the (piecewise-constant) controller velocity during it.
struct ControllerTarget
{
  PointCloud positions;
  PointCloud velocities;
};

/// Linear interpolation inside frame interval `frame` -> `frame + 1` at
/// fraction `k / substeps`.
PointCloud controller_position(const ControllerTrajectory& traj, Eigen::Index frame, int k,
                               int substeps);
PointCloud controller_velocity(const ControllerTrajectory& traj, Eigen::Index frame);
ControllerTarget controller_target(const ControllerTrajectory& traj, Eigen::Index frame, int k,
                                   int substeps);

Vec3d spring_force(const SimState& state, const Spring& spring);
Vec3d damping_force(const SimState& state, const Spring& spring);

/// Object nodes at rest with zero velocity, controller nodes at frame 0.
SimState initial_state(const SystemTopology& topology, const ControllerTrajectory& controller);

/// One semi-implicit Euler substep of length `config.substep_dt()`. Throws
/// SimulationDiverged on any non-finite component.
SimState step(const SimState& state, const SystemTopology& topology, const PhysicsConfig& config,
              const ControllerTarget& target);

/// One state per frame, frame 0 being `initial`.
std::vector<SimState> rollout(const SystemTopology& topology, const PhysicsConfig& config,
                              const ControllerTrajectory& controller, const SimState& initial);
std::vector<SimState> rollout(const SystemTopology& topology, const PhysicsConfig& config,
                              const ControllerTrajectory& controller);

/// Object node positions of every frame.
std::vector<PointCloud> object_frames(const std::vector<SimState>& frames, Eigen::Index object_count);

/// Kinetic + spring potential + gravitational energy of the object nodes.
double mechanical_energy(const SimState& state, const SystemTopology& topology, const Vec3d& gravity);

/// Sum of spring and damping forces over every node, controller reactions
/// included. Zero up to rounding by Newton's third law.
Vec3d net_internal_force(const SimState& state, const SystemTopology& topology);

} // namespace springfit

#include <springfit/sim.hpp>

#include "dynamics.hpp"

namespace springfit {

void ControllerTrajectory::validate() const
{
  if (frames.size() < 2)
    throw std::invalid_argument("controller trajectory needs at least 2 frames");
  if (!(frame_dt > 0.0))
    throw std::invalid_argument("controller frame dt must be positive");
  for (const auto& f : frames) {
    if (f.cols() != frames.front().cols())
      throw std::invalid_argument("controller node count changes across frames");
    if (!f.allFinite())
      throw std::invalid_argument("controller trajectory contains non-finite positions");
  }
}

ControllerTrajectory ControllerTrajectory::select(const std::vector<Eigen::Index>& nodes) const
{
  ControllerTrajectory out;
  out.frame_dt = frame_dt;
  out.frames.reserve(frames.size());
  for (const auto& f : frames) {
    PointCloud sub(3, static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t k = 0; k < nodes.size(); ++k)
      sub.col(static_cast<Eigen::Index>(k)) = f.col(nodes[k]);
    out.frames.push_back(std::move(sub));
  }
  return out;
}

PointCloud controller_position(const ControllerTrajectory& traj, Eigen::Index frame, int k,
                               int substeps)
{
  PointCloud x(3, traj.node_count());
  detail::interpolate_controller(traj, frame, k, substeps, x, 0);
  return x;
}

PointCloud controller_velocity(const ControllerTrajectory& traj, Eigen::Index frame)
{
  PointCloud v(3, traj.node_count());
  detail::controller_interval_velocity(traj, frame, v, 0);
  return v;
}

ControllerTarget controller_target(const ControllerTrajectory& traj, Eigen::Index frame, int k,
                                   int substeps)
{
  return {controller_position(traj, frame, k + 1, substeps), controller_velocity(traj, frame)};
}

Vec3d spring_force(const SimState& state, const Spring& spring)
{
  return spring_force<double>(state.positions.col(spring.i), state.positions.col(spring.j),
                              spring.stiffness, spring.rest_length);
}

Vec3d damping_force(const SimState& state, const Spring& spring)
{
  return damping_force<double>(state.velocities.col(spring.i), state.velocities.col(spring.j),
                               spring.damping);
}

SimState initial_state(const SystemTopology& topology, const ControllerTrajectory& controller)
{
  if (controller.node_count() != topology.controller_count())
    throw std::invalid_argument("controller trajectory does not match topology controller nodes");
  SimState s;
  s.positions = topology.rest;
  s.velocities = PointCloud::Zero(3, topology.node_count());
  if (topology.controller_count() > 0)
    s.positions.rightCols(topology.controller_count()) = controller.frames.front();
  return s;
}

namespace {

void advance(SimState& s, const detail::SpringArrays& springs, const SystemTopology& topology,
             const PhysicsConfig& config, const PointCloud& target_x, const PointCloud& target_v,
             PointCloud& force)
{
  const Eigen::Index n_obj = topology.object_count;
  const Eigen::Index n_ctl = topology.controller_count();
  const double dt = config.substep_dt();
  s.velocities.rightCols(n_ctl) = target_v;
  s.coincident_springs += detail::accumulate_forces(s.positions, s.velocities, springs, force);
  detail::integrate_objects(s.positions, s.velocities, force, topology.mass, n_obj, dt,
                            config.gravity, config.global.collision, nullptr);
  s.positions.rightCols(n_ctl) = target_x;
  s.time += dt;
}

} // namespace

SimState step(const SimState& state, const SystemTopology& topology, const PhysicsConfig& config,
              const ControllerTarget& target)
{
  const detail::SpringArrays springs(topology);
  SimState next = state;
  PointCloud force;
  advance(next, springs, topology, config, target.positions, target.velocities, force);
  if (!detail::objects_finite(next.positions, next.velocities, topology.object_count))
    throw SimulationDiverged(0, 0);
  return next;
}

std::vector<SimState> rollout(const SystemTopology& topology, const PhysicsConfig& config,
                              const ControllerTrajectory& controller, const SimState& initial)
{
  config.validate();
  controller.validate();
  if (controller.node_count() != topology.controller_count())
    throw std::invalid_argument("controller trajectory does not match topology controller nodes");

  const detail::SpringArrays springs(topology);
  const Eigen::Index n_obj = topology.object_count;
  const Eigen::Index n_ctl = topology.controller_count();
  const int substeps = config.substeps;

  std::vector<SimState> frames;
  frames.reserve(controller.frames.size());
  frames.push_back(initial);
  SimState s = initial;
  PointCloud force;
  PointCloud target_x(3, n_ctl);
  PointCloud target_v(3, n_ctl);
  long substep_index = 0;
  for (Eigen::Index f = 0; f + 1 < controller.frame_count(); ++f) {
    detail::controller_interval_velocity(controller, f, target_v, 0);
    for (int k = 0; k < substeps; ++k, ++substep_index) {
      detail::interpolate_controller(controller, f, k + 1, substeps, target_x, 0);
      advance(s, springs, topology, config, target_x, target_v, force);
      if (!detail::objects_finite(s.positions, s.velocities, n_obj))
        throw SimulationDiverged(substep_index, f + 1);
    }
    frames.push_back(s);
  }
  return frames;
}

std::vector<SimState> rollout(const SystemTopology& topology, const PhysicsConfig& config,
                              const ControllerTrajectory& controller)
{
  return rollout(topology, config, controller, initial_state(topology, controller));
}

std::vector<PointCloud> object_frames(const std::vector<SimState>& frames, Eigen::Index object_count)
{
  std::vector<PointCloud> out;
  out.reserve(frames.size());
  for (const auto& s : frames)
    out.push_back(s.object_positions(object_count));
  return out;
}

double mechanical_energy(const SimState& state, const SystemTopology& topology, const Vec3d& gravity)
{
  double e = 0.0;
  for (Eigen::Index n = 0; n < topology.object_count; ++n) {
    e += 0.5 * topology.mass[n] * state.velocities.col(n).squaredNorm();
    e -= topology.mass[n] * gravity.dot(state.positions.col(n));
  }
  for (const Spring& s : topology.springs) {
    const double stretch = (state.positions.col(s.j) - state.positions.col(s.i)).norm() - s.rest_length;
    e += 0.5 * s.stiffness * stretch * stretch;
  }
  return e;
}

Vec3d net_internal_force(const SimState& state, const SystemTopology& topology)
{
  PointCloud force;
  detail::accumulate_forces(state.positions, state.velocities, detail::SpringArrays(topology), force);
  return force.rowwise().sum();
}

} // namespace springfit

#pragma once

// Shared forward kernels for the simulator and its adjoint.

#include <springfit/sim.hpp>

#include <cstdint>
#include <vector>

namespace springfit::detail {

struct SpringArrays
{
  std::vector<Eigen::Index> i, j;
  std::vector<double> stiffness, damping, rest;

  explicit SpringArrays(const SystemTopology& topology)
  {
    const std::size_t n = topology.springs.size();
    i.reserve(n);
    j.reserve(n);
    stiffness.reserve(n);
    damping.reserve(n);
    rest.reserve(n);
    for (const Spring& s : topology.springs) {
      i.push_back(s.i);
      j.push_back(s.j);
      stiffness.push_back(s.stiffness);
      damping.push_back(s.damping);
      rest.push_back(s.rest_length);
    }
  }

  std::size_t size() const { return i.size(); }
};

/// Writes spring + damping forces on every node into `force` (reactions on
/// controller nodes included). Returns the number of guarded springs.
inline std::size_t accumulate_forces(const PointCloud& x, const PointCloud& v,
                                     const SpringArrays& springs, PointCloud& force)
{
  force.setZero(3, x.cols());
  std::size_t guarded = 0;
  for (std::size_t k = 0; k < springs.size(); ++k) {
    const Eigen::Index a = springs.i[k];
    const Eigen::Index b = springs.j[k];
    const Vec3d d = x.col(b) - x.col(a);
    const double len = d.norm();
    Vec3d f = -springs.damping[k] * (v.col(a) - v.col(b));
    if (len > kLengthGuard)
      f += springs.stiffness[k] * (len - springs.rest[k]) * (d / len);
    else
      ++guarded;
    force.col(a) += f;
    force.col(b) -= f;
  }
  return guarded;
}

/// Semi-implicit Euler update of the object nodes followed by the ground
/// response. `contact`, when given, receives one flag per object node.
inline void integrate_objects(PointCloud& x, PointCloud& v, const PointCloud& force,
                              const Eigen::VectorXd& mass, Eigen::Index object_count, double dt,
                              const Vec3d& gravity, const CollisionParams& collision,
                              std::vector<std::uint8_t>* contact)
{
  if (contact)
    contact->assign(static_cast<std::size_t>(object_count), 0);
  for (Eigen::Index n = 0; n < object_count; ++n) {
    v.col(n) += dt * (force.col(n) / mass[n] + gravity);
    x.col(n) += dt * v.col(n);
    if (x(2, n) < collision.ground_height) {
      x(2, n) = collision.ground_height;
      v(2, n) *= -collision.restitution;
      v(0, n) *= collision.friction_retention;
      v(1, n) *= collision.friction_retention;
      if (contact)
        (*contact)[static_cast<std::size_t>(n)] = 1;
    }
  }
}

/// Desk-scale scenes never reach this; larger magnitudes mean the explicit
/// integrator has blown up even if the numbers are still finite.
inline constexpr double kBlowUpBound = 1e4;

inline bool objects_finite(const PointCloud& x, const PointCloud& v, Eigen::Index object_count)
{
  if (object_count == 0)
    return true;
  const auto xo = x.leftCols(object_count);
  const auto vo = v.leftCols(object_count);
  return xo.allFinite() && vo.allFinite() && xo.cwiseAbs().maxCoeff() <= kBlowUpBound &&
         vo.cwiseAbs().maxCoeff() <= kBlowUpBound;
}

/// Controller position at substep fraction k/substeps of interval `frame`.
inline void interpolate_controller(const ControllerTrajectory& traj, Eigen::Index frame, int k,
                                   int substeps, PointCloud& x, Eigen::Index offset)
{
  const PointCloud& a = traj.frames[static_cast<std::size_t>(frame)];
  const PointCloud& b = traj.frames[static_cast<std::size_t>(frame + 1)];
  const double w = static_cast<double>(k) / substeps;
  x.middleCols(offset, a.cols()) = a + w * (b - a);
}

inline void controller_interval_velocity(const ControllerTrajectory& traj, Eigen::Index frame,
                                         PointCloud& v, Eigen::Index offset)
{
  const PointCloud& a = traj.frames[static_cast<std::size_t>(frame)];
  const PointCloud& b = traj.frames[static_cast<std::size_t>(frame + 1)];
  v.middleCols(offset, a.cols()) = (b - a) / traj.frame_dt;
}

} // namespace springfit::detail

#include <springfit/grad.hpp>

#include "dynamics.hpp"

#include <cmath>
#include <string>

namespace springfit {

Eigen::VectorXd GradientReport::d_log_stiffness() const
{
  return Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<2>>(d_log_params.data(),
                                                                     d_log_params.size() / 2);
}

Eigen::VectorXd GradientReport::d_log_damping() const
{
  return Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<2>>(d_log_params.data() + 1,
                                                                     d_log_params.size() / 2);
}

Eigen::VectorXd GradientReport::controller_flat() const
{
  Eigen::Index total = 0;
  for (const auto& f : d_controller)
    total += f.size();
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (const auto& f : d_controller) {
    out.segment(at, f.size()) = Eigen::Map<const Eigen::VectorXd>(f.data(), f.size());
    at += f.size();
  }
  return out;
}

namespace {

void check_frames(const ControllerTrajectory& controller, const ObservationSequence& observations)
{
  if (controller.frame_count() != observations.frame_count())
    throw std::invalid_argument("observation frame count (" + std::to_string(observations.frame_count()) +
                                ") differs from rollout frame count (" +
                                std::to_string(controller.frame_count()) + ")");
}

} // namespace

double rollout_loss(const SystemTopology& topology, const PhysicsConfig& config,
                    const ControllerTrajectory& controller, const ObservationSequence& observations,
                    double lambda_tr)
{
  check_frames(controller, observations);
  const FrameLoss loss(observations, topology.object_rest(), lambda_tr);
  return loss.sequence_loss(object_frames(rollout(topology, config, controller), topology.object_count));
}

GradientReport loss_and_grad(const SystemTopology& topology_in, const PhysicsConfig& config,
                             const SpringParams& params, const ControllerTrajectory& controller,
                             const ObservationSequence& observations, double lambda_tr)
{
  config.validate();
  controller.validate();
  check_frames(controller, observations);
  if (controller.node_count() != topology_in.controller_count())
    throw std::invalid_argument("controller trajectory does not match topology controller nodes");

  SystemTopology topology = topology_in;
  apply_spring_params(topology, params);
  const detail::SpringArrays springs(topology);
  const FrameLoss frame_loss(observations, topology.object_rest(), lambda_tr);

  const Eigen::Index n_obj = topology.object_count;
  const Eigen::Index n_ctl = topology.controller_count();
  const Eigen::Index frames = controller.frame_count();
  const int substeps = config.substeps;
  const double dt = config.substep_dt();
  const auto total_steps = static_cast<std::size_t>((frames - 1) * substeps);

  // Forward pass, recording the state each substep starts from.
  std::vector<PointCloud> tape_x(total_steps), tape_v(total_steps);
  std::vector<std::vector<std::uint8_t>> tape_contact(total_steps);
  std::vector<PointCloud> frame_x(static_cast<std::size_t>(frames));

  PointCloud x = topology.rest;
  PointCloud v = PointCloud::Zero(3, topology.node_count());
  x.rightCols(n_ctl) = controller.frames.front();
  frame_x[0] = x.leftCols(n_obj);
  PointCloud force;
  std::size_t n = 0;
  for (Eigen::Index f = 0; f + 1 < frames; ++f) {
    detail::controller_interval_velocity(controller, f, v, n_obj);
    for (int k = 0; k < substeps; ++k, ++n) {
      tape_x[n] = x;
      tape_v[n] = v;
      detail::accumulate_forces(x, v, springs, force);
      detail::integrate_objects(x, v, force, topology.mass, n_obj, dt, config.gravity,
                                config.global.collision, &tape_contact[n]);
      detail::interpolate_controller(controller, f, k + 1, substeps, x, n_obj);
      if (!detail::objects_finite(x, v, n_obj))
        throw SimulationDiverged(static_cast<long>(n), static_cast<long>(f + 1));
    }
    frame_x[static_cast<std::size_t>(f + 1)] = x.leftCols(n_obj);
  }

  GradientReport report;
  const double frame_weight = 1.0 / static_cast<double>(frames - 1);
  std::vector<PointCloud> frame_grad(static_cast<std::size_t>(frames));
  for (Eigen::Index t = 1; t < frames; ++t) {
    PointCloud g;
    report.loss += frame_weight * frame_loss.evaluate(t, frame_x[static_cast<std::size_t>(t)], &g);
    frame_grad[static_cast<std::size_t>(t)] = frame_weight * g;
  }

  // Reverse pass.
  const auto& collision = config.global.collision;
  Eigen::VectorXd d_stiffness = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(springs.size()));
  Eigen::VectorXd d_damping = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(springs.size()));
  report.d_controller.assign(static_cast<std::size_t>(frames), PointCloud::Zero(3, n_ctl));

  PointCloud x_bar = PointCloud::Zero(3, topology.node_count());
  PointCloud v_bar = PointCloud::Zero(3, topology.node_count());
  PointCloud f_bar = PointCloud::Zero(3, topology.node_count());
  for (Eigen::Index f = frames - 1; f >= 1; --f) {
    x_bar.leftCols(n_obj) += frame_grad[static_cast<std::size_t>(f)];
    const Eigen::Index interval = f - 1;
    PointCloud& c_from = report.d_controller[static_cast<std::size_t>(interval)];
    PointCloud& c_to = report.d_controller[static_cast<std::size_t>(f)];
    PointCloud u_bar = PointCloud::Zero(3, n_ctl);

    for (int k = substeps - 1; k >= 0; --k) {
      const std::size_t step = static_cast<std::size_t>(interval * substeps + k);
      const PointCloud& xs = tape_x[step];
      const PointCloud& vs = tape_v[step];
      const auto& contact = tape_contact[step];

      // Controller slots carry per-substep adjoints only; they are not state.
      x_bar.rightCols(n_ctl).setZero();
      v_bar.rightCols(n_ctl).setZero();

      for (Eigen::Index i = 0; i < n_obj; ++i) {
        if (contact[static_cast<std::size_t>(i)]) {
          x_bar(2, i) = 0.0;
          v_bar(2, i) *= -collision.restitution;
          v_bar(0, i) *= collision.friction_retention;
          v_bar(1, i) *= collision.friction_retention;
        }
        v_bar.col(i) += dt * x_bar.col(i);
        f_bar.col(i) = (dt / topology.mass[i]) * v_bar.col(i);
      }
      f_bar.rightCols(n_ctl).setZero();

      for (std::size_t s = 0; s < springs.size(); ++s) {
        const Eigen::Index a = springs.i[s];
        const Eigen::Index b = springs.j[s];
        const Vec3d w = f_bar.col(a) - f_bar.col(b);
        const Vec3d d = xs.col(b) - xs.col(a);
        const double len = d.norm();
        if (len > kLengthGuard) {
          const Vec3d dir = d / len;
          const double r = springs.rest[s];
          const double stiff = springs.stiffness[s];
          // d(force on a)/d(d) = s [ (1 - r/len) I + (r/len) dir dir^T ]
          const Vec3d d_bar = stiff * ((1.0 - r / len) * w + (r / len) * dir.dot(w) * dir);
          x_bar.col(b) += d_bar;
          x_bar.col(a) -= d_bar;
          d_stiffness[static_cast<Eigen::Index>(s)] += (len - r) * dir.dot(w);
        }
        const double gamma = springs.damping[s];
        v_bar.col(a) -= gamma * w;
        v_bar.col(b) += gamma * w;
        d_damping[static_cast<Eigen::Index>(s)] -= (vs.col(a) - vs.col(b)).dot(w);
      }

      // Controller position at the start of this substep is
      // (1 - k/S) C_interval + (k/S) C_f.
      const double frac = static_cast<double>(k) / substeps;
      c_from += (1.0 - frac) * x_bar.rightCols(n_ctl);
      c_to += frac * x_bar.rightCols(n_ctl);
      u_bar += v_bar.rightCols(n_ctl);
    }
    c_to += u_bar / controller.frame_dt;
    c_from -= u_bar / controller.frame_dt;
  }

  const auto n_springs = static_cast<Eigen::Index>(springs.size());
  report.d_log_params.resize(2 * n_springs);
  for (Eigen::Index s = 0; s < n_springs; ++s) {
    report.d_log_params[2 * s] = d_stiffness[s] * springs.stiffness[static_cast<std::size_t>(s)];
    report.d_log_params[2 * s + 1] = d_damping[s] * springs.damping[static_cast<std::size_t>(s)];
  }
  for (Eigen::Index s = 0; s < 2 * n_springs; ++s)
    if (!std::isfinite(report.d_log_params[s]))
      throw Error("nonfinite_gradient", "non-finite gradient at spring " + std::to_string(s / 2));
  for (const auto& c : report.d_controller)
    if (!c.allFinite())
      throw Error("nonfinite_gradient", "non-finite controller gradient");
  return report;
}

GradientReport loss_and_grad_params(const SystemTopology& topology, const PhysicsConfig& config,
                                    const SpringParams& params,
                                    const ControllerTrajectory& controller,
                                    const ObservationSequence& observations, double lambda_tr)
{
  return loss_and_grad(topology, config, params, controller, observations, lambda_tr);
}

GradientReport loss_and_grad_controller(const SystemTopology& topology, const PhysicsConfig& config,
                                        const SpringParams& params,
                                        const ControllerTrajectory& controller,
                                        const ObservationSequence& observations, double lambda_tr)
{
  return loss_and_grad(topology, config, params, controller, observations, lambda_tr);
}

} // namespace springfit

#include <springfit/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace springfit {

namespace {

void check_frames(const std::vector<PointCloud>& sim, const std::vector<PointCloud>& obs)
{
  if (sim.size() != obs.size())
    throw std::invalid_argument("frame count mismatch: " + std::to_string(sim.size()) + " simulated vs " +
                                std::to_string(obs.size()) + " observed");
  if (sim.size() < 2)
    throw std::invalid_argument("metrics need at least two frames");
}

double to_mm(double mean_chamfer) { return 1e3 * std::sqrt(mean_chamfer / 2.0); }

PointCloud select(const PointCloud& pts, const std::vector<std::uint8_t>& keep)
{
  PointCloud out(3, std::count(keep.begin(), keep.end(), std::uint8_t{1}));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < pts.cols(); ++i)
    if (keep[static_cast<std::size_t>(i)])
      out.col(k++) = pts.col(i);
  return out;
}

std::vector<std::uint8_t> near_deforming(const PointCloud& pts, const NeighborIndex& tracks,
                                         const std::vector<std::uint8_t>& deforming)
{
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(pts.cols()));
  for (Eigen::Index i = 0; i < pts.cols(); ++i)
    keep[static_cast<std::size_t>(i)] =
      deforming[static_cast<std::size_t>(tracks.nearest_sq(pts.col(i)).index)];
  return keep;
}

} // namespace

std::vector<double> cd_per_frame(const std::vector<PointCloud>& sim_frames,
                                 const std::vector<PointCloud>& obs_clouds)
{
  check_frames(sim_frames, obs_clouds);
  std::vector<double> out;
  for (std::size_t t = 0; t < sim_frames.size(); ++t)
    out.push_back(to_mm(chamfer(sim_frames[t], obs_clouds[t])));
  return out;
}

double cd_full(const std::vector<PointCloud>& sim_frames, const std::vector<PointCloud>& obs_clouds)
{
  check_frames(sim_frames, obs_clouds);
  double sum = 0.0;
  for (std::size_t t = 1; t < sim_frames.size(); ++t)
    sum += chamfer(sim_frames[t], obs_clouds[t]);
  return to_mm(sum / static_cast<double>(sim_frames.size() - 1));
}

std::optional<double> cd_dyn(const std::vector<PointCloud>& sim_frames,
                             const std::vector<PointCloud>& obs_clouds,
                             const std::vector<PointCloud>& tracks, double tau_dyn)
{
  check_frames(sim_frames, obs_clouds);
  if (tracks.size() != sim_frames.size())
    throw std::invalid_argument("track frame count mismatch");
  const Eigen::Index m = tracks.front().cols();
  std::vector<std::uint8_t> deforming(static_cast<std::size_t>(m), 0);
  for (std::size_t t = 1; t < tracks.size(); ++t)
    for (Eigen::Index k = 0; k < m; ++k)
      if ((tracks[t].col(k) - tracks[0].col(k)).squaredNorm() > tau_dyn)
        deforming[static_cast<std::size_t>(k)] = 1;
  if (std::find(deforming.begin(), deforming.end(), std::uint8_t{1}) == deforming.end())
    return std::nullopt;

  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t t = 1; t < sim_frames.size(); ++t) {
    const NeighborIndex track_index(tracks[t]);
    const PointCloud sim = select(sim_frames[t], near_deforming(sim_frames[t], track_index, deforming));
    const PointCloud obs = select(obs_clouds[t], near_deforming(obs_clouds[t], track_index, deforming));
    if (sim.cols() == 0 || obs.cols() == 0)
      continue;
    sum += chamfer(sim, obs);
    ++used;
  }
  if (used == 0)
    return std::nullopt;
  return to_mm(sum / static_cast<double>(used));
}

namespace {

std::vector<double> frame_track_errors(const std::vector<PointCloud>& sim_frames,
                                       const std::vector<PointCloud>& tracks)
{
  check_frames(sim_frames, tracks);
  const auto binding = bind_tracks(sim_frames.front(), tracks.front());
  std::vector<double> out;
  for (std::size_t t = 0; t < sim_frames.size(); ++t) {
    double sum = 0.0;
    for (std::size_t k = 0; k < binding.size(); ++k)
      sum += (sim_frames[t].col(binding[k]) - tracks[t].col(static_cast<Eigen::Index>(k))).norm();
    out.push_back(binding.empty() ? 0.0 : 100.0 * sum / static_cast<double>(binding.size()));
  }
  return out;
}

} // namespace

double track_error(const std::vector<PointCloud>& sim_frames, const std::vector<PointCloud>& tracks)
{
  const auto per_frame = frame_track_errors(sim_frames, tracks);
  double sum = 0.0;
  for (std::size_t t = 1; t < per_frame.size(); ++t)
    sum += per_frame[t];
  return sum / static_cast<double>(per_frame.size() - 1);
}

double rrd(double radius, double resolution, double ratio)
{
  if (!(resolution > 0.0))
    throw std::invalid_argument("resolution must be positive");
  if (!(ratio > 0.0))
    throw std::invalid_argument("reference ratio must be positive");
  return std::abs(radius / resolution / ratio - 1.0);
}

double rrd(double radius, const PointCloud& object_rest, double ratio)
{
  return rrd(radius, mean_resolution(object_rest), ratio);
}

double contact_accuracy(const SystemTopology& topology, const PointCloud& controller_frame0,
                        const PointCloud& object_frame0, double threshold)
{
  const Eigen::Index n = object_frame0.cols();
  if (n == 0)
    throw std::invalid_argument("object has no nodes");
  std::vector<std::uint8_t> predicted(static_cast<std::size_t>(n), 0);
  for (std::size_t k = topology.object_spring_count; k < topology.springs.size(); ++k) {
    const Spring& s = topology.springs[k];
    const Eigen::Index object_node = s.i < topology.object_count ? s.i : s.j;
    predicted[static_cast<std::size_t>(object_node)] = 1;
  }
  const NeighborIndex controller(controller_frame0);
  Eigen::Index agree = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool label = controller.nearest_sq(object_frame0.col(i)).squared_distance < threshold * threshold;
    agree += label == static_cast<bool>(predicted[static_cast<std::size_t>(i)]);
  }
  return static_cast<double>(agree) / static_cast<double>(n);
}

EvalReport evaluate(const std::vector<PointCloud>& sim_frames, const ObservationSequence& obs, double tau_dyn)
{
  EvalReport r;
  r.tau_dyn = tau_dyn;
  r.cd_full_mm = cd_full(sim_frames, obs.clouds);
  r.frame_cd_mm = cd_per_frame(sim_frames, obs.clouds);
  if (obs.track_count() > 0) {
    r.cd_dyn_mm = cd_dyn(sim_frames, obs.clouds, obs.tracks, tau_dyn);
    r.frame_track_error = frame_track_errors(sim_frames, obs.tracks);
    r.track_error = track_error(sim_frames, obs.tracks);
  }
  return r;
}

void analyze_topology(EvalReport& report, const SystemTopology& topology, double object_radius,
                      const PointCloud& label_controller)
{
  const PointCloud rest = topology.object_rest();
  const double dx = mean_resolution(rest);
  report.rrd_object = rrd(object_radius, dx);
  report.rrd_virtual = rrd(max_contact_rest_length(topology), dx);
  report.contact_acc_5mm = contact_accuracy(topology, label_controller, rest, 0.005);
  report.contact_acc_10mm = contact_accuracy(topology, label_controller, rest, 0.010);
}

} // namespace springfit

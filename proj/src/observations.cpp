#include <springfit/observations.hpp>

#include <string>

namespace springfit {

void ObservationSequence::validate() const
{
  if (clouds.size() < 2)
    throw std::invalid_argument("observations need at least 2 frames");
  if (!tracks.empty() && tracks.size() != clouds.size())
    throw std::invalid_argument("track and cloud frame counts differ");
  for (const auto& c : clouds) {
    if (c.cols() == 0)
      throw std::invalid_argument("observed cloud is empty");
    if (!c.allFinite())
      throw std::invalid_argument("observed cloud contains non-finite coordinates");
  }
  for (const auto& t : tracks) {
    if (t.cols() != tracks.front().cols())
      throw std::invalid_argument("track count changes across frames");
    if (!t.allFinite())
      throw std::invalid_argument("tracks contain non-finite coordinates");
  }
}

std::vector<Eigen::Index> bind_tracks(const PointCloud& object_frame0, const PointCloud& tracks_frame0)
{
  if (tracks_frame0.cols() > object_frame0.cols())
    throw std::invalid_argument("more tracks (" + std::to_string(tracks_frame0.cols()) +
                                ") than object nodes (" + std::to_string(object_frame0.cols()) + ")");
  std::vector<Eigen::Index> binding;
  if (tracks_frame0.cols() == 0)
    return binding;
  const NeighborIndex index(object_frame0);
  binding.reserve(static_cast<std::size_t>(tracks_frame0.cols()));
  for (Eigen::Index k = 0; k < tracks_frame0.cols(); ++k)
    binding.push_back(index.nearest_sq(tracks_frame0.col(k)).index);
  return binding;
}

double track_loss(const PointCloud& object_positions, const PointCloud& tracks_t,
                  const std::vector<Eigen::Index>& binding)
{
  if (binding.empty())
    return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < binding.size(); ++k)
    sum += (object_positions.col(binding[k]) - tracks_t.col(static_cast<Eigen::Index>(k))).squaredNorm();
  return sum / static_cast<double>(binding.size());
}

FrameLoss::FrameLoss(const ObservationSequence& observations, const PointCloud& object_rest,
                     double lambda_tr)
  : observations_(observations), lambda_tr_(lambda_tr)
{
  observations_.validate();
  cloud_index_.reserve(observations_.clouds.size());
  for (const auto& c : observations_.clouds)
    cloud_index_.emplace_back(c);
  if (observations_.track_count() > 0)
    binding_ = bind_tracks(object_rest, observations_.tracks.front());
}

double FrameLoss::evaluate(Eigen::Index t, const PointCloud& x, PointCloud* grad) const
{
  const auto tt = static_cast<std::size_t>(t);
  const PointCloud& cloud = observations_.clouds[tt];
  const NeighborIndex& cloud_index = cloud_index_[tt];
  const Eigen::Index n = x.cols();
  const Eigen::Index m = cloud.cols();
  if (grad)
    grad->setZero(3, n);

  double to_cloud = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto nb = cloud_index.nearest_sq(x.col(i));
    to_cloud += nb.squared_distance;
    if (grad)
      grad->col(i) += (2.0 / static_cast<double>(n)) * (x.col(i) - cloud.col(nb.index));
  }
  const NeighborIndex node_index(x);
  double to_nodes = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto nb = node_index.nearest_sq(cloud.col(j));
    to_nodes += nb.squared_distance;
    if (grad)
      grad->col(nb.index) += (2.0 / static_cast<double>(m)) * (x.col(nb.index) - cloud.col(j));
  }
  double loss = to_cloud / static_cast<double>(n) + to_nodes / static_cast<double>(m);

  if (!binding_.empty() && lambda_tr_ != 0.0) {
    const PointCloud& tracks = observations_.tracks[tt];
    loss += lambda_tr_ * track_loss(x, tracks, binding_);
    if (grad) {
      const double w = 2.0 * lambda_tr_ / static_cast<double>(binding_.size());
      for (std::size_t k = 0; k < binding_.size(); ++k)
        grad->col(binding_[k]) += w * (x.col(binding_[k]) - tracks.col(static_cast<Eigen::Index>(k)));
    }
  }
  return loss;
}

double FrameLoss::sequence_loss(const std::vector<PointCloud>& object_frames) const
{
  if (static_cast<Eigen::Index>(object_frames.size()) != frame_count())
    throw std::invalid_argument("rollout and observation frame counts differ");
  double total = 0.0;
  for (Eigen::Index t = 1; t < frame_count(); ++t)
    total += evaluate(t, object_frames[static_cast<std::size_t>(t)], nullptr);
  return total / static_cast<double>(frame_count() - 1);
}

} // namespace springfit

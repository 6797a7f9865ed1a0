#pragma once

#include <springfit/geom.hpp>

#include <vector>

namespace springfit {

/// Observed point clouds and identity-preserving tracks, one entry per frame
/// (frame 0 included). Column k of every `tracks[t]` is the same physical point.
struct ObservationSequence
{
  std::vector<PointCloud> clouds;
  std::vector<PointCloud> tracks;
  double frame_dt = 1.0 / 30.0;

  Eigen::Index frame_count() const { return static_cast<Eigen::Index>(clouds.size()); }
  Eigen::Index track_count() const { return tracks.empty() ? 0 : tracks.front().cols(); }
  void validate() const;
};

/// Binds every track to its nearest object node at frame 0 (ties -> lower node
/// index). Throws if there are more tracks than nodes.
std::vector<Eigen::Index> bind_tracks(const PointCloud& object_frame0, const PointCloud& tracks_frame0);

/// Mean squared distance between bound node positions and track positions, m^2.
double track_loss(const PointCloud& object_positions, const PointCloud& tracks_t,
                  const std::vector<Eigen::Index>& binding);

/// Per-frame fitting loss: Chamfer to the observed cloud plus weighted track
/// loss. Observed-cloud neighbor indices are built once and reused.
class FrameLoss
{
public:
  FrameLoss(const ObservationSequence& observations, const PointCloud& object_rest, double lambda_tr);

  /// Loss of frame `t`; when `grad` is non-null it receives d(loss)/d(position)
  /// with nearest-neighbor correspondences held fixed.
  double evaluate(Eigen::Index t, const PointCloud& object_positions, PointCloud* grad) const;

  /// Mean of `evaluate` over frames 1..F-1.
  double sequence_loss(const std::vector<PointCloud>& object_frames) const;

  Eigen::Index frame_count() const { return observations_.frame_count(); }
  const std::vector<Eigen::Index>& binding() const { return binding_; }
  double lambda_tr() const { return lambda_tr_; }

private:
  ObservationSequence observations_;
  std::vector<NeighborIndex> cloud_index_;
  std::vector<Eigen::Index> binding_;
  double lambda_tr_;
};

} // namespace springfit

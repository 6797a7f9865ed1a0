#pragma once

#include <springfit/model.hpp>
#include <springfit/observations.hpp>

#include <optional>
#include <string>
#include <vector>

namespace springfit {

inline constexpr double kDefaultDynamicThreshold = 1e-4;  // m^2, a 10 mm excursion
inline constexpr double kReferenceRatio = 3.0;

/// How per-frame symmetric Chamfer values (m^2) become the reported millimeters.
inline constexpr const char* kChamferReduction =
  "cd_mm = 1000 * sqrt(mean over frames 1..F-1 of (d(sim->obs) + d(obs->sim)) / 2), "
  "d = mean squared nearest distance";

/// Chamfer metric over all object points, in mm. Frame 0 is excluded as it is
/// the shared rest state. Throws on frame-count mismatch.
double cd_full(const std::vector<PointCloud>& sim_frames, const std::vector<PointCloud>& obs_clouds);

/// Per-frame values behind `cd_full`, in mm (frame 0 reported as well).
std::vector<double> cd_per_frame(const std::vector<PointCloud>& sim_frames,
                                 const std::vector<PointCloud>& obs_clouds);

/// Chamfer metric restricted to the deforming region, in mm. A track deforms when
/// its squared excursion from frame 0 exceeds `tau_dyn` at some frame. At each
/// frame, simulated nodes and observed points are kept when their nearest track
/// deforms. Empty when no track deforms.
std::optional<double> cd_dyn(const std::vector<PointCloud>& sim_frames,
                             const std::vector<PointCloud>& obs_clouds,
                             const std::vector<PointCloud>& tracks, double tau_dyn = kDefaultDynamicThreshold);

/// 100 x mean Euclidean distance (m) between tracks and the simulated nodes bound
/// to them at frame 0, over frames 1..F-1.
double track_error(const std::vector<PointCloud>& sim_frames, const std::vector<PointCloud>& tracks);

/// |(radius / resolution) / ratio - 1|. Throws when the resolution is not positive.
double rrd(double radius, double resolution, double ratio = kReferenceRatio);
double rrd(double radius, const PointCloud& object_rest, double ratio = kReferenceRatio);

/// Fraction of object nodes where "has a contact spring" agrees with "lies
/// closer than `threshold` to some controller point".
double contact_accuracy(const SystemTopology& topology, const PointCloud& controller_frame0,
                        const PointCloud& object_frame0, double threshold);

struct EvalReport
{
  double cd_full_mm = 0.0;
  std::optional<double> cd_dyn_mm;
  double track_error = 0.0;
  std::optional<double> rrd_object;
  std::optional<double> rrd_virtual;
  std::optional<double> contact_acc_5mm;
  std::optional<double> contact_acc_10mm;
  std::vector<double> frame_cd_mm;
  std::vector<double> frame_track_error;
  double tau_dyn = kDefaultDynamicThreshold;
  std::string reduction = kChamferReduction;
};

/// Point-set metrics of a simulated object against observations.
EvalReport evaluate(const std::vector<PointCloud>& sim_frames, const ObservationSequence& obs,
                    double tau_dyn = kDefaultDynamicThreshold);

/// Adds RRD for the object radius and the longest contact spring, and contact
/// accuracy against `label_controller` (the true controller at frame 0).
void analyze_topology(EvalReport& report, const SystemTopology& topology, double object_radius,
                      const PointCloud& label_controller);

} // namespace springfit

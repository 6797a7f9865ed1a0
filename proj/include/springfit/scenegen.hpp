#pragma once

#include <springfit/observations.hpp>
#include <springfit/sim.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace springfit {

enum class GeometryKind { rope, cloth, blob };
enum class InteractionScript { lift, stretch, fold, push };

/// Recipe for a synthetic scene with known physics.
struct SceneSpec
{
  std::string name = "scene";
  GeometryKind geometry = GeometryKind::cloth;
  Eigen::Vector3i counts = Eigen::Vector3i(12, 12, 1);
  double spacing = 0.01;
  Vec3d origin = Vec3d(0.0, 0.0, 0.05);

  /// Ground-truth global parameters. Springs whose midpoint lies past the
  /// object's x-midplane get `stiffness_b` when it is positive.
  GlobalParams truth = {0.03, 12, 500.0, {0.0, 1.0, 0.0}};
  double stiffness_b = 0.0;
  /// Multiplier on the default damping rule for the true damping.
  double damping_factor = 1.0;

  Vec3d gravity = Vec3d::Zero();
  double frame_dt = 1.0 / 30.0;
  int frames = 16;
  int substeps = 32;
  int reference_factor = 4;

  /// Dense controller: `patches` grids of rows x cols points `controller_gap`
  /// off the object surface.
  int patches = 1;
  int controller_rows = 10;
  int controller_cols = 10;
  double controller_spacing = 0.005;
  double controller_gap = 0.001;
  int sparse_k = 30;

  InteractionScript script = InteractionScript::lift;
  double amplitude = 0.03;  // meters, radians for fold

  double sigma_obs = 0.0;
  double sigma_tr = 0.0;
  double sigma_ctl = 0.0;
  /// Fraction of object nodes that carry a track.
  double track_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  PhysicsConfig physics() const;
};

struct GroundTruth
{
  SystemTopology topology;  // built with the dense controller and true parameters
  PhysicsConfig config;     // reference substep count
  ControllerTrajectory controller;
  std::vector<PointCloud> reference;  // object nodes per frame
  /// Per object spring: 1 when it uses `stiffness_b`.
  std::vector<std::uint8_t> material;
  std::optional<ControllerTrajectory> perturbed_controller;
};

struct Scene
{
  SceneSpec spec;
  GroundTruth truth;

  PointCloud object_rest() const { return truth.topology.object_rest(); }
};

/// Builds geometry, true physics, scripted controller motion, the reference
/// rollout and jittered observations. Deterministic in `spec.seed`. Throws
/// Error("unstable_scene") when the reference rollout diverges.
std::pair<Scene, ObservationSequence> generate(const SceneSpec& spec);

PointCloud make_geometry(const SceneSpec& spec);
ControllerTrajectory make_controller(const SceneSpec& spec, const PointCloud& object_rest);

/// Farthest-point subsample of `k` points starting at index `seed % size`.
/// Returns indices in visitation order.
std::vector<Eigen::Index> sparse_subsample_indices(const PointCloud& dense, Eigen::Index k,
                                                   std::uint64_t seed);
PointCloud sparse_subsample(const PointCloud& dense, Eigen::Index k, std::uint64_t seed);

/// Every controller frame displaced by one Gaussian offset (sigma per axis),
/// drawn independently per frame.
ControllerTrajectory perturb_controller(const ControllerTrajectory& traj, double sigma,
                                        std::uint64_t seed);

const char* to_string(GeometryKind kind);
const char* to_string(InteractionScript script);
GeometryKind geometry_from_string(const std::string& s);
InteractionScript script_from_string(const std::string& s);

} // namespace springfit

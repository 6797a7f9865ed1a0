#pragma once

#include <springfit/geom.hpp>

#include <cstdint>
#include <vector>

namespace springfit {

enum class NodeKind : std::uint8_t { object, controller };
enum class SpringKind : std::uint8_t { object, contact };

/// One particle. Controller nodes are boundary-driven and never integrated.
struct MassNode
{
  Vec3d position = Vec3d::Zero();
  Vec3d velocity = Vec3d::Zero();
  double mass = 1.0;
  NodeKind kind = NodeKind::object;
};

struct Spring
{
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  double stiffness = 0.0;   // N/m
  double damping = 0.0;     // N s/m
  double rest_length = 0.0; // m
  SpringKind kind = SpringKind::object;
};

/// Ground-plane collision response (normal is +z).
struct CollisionParams
{
  double ground_height = 0.0;
  double friction_retention = 1.0; // tangential velocity factor, [0, 1]
  double restitution = 0.0;        // normal velocity factor, [0, 1]

  friend bool operator==(const CollisionParams&, const CollisionParams&) = default;
};

/// Coarse, non-differentiable parameters fitted by the zero-order stage.
struct GlobalParams
{
  double connection_radius = 0.002;
  int max_degree = 3;
  double global_stiffness = 1000.0;
  CollisionParams collision;

  friend bool operator==(const GlobalParams&, const GlobalParams&) = default;
};

struct PhysicsConfig
{
  GlobalParams global;
  Vec3d gravity = Vec3d(0.0, 0.0, -9.8);
  double frame_dt = 1.0 / 30.0;
  int substeps = 32;

  double substep_dt() const { return frame_dt / substeps; }
  void validate() const;
};

/// Mass nodes at rest plus the spring set. Object nodes occupy indices
/// [0, object_count); controller nodes follow. Object springs come first in
/// `springs`, contact (virtual) springs after `object_spring_count`.
struct SystemTopology
{
  PointCloud rest;
  Eigen::VectorXd mass;
  Eigen::Index object_count = 0;
  std::vector<Spring> springs;
  std::size_t object_spring_count = 0;
  /// Object nodes with no neighbor inside the connection radius.
  std::vector<Eigen::Index> isolated_nodes;

  Eigen::Index node_count() const { return rest.cols(); }
  Eigen::Index controller_count() const { return rest.cols() - object_count; }
  std::size_t contact_spring_count() const { return springs.size() - object_spring_count; }
  NodeKind kind(Eigen::Index node) const
  {
    return node < object_count ? NodeKind::object : NodeKind::controller;
  }
  MassNode node(Eigen::Index i) const { return {rest.col(i), Vec3d::Zero(), mass[i], kind(i)}; }
  PointCloud object_rest() const { return rest.leftCols(object_count); }
  PointCloud controller_rest() const { return rest.rightCols(controller_count()); }
};

/// Damping assigned to freshly built springs: a 0.1 damping ratio for a
/// unit-mass oscillator of the given stiffness.
double initial_damping(double stiffness);

/// Object springs from rest geometry. Candidate pairs within `radius` are
/// admitted in ascending distance order (ties by index) while both endpoints
/// have fewer than `max_degree` springs.
SystemTopology build_object_springs(const PointCloud& rest_points, double radius, int max_degree,
                                    double stiffness);

/// Adds one contact spring for every controller/object pair within `radius`
/// at frame 0 and appends the controller nodes. Contact springs do not count
/// toward the degree cap. Throws NoContact when nothing is in range.
SystemTopology attach_virtual_springs(SystemTopology topology, const PointCloud& controller_frame0,
                                      double radius, double stiffness);

/// Object springs plus contact springs for the given global parameters.
SystemTopology build_topology(const PointCloud& object_rest, const PointCloud& controller_frame0,
                              const GlobalParams& global);

/// Mean over nodes of the mean distance to the four nearest other nodes.
double mean_resolution(const PointCloud& object_rest);

/// Longest contact-spring rest length, 0 when there are none.
double max_contact_rest_length(const SystemTopology& topology);

/// Per-spring stiffness and damping, the first-order parameter set.
struct SpringParams
{
  Eigen::VectorXd stiffness;
  Eigen::VectorXd damping;

  Eigen::Index size() const { return stiffness.size(); }
  /// [log s_0, log g_0, log s_1, log g_1, ...]
  Eigen::VectorXd to_log() const;
  static SpringParams from_log(const Eigen::VectorXd& log_params);
};

SpringParams spring_params(const SystemTopology& topology);
void apply_spring_params(SystemTopology& topology, const SpringParams& params);

} // namespace springfit

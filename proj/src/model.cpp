#include <springfit/model.hpp>

#include <algorithm>
#include <cmath>
#include <tuple>

namespace springfit {

void PhysicsConfig::validate() const
{
  if (!(global.connection_radius > 0.0))
    throw std::invalid_argument("connection radius must be positive");
  if (global.max_degree < 1)
    throw std::invalid_argument("max degree must be at least 1");
  if (!(global.global_stiffness > 0.0))
    throw std::invalid_argument("global stiffness must be positive");
  if (substeps < 1)
    throw std::invalid_argument("substeps must be at least 1");
  if (!(frame_dt > 0.0))
    throw std::invalid_argument("frame dt must be positive");
  const auto& c = global.collision;
  if (c.friction_retention < 0.0 || c.friction_retention > 1.0 || c.restitution < 0.0 ||
      c.restitution > 1.0)
    throw std::invalid_argument("collision factors must lie in [0, 1]");
}

double initial_damping(double stiffness)
{
  return 0.2 * std::sqrt(stiffness);
}

SystemTopology build_object_springs(const PointCloud& rest_points, double radius, int max_degree,
                                    double stiffness)
{
  if (!(radius > 0.0))
    throw std::invalid_argument("connection radius must be positive");
  if (max_degree < 1)
    throw std::invalid_argument("max degree must be at least 1");

  const Eigen::Index n = rest_points.cols();
  SystemTopology topo;
  topo.rest = rest_points;
  topo.mass = Eigen::VectorXd::Ones(n);
  topo.object_count = n;

  const NeighborIndex index(rest_points, radius);
  struct Pair
  {
    double sq;
    Eigen::Index i, j;
  };
  std::vector<Pair> pairs;
  for (Eigen::Index i = 0; i < n; ++i) {
    bool any = false;
    for (const Neighbor& nb : index.radius_neighbors(rest_points.col(i), radius)) {
      if (nb.index == i)
        continue;
      any = true;
      if (nb.index > i)
        pairs.push_back({(rest_points.col(nb.index) - rest_points.col(i)).squaredNorm(), i, nb.index});
    }
    if (!any)
      topo.isolated_nodes.push_back(i);
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.sq, a.i, a.j) < std::tie(b.sq, b.i, b.j);
  });

  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  const double damping = initial_damping(stiffness);
  for (const Pair& p : pairs) {
    auto& di = degree[static_cast<std::size_t>(p.i)];
    auto& dj = degree[static_cast<std::size_t>(p.j)];
    if (di >= max_degree || dj >= max_degree)
      continue;
    ++di;
    ++dj;
    topo.springs.push_back({p.i, p.j, stiffness, damping, std::sqrt(p.sq), SpringKind::object});
  }
  topo.object_spring_count = topo.springs.size();
  return topo;
}

SystemTopology attach_virtual_springs(SystemTopology topology, const PointCloud& controller_frame0,
                                      double radius, double stiffness)
{
  if (!(radius > 0.0))
    throw std::invalid_argument("connection radius must be positive");
  if (controller_frame0.cols() == 0 || topology.object_count == 0)
    throw std::invalid_argument("contact detection requires non-empty clouds");
  if (topology.controller_count() != 0)
    throw std::invalid_argument("topology already has controller nodes");

  const Eigen::Index n_obj = topology.object_count;
  const NeighborIndex index(topology.object_rest(), radius);
  const double damping = initial_damping(stiffness);
  std::vector<Spring> contact;
  for (Eigen::Index c = 0; c < controller_frame0.cols(); ++c) {
    for (const Neighbor& nb : index.radius_neighbors(controller_frame0.col(c), radius))
      contact.push_back({nb.index, n_obj + c, stiffness, damping, nb.distance, SpringKind::contact});
  }
  if (contact.empty())
    throw NoContact();

  PointCloud rest(3, n_obj + controller_frame0.cols());
  rest << topology.rest, controller_frame0;
  topology.rest = std::move(rest);
  topology.mass.conservativeResize(topology.rest.cols());
  topology.mass.tail(controller_frame0.cols()).setOnes();
  topology.springs.insert(topology.springs.end(), contact.begin(), contact.end());
  return topology;
}

SystemTopology build_topology(const PointCloud& object_rest, const PointCloud& controller_frame0,
                              const GlobalParams& global)
{
  auto topo = build_object_springs(object_rest, global.connection_radius, global.max_degree,
                                   global.global_stiffness);
  return attach_virtual_springs(std::move(topo), controller_frame0, global.connection_radius,
                                global.global_stiffness);
}

double mean_resolution(const PointCloud& object_rest)
{
  const Eigen::Index n = object_rest.cols();
  if (n < 5)
    throw InsufficientPoints("mean resolution needs at least 5 nodes");
  const NeighborIndex index(object_rest);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto nbs = index.knn(object_rest.col(i), 5);
    double local = 0.0;
    int used = 0;
    for (const Neighbor& nb : nbs) {
      if (nb.index == i || used == 4)
        continue;
      local += nb.distance;
      ++used;
    }
    total += local / 4.0;
  }
  return total / static_cast<double>(n);
}

double max_contact_rest_length(const SystemTopology& topology)
{
  double longest = 0.0;
  for (std::size_t k = topology.object_spring_count; k < topology.springs.size(); ++k)
    longest = std::max(longest, topology.springs[k].rest_length);
  return longest;
}

Eigen::VectorXd SpringParams::to_log() const
{
  Eigen::VectorXd out(2 * size());
  for (Eigen::Index k = 0; k < size(); ++k) {
    out[2 * k] = std::log(stiffness[k]);
    out[2 * k + 1] = std::log(damping[k]);
  }
  return out;
}

SpringParams SpringParams::from_log(const Eigen::VectorXd& log_params)
{
  const Eigen::Index n = log_params.size() / 2;
  SpringParams p{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    p.stiffness[k] = std::exp(log_params[2 * k]);
    p.damping[k] = std::exp(log_params[2 * k + 1]);
  }
  return p;
}

SpringParams spring_params(const SystemTopology& topology)
{
  const auto n = static_cast<Eigen::Index>(topology.springs.size());
  SpringParams p{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    p.stiffness[k] = topology.springs[static_cast<std::size_t>(k)].stiffness;
    p.damping[k] = topology.springs[static_cast<std::size_t>(k)].damping;
  }
  return p;
}

void apply_spring_params(SystemTopology& topology, const SpringParams& params)
{
  if (params.size() != static_cast<Eigen::Index>(topology.springs.size()))
    throw std::invalid_argument("spring parameter count does not match topology");
  for (std::size_t k = 0; k < topology.springs.size(); ++k) {
    topology.springs[k].stiffness = params.stiffness[static_cast<Eigen::Index>(k)];
    topology.springs[k].damping = params.damping[static_cast<Eigen::Index>(k)];
  }
}

} // namespace springfit

#include <springfit/scenegen.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace springfit {

namespace {

double smoothstep(double s)
{
  s = std::clamp(s, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

struct Patch
{
  PointCloud points;
  int group;
};

/// rows x cols grid lying `gap` above the object's top face, spanning x from
/// `x_start` in direction `x_dir` and centered on the object's y midline.
Patch top_patch(const SceneSpec& spec, const PointCloud& object, double x_start, double x_dir,
                int group)
{
  const Eigen::Vector3d lo = object.rowwise().minCoeff();
  const Eigen::Vector3d hi = object.rowwise().maxCoeff();
  const double h = spec.controller_spacing;
  const double y_mid = 0.5 * (lo.y() + hi.y());
  // Snap the first row onto a node row so some controller points sit exactly
  // `gap` above nodes.
  const double y_centered = y_mid - 0.5 * (spec.controller_rows - 1) * h;
  const double y0 = lo.y() + std::round((y_centered - lo.y()) / spec.spacing) * spec.spacing;
  Patch p{PointCloud(3, spec.controller_rows * spec.controller_cols), group};
  Eigen::Index k = 0;
  for (int r = 0; r < spec.controller_rows; ++r)
    for (int c = 0; c < spec.controller_cols; ++c)
      p.points.col(k++) = Vec3d(x_start + x_dir * c * h, y0 + r * h, hi.z() + spec.controller_gap);
  return p;
}

std::vector<std::uint8_t> material_mask(const SceneSpec& spec, const SystemTopology& topo)
{
  std::vector<std::uint8_t> mask(topo.object_spring_count, 0);
  if (spec.stiffness_b <= 0.0)
    return mask;
  const PointCloud rest = topo.object_rest();
  const double x_mid = 0.5 * (rest.row(0).minCoeff() + rest.row(0).maxCoeff());
  for (std::size_t k = 0; k < topo.object_spring_count; ++k) {
    const Spring& s = topo.springs[k];
    const double mid = 0.5 * (rest(0, s.i) + rest(0, s.j));
    mask[k] = mid > x_mid ? 1 : 0;
  }
  return mask;
}

} // namespace

void SceneSpec::validate() const
{
  if ((counts.array() < 1).any())
    throw std::invalid_argument("node counts must be positive");
  if (!(spacing > 0.0) || !(controller_spacing > 0.0))
    throw std::invalid_argument("spacings must be positive");
  if (frames < 2 || substeps < 1 || reference_factor < 1)
    throw std::invalid_argument("frames >= 2, substeps >= 1 and reference factor >= 1 required");
  if (patches < 1 || patches > 2)
    throw std::invalid_argument("scenes support one or two controller patches");
  if (controller_rows < 1 || controller_cols < 1)
    throw std::invalid_argument("controller grid must be non-empty");
  if (sigma_obs < 0.0 || sigma_tr < 0.0 || sigma_ctl < 0.0)
    throw std::invalid_argument("noise levels must be non-negative");
  if (sparse_k < 1 || sparse_k > patches * controller_rows * controller_cols)
    throw std::invalid_argument("sparse controller size must lie in [1, dense size]");
  if (track_fraction < 0.0 || track_fraction > 1.0)
    throw std::invalid_argument("track fraction must lie in [0, 1]");
  PhysicsConfig cfg = physics();
  cfg.validate();
}

PhysicsConfig SceneSpec::physics() const
{
  PhysicsConfig cfg;
  cfg.global = truth;
  cfg.gravity = gravity;
  cfg.frame_dt = frame_dt;
  cfg.substeps = substeps;
  return cfg;
}

PointCloud make_geometry(const SceneSpec& spec)
{
  Eigen::Vector3i n = spec.counts;
  if (spec.geometry == GeometryKind::rope)
    n = Eigen::Vector3i(n.x(), 1, 1);
  else if (spec.geometry == GeometryKind::cloth)
    n.z() = 1;
  PointCloud pts(3, n.prod());
  Eigen::Index k = 0;
  for (int z = 0; z < n.z(); ++z)
    for (int y = 0; y < n.y(); ++y)
      for (int x = 0; x < n.x(); ++x)
        pts.col(k++) = spec.origin + spec.spacing * Vec3d(x, y, z);
  return pts;
}

ControllerTrajectory make_controller(const SceneSpec& spec, const PointCloud& object)
{
  const double x_lo = object.row(0).minCoeff();
  const double x_hi = object.row(0).maxCoeff();
  std::vector<Patch> patches{top_patch(spec, object, x_lo, 1.0, 0)};
  if (spec.patches == 2)
    patches.push_back(top_patch(spec, object, x_hi, -1.0, 1));

  Eigen::Index total = 0;
  for (const auto& p : patches)
    total += p.points.cols();
  PointCloud base(3, total);
  std::vector<int> group(static_cast<std::size_t>(total));
  Eigen::Index at = 0;
  for (const auto& p : patches) {
    base.middleCols(at, p.points.cols()) = p.points;
    std::fill_n(group.begin() + at, p.points.cols(), p.group);
    at += p.points.cols();
  }

  const double x_mid = 0.5 * (x_lo + x_hi);
  const double z_axis = object.row(2).maxCoeff();
  ControllerTrajectory traj;
  traj.frame_dt = spec.frame_dt;
  for (int f = 0; f < spec.frames; ++f) {
    const double tau = smoothstep(static_cast<double>(f) / (spec.frames - 1));
    PointCloud pts = base;
    for (Eigen::Index c = 0; c < total; ++c) {
      switch (spec.script) {
      case InteractionScript::lift:
        pts(2, c) += spec.amplitude * tau;
        break;
      case InteractionScript::push:
        pts(0, c) += spec.amplitude * tau;
        break;
      case InteractionScript::stretch: {
        const double dir = spec.patches == 2 ? (group[static_cast<std::size_t>(c)] == 0 ? -1.0 : 1.0) : 1.0;
        pts(0, c) += dir * spec.amplitude * tau;
        break;
      }
      case InteractionScript::fold: {
        const double theta = spec.amplitude * tau;
        const double rx = base(0, c) - x_mid;
        const double rz = base(2, c) - z_axis;
        pts(0, c) = x_mid + rx * std::cos(theta) + rz * std::sin(theta);
        pts(2, c) = z_axis - rx * std::sin(theta) + rz * std::cos(theta);
        break;
      }
      }
    }
    traj.frames.push_back(std::move(pts));
  }
  return traj;
}

std::vector<Eigen::Index> sparse_subsample_indices(const PointCloud& dense, Eigen::Index k,
                                                   std::uint64_t seed)
{
  const Eigen::Index n = dense.cols();
  if (k < 1 || k > n)
    throw InsufficientPoints("sparse subsample size " + std::to_string(k) +
                             " outside [1, " + std::to_string(n) + "]");
  std::vector<Eigen::Index> picked;
  picked.reserve(static_cast<std::size_t>(k));
  std::vector<double> gap(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> used(static_cast<std::size_t>(n), 0);
  Eigen::Index next = static_cast<Eigen::Index>(seed % static_cast<std::uint64_t>(n));
  for (Eigen::Index round = 0; round < k; ++round) {
    picked.push_back(next);
    used[static_cast<std::size_t>(next)] = 1;
    Eigen::Index far = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& g = gap[static_cast<std::size_t>(i)];
      g = std::min(g, (dense.col(i) - dense.col(next)).squaredNorm());
      if (!used[static_cast<std::size_t>(i)] && (far < 0 || g > gap[static_cast<std::size_t>(far)]))
        far = i;
    }
    next = far;
  }
  return picked;
}

PointCloud sparse_subsample(const PointCloud& dense, Eigen::Index k, std::uint64_t seed)
{
  const auto idx = sparse_subsample_indices(dense, k, seed);
  PointCloud out(3, k);
  for (Eigen::Index c = 0; c < k; ++c)
    out.col(c) = dense.col(idx[static_cast<std::size_t>(c)]);
  return out;
}

ControllerTrajectory perturb_controller(const ControllerTrajectory& traj, double sigma,
                                        std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ControllerTrajectory out = traj;
  if (sigma <= 0.0)
    return out;
  for (auto& frame : out.frames) {
    Vec3d offset;
    for (int d = 0; d < 3; ++d)
      offset[d] = sigma * normal(rng);
    frame.colwise() += offset;
  }
  return out;
}

std::pair<Scene, ObservationSequence> generate(const SceneSpec& spec)
{
  spec.validate();
  Scene scene;
  scene.spec = spec;
  GroundTruth& truth = scene.truth;

  const PointCloud rest = make_geometry(spec);
  truth.controller = make_controller(spec, rest);
  truth.topology = build_topology(rest, truth.controller.frames.front(), spec.truth);
  truth.material = material_mask(spec, truth.topology);
  for (std::size_t k = 0; k < truth.topology.springs.size(); ++k) {
    Spring& s = truth.topology.springs[k];
    if (k < truth.topology.object_spring_count && truth.material[k])
      s.stiffness = spec.stiffness_b;
    s.damping = spec.damping_factor * initial_damping(s.stiffness);
  }

  truth.config = spec.physics();
  truth.config.substeps = spec.substeps * spec.reference_factor;
  std::vector<SimState> frames;
  try {
    frames = rollout(truth.topology, truth.config, truth.controller);
  } catch (const SimulationDiverged& e) {
    throw Error("unstable_scene", std::string("scene spec unstable: ") + e.what());
  }
  truth.reference = object_frames(frames, truth.topology.object_count);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto jitter = [&](PointCloud pts, double sigma) {
    if (sigma > 0.0)
      for (Eigen::Index c = 0; c < pts.cols(); ++c)
        for (int d = 0; d < 3; ++d)
          pts(d, c) += sigma * normal(rng);
    return pts;
  };

  std::vector<Eigen::Index> tracked;
  const Eigen::Index n = rest.cols();
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::floor((i + 1) * spec.track_fraction) > std::floor(i * spec.track_fraction))
      tracked.push_back(i);

  ObservationSequence obs;
  obs.frame_dt = spec.frame_dt;
  for (const auto& ref : truth.reference)
    obs.clouds.push_back(jitter(ref, spec.sigma_obs));
  for (const auto& ref : truth.reference) {
    PointCloud t(3, static_cast<Eigen::Index>(tracked.size()));
    for (std::size_t k = 0; k < tracked.size(); ++k)
      t.col(static_cast<Eigen::Index>(k)) = ref.col(tracked[k]);
    obs.tracks.push_back(jitter(std::move(t), spec.sigma_tr));
  }

  if (spec.sigma_ctl > 0.0)
    truth.perturbed_controller =
      perturb_controller(truth.controller, spec.sigma_ctl, spec.seed ^ 0x9e3779b97f4a7c15ULL);
  return {std::move(scene), std::move(obs)};
}

const char* to_string(GeometryKind kind)
{
  switch (kind) {
  case GeometryKind::rope: return "rope";
  case GeometryKind::cloth: return "cloth";
  case GeometryKind::blob: return "blob";
  }
  return "cloth";
}

const char* to_string(InteractionScript script)
{
  switch (script) {
  case InteractionScript::lift: return "lift";
  case InteractionScript::stretch: return "stretch";
  case InteractionScript::fold: return "fold";
  case InteractionScript::push: return "push";
  }
  return "lift";
}

GeometryKind geometry_from_string(const std::string& s)
{
  if (s == "rope") return GeometryKind::rope;
  if (s == "cloth") return GeometryKind::cloth;
  if (s == "blob") return GeometryKind::blob;
  throw FormatError("unknown geometry kind '" + s + "'");
}

InteractionScript script_from_string(const std::string& s)
{
  if (s == "lift") return InteractionScript::lift;
  if (s == "stretch") return InteractionScript::stretch;
  if (s == "fold") return InteractionScript::fold;
  if (s == "push") return InteractionScript::push;
  throw FormatError("unknown interaction script '" + s + "'");
}

} // namespace springfit

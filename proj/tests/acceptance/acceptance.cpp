// Acceptance harness. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Tolerances are fixed below.

#include "../support.hpp"

#include <springfit/io.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>

using namespace springfit;
using namespace springfit::testing;

namespace {

// Pinned tolerances.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradFloor = 1e-8;
constexpr double kGradStep = 1e-5;
constexpr double kGradBudgetSeconds = 120.0;
constexpr double kEnergyRiseTol = 1e-8;     // J per substep
constexpr double kNetForceTol = 1e-9;       // N per node
constexpr double kEquivarianceTol = 1e-12;  // m, see the translation note below
constexpr double kRecoveryRatio = 0.10;
constexpr double kSceneBudgetSeconds = 600.0;
constexpr double kRefinePerturbation = 0.005;
constexpr int kRefineSeeds = 5;
constexpr int kRefineRequired = 4;
constexpr double kNoiseSigma = 0.001;
constexpr double kNoiseDegradation = 2.0;
constexpr double kSweepFactor = 2.0;
constexpr int kOracleTrials = 100;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4)
{
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

struct Verdict
{
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what)
  {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& what) { notes.push_back(what); }
};

void report(int id, const std::string& title, const Verdict& v)
{
  std::printf("CRITERION %d %s: %s\n", id, v.pass ? "PASS" : "FAIL", title.c_str());
  for (const auto& n : v.notes)
    std::printf("    %s\n", n.c_str());
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------
// Bundled scenes and the fits shared across criteria.

struct BundledScene
{
  std::string name;
  Scene scene;
  ObservationSequence obs;
};

SceneSpec load_spec(const std::filesystem::path& dir, const std::string& name)
{
  return parse_spec(read_text(dir / (name + ".spec")));
}

BundledScene bundle(const SceneSpec& spec)
{
  BundledScene b;
  b.name = spec.name;
  auto [scene, obs] = generate(spec);
  b.scene = std::move(scene);
  b.obs = std::move(obs);
  return b;
}

ControllerTrajectory sparse_controller(const Scene& scene)
{
  const auto& dense = scene.truth.controller;
  return dense.select(sparse_subsample_indices(dense.frames.front(), scene.spec.sparse_k, scene.spec.seed));
}

FitProblem problem_for(const Scene& scene, const ObservationSequence& obs, const ControllerTrajectory& ctl)
{
  FitProblem p;
  p.object_rest = scene.object_rest();
  p.controller = ctl;
  p.observations = obs;
  p.config = scene.spec.physics();
  return p;
}

std::vector<PointCloud> resimulate(const FitProblem& p, const FitResult& fit)
{
  PhysicsConfig cfg = p.config;
  cfg.global = fit.global;
  const ControllerTrajectory& ctl = fit.refined_controller ? *fit.refined_controller : p.controller;
  return object_frames(rollout(fit.topology, cfg, ctl), fit.topology.object_count);
}

struct FitRun
{
  FitResult fit;
  EvalReport report;  // against the clean reference clouds
  double seconds = 0.0;
};

FitRun run_fit(const BundledScene& s, const ObservationSequence& obs, const ControllerTrajectory& ctl,
               const ZeroOrderConfig& zero = {})
{
  const auto t0 = Clock::now();
  const FitProblem p = problem_for(s.scene, obs, ctl);
  FitRun r;
  r.fit = fit_pipeline(p, zero, AdamConfig::first_order());
  r.seconds = seconds_since(t0);
  ObservationSequence clean = s.obs;
  clean.clouds = s.scene.truth.reference;
  r.report = evaluate(resimulate(p, r.fit), clean);
  analyze_topology(r.report, r.fit.topology, r.fit.global.connection_radius,
                   s.scene.truth.controller.frames.front());
  return r;
}

std::string describe(const FitRun& r)
{
  return "delta=" + fmt(r.fit.global.connection_radius) + " d_max=" + std::to_string(r.fit.global.max_degree) +
         " s=" + fmt(r.fit.global.global_stiffness) + " CD_full=" + fmt(r.report.cd_full_mm) +
         "mm track=" + fmt(r.report.track_error) + " RRD_obj=" + fmt(*r.report.rrd_object) +
         " RRD_virt=" + fmt(*r.report.rrd_virtual) + " acc@5mm=" + fmt(*r.report.contact_acc_5mm) +
         " acc@10mm=" + fmt(*r.report.contact_acc_10mm) + " (" + fmt(r.seconds, 3) + "s)";
}

/// CD_full of the untouched initial guess, resimulated.
double initial_cd(const BundledScene& s)
{
  const FitProblem p = problem_for(s.scene, s.obs, s.scene.truth.controller);
  ZeroOrderConfig zero;
  zero.iterations = 0;
  const FitResult init = fit_zero_order(p, zero);
  return cd_full(resimulate(p, init), s.scene.truth.reference);
}

// ---------------------------------------------------------------------------

Verdict gradient_correctness()
{
  Verdict v;
  const auto t0 = Clock::now();
  double worst_params = 0.0, worst_ctl = 0.0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Eigen::Index nodes = 20 + 5 * static_cast<Eigen::Index>(seed);  // <= 50
    const int frames = 4 + static_cast<int>(seed);                         // <= 10
    const int substeps = 3 + static_cast<int>(seed) % 6;                   // <= 8
    const GradientCase g = make_gradient_case(seed, nodes, frames, substeps);
    const FdStats p = check_param_gradient(g, 1.0, kGradStep, kGradFloor);
    const FdStats c = check_controller_gradient(g, 1.0, kGradStep, kGradFloor);
    worst_params = std::max(worst_params, p.worst);
    worst_ctl = std::max(worst_ctl, c.worst);
    v.require(p.worst <= kGradRelTol, "spring gradient, scene " + std::to_string(seed) + ": " + fmt(p.worst));
    v.require(c.worst <= kGradRelTol, "controller gradient, scene " + std::to_string(seed) + ": " + fmt(c.worst));
    v.require(p.checked > 0 && c.checked > 0, "components above the floor, scene " + std::to_string(seed));
  }
  const double elapsed = seconds_since(t0);
  v.require(elapsed < kGradBudgetSeconds, "runtime " + fmt(elapsed) + "s");
  v.note("6 scenes, worst relative error: spring params " + fmt(worst_params) + ", controller " +
         fmt(worst_ctl) + ", " + fmt(elapsed, 3) + "s");
  return v;
}

Verdict physical_invariants(const std::vector<BundledScene>& scenes, const FitRun& reference_fit,
                            const BundledScene& fit_scene)
{
  Verdict v;
  double worst_rise = -1.0, worst_net = 0.0;
  for (const auto& s : scenes) {
    // Damped, gravity-free, static controller, random initial velocities, dt < 1e-3 s.
    const SystemTopology& topo = s.scene.truth.topology;
    PhysicsConfig cfg = s.scene.spec.physics();
    cfg.gravity = Vec3d::Zero();
    cfg.substeps = 34;
    SimState x = initial_state(topo, s.scene.truth.controller);
    std::mt19937_64 rng(s.scene.spec.seed);
    std::normal_distribution<double> n(0.0, 0.05);
    for (Eigen::Index i = 0; i < topo.object_count; ++i)
      for (int d = 0; d < 3; ++d)
        x.velocities(d, i) = n(rng);
    const ControllerTarget hold{s.scene.truth.controller.frames.front(),
                                PointCloud::Zero(3, topo.controller_count())};
    double e = mechanical_energy(x, topo, cfg.gravity);
    for (int k = 0; k < 1000; ++k) {
      x = step(x, topo, cfg, hold);
      const double next = mechanical_energy(x, topo, cfg.gravity);
      worst_rise = std::max(worst_rise, next - e);
      e = next;
    }
    // Force balance along the scripted reference motion.
    for (const auto& st : rollout(topo, cfg, s.scene.truth.controller))
      worst_net = std::max(worst_net, net_internal_force(st, topo).norm() / static_cast<double>(topo.node_count()));
  }
  v.require(worst_rise <= kEnergyRiseTol, "energy rise " + fmt(worst_rise) + " J");
  v.require(worst_net <= kNetForceTol, "net internal force " + fmt(worst_net) + " N/node");
  v.note("largest per-substep energy change " + fmt(worst_rise) + " J, largest net force " + fmt(worst_net) +
         " N/node");

  // Translation: offsets shift every rounding, so equality holds to roundoff only.
  const BundledScene& s = scenes.front();
  const PhysicsConfig cfg = s.scene.spec.physics();
  const auto base = rollout(s.scene.truth.topology, cfg, s.scene.truth.controller);
  const Vec3d offset(0.5, -0.25, 0.125);
  SystemTopology moved = s.scene.truth.topology;
  moved.rest.colwise() += offset;
  ControllerTrajectory ctl = s.scene.truth.controller;
  for (auto& f : ctl.frames)
    f.colwise() += offset;
  PhysicsConfig moved_cfg = cfg;
  moved_cfg.global.collision.ground_height += offset.z();
  const auto shifted = rollout(moved, moved_cfg, ctl);
  double worst_shift = 0.0;
  for (std::size_t f = 0; f < base.size(); ++f) {
    PointCloud back = shifted[f].positions;
    back.colwise() -= offset;
    worst_shift = std::max(worst_shift, (back - base[f].positions).cwiseAbs().maxCoeff());
  }
  v.require(worst_shift <= kEquivarianceTol, "translation equivariance " + fmt(worst_shift) + " m");
  v.note("translation equivariance: largest deviation " + fmt(worst_shift) + " m");

  // Determinism: rollout and the whole fit pipeline, compared byte for byte.
  const auto again = rollout(s.scene.truth.topology, cfg, s.scene.truth.controller);
  bool same_rollout = true;
  for (std::size_t f = 0; f < base.size(); ++f)
    same_rollout = same_rollout && base[f].positions == again[f].positions &&
                   base[f].velocities == again[f].velocities;
  v.require(same_rollout, "rollout determinism");
  const FitRun rerun = run_fit(fit_scene, fit_scene.obs, fit_scene.scene.truth.controller);
  v.require(format_fit(rerun.fit) == format_fit(reference_fit.fit), "fit pipeline determinism");
  v.note("rollout and fit pipeline (" + fit_scene.name + ") bit-identical across runs");
  return v;
}

Verdict parameter_recovery(const std::vector<BundledScene>& scenes, const std::map<std::string, FitRun>& dense)
{
  Verdict v;
  for (const auto& s : scenes) {
    const FitRun& r = dense.at(s.name);
    const double init = initial_cd(s);
    const double ratio = r.report.cd_full_mm / init;
    v.require(ratio <= kRecoveryRatio, s.name + " CD ratio " + fmt(ratio));
    v.require(r.seconds < kSceneBudgetSeconds, s.name + " runtime " + fmt(r.seconds) + "s");
    v.note(s.name + ": initial CD_full " + fmt(init) + "mm, fitted " + fmt(r.report.cd_full_mm) + "mm, ratio " +
           fmt(ratio) + ", " + fmt(r.seconds, 3) + "s");

    if (s.scene.spec.stiffness_b > 0.0) {
      // Fitted and true topologies differ, so material follows the spring midpoint.
      const SystemTopology& topo = r.fit.topology;
      const PointCloud rest = topo.object_rest();
      const double mid = 0.5 * (rest.row(0).minCoeff() + rest.row(0).maxCoeff());
      double sum_a = 0.0, sum_b = 0.0;
      int n_a = 0, n_b = 0;
      for (std::size_t k = 0; k < topo.object_spring_count; ++k) {
        const Spring& sp = topo.springs[k];
        const double x = 0.5 * (topo.rest(0, sp.i) + topo.rest(0, sp.j));
        (x > mid ? sum_b : sum_a) += sp.stiffness;
        (x > mid ? n_b : n_a) += 1;
      }
      const double mean_a = sum_a / std::max(n_a, 1);
      const double mean_b = sum_b / std::max(n_b, 1);
      const bool ordered = (s.scene.spec.stiffness_b > s.scene.spec.truth.global_stiffness) == (mean_b > mean_a);
      v.require(ordered && n_a > 0 && n_b > 0, s.name + " material ordering");
      v.note(s.name + ": mean fitted stiffness, true " + fmt(s.scene.spec.truth.global_stiffness) + " side " +
             fmt(mean_a) + ", true " + fmt(s.scene.spec.stiffness_b) + " side " + fmt(mean_b));
    }
  }
  return v;
}

Verdict dense_vs_sparse(const std::vector<BundledScene>& scenes, const std::map<std::string, FitRun>& dense,
                        const std::map<std::string, FitRun>& sparse)
{
  Verdict v;
  for (const auto& s : scenes) {
    const FitRun& d = dense.at(s.name);
    const FitRun& sp = sparse.at(s.name);
    v.require(d.report.cd_full_mm <= sp.report.cd_full_mm, s.name + " CD_full");
    v.require(d.report.track_error <= sp.report.track_error, s.name + " track error");
    v.note(s.name + " dense:  " + describe(d));
    v.note(s.name + " sparse: " + describe(sp));
  }
  return v;
}

Verdict rrd_trend(const std::vector<BundledScene>& scenes, const std::map<std::string, FitRun>& dense,
                  const std::map<std::string, FitRun>& sparse)
{
  Verdict v;
  v.require(std::abs(rrd(0.03, 0.01)) <= 1e-15, "RRD at delta = 3 dx");
  v.require(std::abs(rrd(0.01, 0.01) - 2.0 / 3.0) <= 1e-15, "RRD at delta = dx");
  for (const auto& s : scenes) {
    const double d = *dense.at(s.name).report.rrd_virtual;
    const double sp = *sparse.at(s.name).report.rrd_virtual;
    v.require(d < sp, s.name + " RRD_virtual dense " + fmt(d) + " vs sparse " + fmt(sp));
    v.note(s.name + ": RRD_virtual dense " + fmt(d) + ", sparse " + fmt(sp) + "; RRD_object dense " +
           fmt(*dense.at(s.name).report.rrd_object) + ", sparse " + fmt(*sparse.at(s.name).report.rrd_object));
  }
  // Contact accuracy at 5 mm is informational.
  for (const auto& s : scenes)
    v.note(s.name + ": contact accuracy @5mm dense " + fmt(*dense.at(s.name).report.contact_acc_5mm) +
           ", sparse " + fmt(*sparse.at(s.name).report.contact_acc_5mm) + " (informational)");
  return v;
}

double controller_error(const ControllerTrajectory& a, const ControllerTrajectory& b)
{
  double sum = 0.0;
  Eigen::Index n = 0;
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    sum += (a.frames[f] - b.frames[f]).colwise().norm().sum();
    n += a.frames[f].cols();
  }
  return sum / static_cast<double>(n);
}

Verdict refinement(const std::vector<BundledScene>& scenes, const std::map<std::string, FitRun>& dense)
{
  Verdict v;
  for (const auto& s : scenes) {
    const FitRun& model = dense.at(s.name);
    int improved = 0;
    double loss_drop = 0.0, err_drop = 0.0;
    for (int seed = 1; seed <= kRefineSeeds; ++seed) {
      const ControllerTrajectory perturbed =
        perturb_controller(s.scene.truth.controller, kRefinePerturbation, static_cast<std::uint64_t>(seed));
      FitProblem p = problem_for(s.scene, s.obs, perturbed);
      p.config.global = model.fit.global;
      const double before = rollout_loss(model.fit.topology, p.config, perturbed, s.obs, p.lambda_tr);
      const FitResult r = refine_controller(p, model.fit, AdamConfig::refinement());
      const double err_before = controller_error(perturbed, s.scene.truth.controller);
      const double err_after = controller_error(*r.refined_controller, s.scene.truth.controller);
      if (r.loss < before && err_after < err_before)
        ++improved;
      loss_drop += (before - r.loss) / before;
      err_drop += (err_before - err_after) / err_before;
    }
    v.require(improved >= kRefineRequired, s.name + " improved on " + std::to_string(improved) + " seeds");
    v.note(s.name + ": improved on " + std::to_string(improved) + "/" + std::to_string(kRefineSeeds) +
           " seeds; mean relative loss drop " + fmt(loss_drop / kRefineSeeds) +
           ", mean relative controller error drop " + fmt(err_drop / kRefineSeeds));
  }
  return v;
}

Verdict robustness(const std::vector<BundledScene>& scenes, const std::map<std::string, FitRun>& dense)
{
  Verdict v;
  for (const auto& s : scenes) {
    SceneSpec noisy = s.scene.spec;
    noisy.sigma_obs = kNoiseSigma;
    noisy.sigma_tr = kNoiseSigma;
    const BundledScene n = bundle(noisy);
    const FitRun r = run_fit(n, n.obs, n.scene.truth.controller);
    const double clean = dense.at(s.name).report.cd_full_mm;
    const double ratio = r.report.cd_full_mm / clean;
    v.require(ratio < kNoiseDegradation, s.name + " degradation " + fmt(ratio));
    v.note(s.name + ": clean-input CD_full " + fmt(clean) + "mm, noisy-input CD_full " +
           fmt(r.report.cd_full_mm) + "mm (vs clean reference), degradation x" + fmt(ratio));
  }
  return v;
}

Verdict sensitivity(const BundledScene& cloth, const FitRun& default_run)
{
  Verdict v;
  std::vector<std::pair<double, FitRun>> runs;
  for (double delta : {0.001, 0.002, 0.02, 0.04}) {
    ZeroOrderConfig zero;
    zero.initial.connection_radius = delta;
    if (delta == ZeroOrderConfig{}.initial.connection_radius)
      runs.emplace_back(delta, default_run);  // already fitted with the default start
    else
      runs.emplace_back(delta, run_fit(cloth, cloth.obs, cloth.scene.truth.controller, zero));
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [delta, r] : runs)
    best = std::min(best, r.report.cd_full_mm);
  for (const auto& [delta, r] : runs) {
    const bool close = r.report.cd_full_mm <= kSweepFactor * best;
    bool explained = false;
    for (const auto& w : r.fit.warnings)
      explained = explained || w.find("isolated") != std::string::npos;
    v.require(close || explained, "initial delta " + fmt(delta));
    v.note("initial delta " + fmt(delta) + ": CD_full " + fmt(r.report.cd_full_mm) + "mm (" +
           fmt(r.report.cd_full_mm / best) + "x best), fitted delta " + fmt(r.fit.global.connection_radius) +
           (r.fit.warnings.empty() ? "" : ", warning: " + r.fit.warnings.front()));
  }
  return v;
}

Verdict oracle_equivalence(const std::vector<BundledScene>& scenes)
{
  Verdict v;
  std::mt19937_64 rng(2024);
  int knn_bad = 0, radius_bad = 0, chamfer_bad = 0, metric_bad = 0;
  for (int trial = 0; trial < kOracleTrials; ++trial) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng() % 200);
    const PointCloud pts = random_cloud(rng, n, 0.1);
    const NeighborIndex index(pts, trial % 3 == 0 ? 0.0 : 0.002 + 0.0005 * (trial % 40));
    const Vec3d q = random_cloud(rng, 1, 0.12).col(0);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
    const auto got = index.knn(q, k);
    const auto want = brute_knn(pts, q, k);
    for (std::size_t i = 0; i < want.size(); ++i)
      knn_bad += got[i].index != want[i].index || std::abs(got[i].distance - want[i].distance) > 1e-15;
    const double r = 0.005 + 0.0004 * trial;
    const auto gr = index.radius_neighbors(q, r);
    const auto wr = brute_radius(pts, q, r);
    radius_bad += gr.size() != wr.size();
    for (std::size_t i = 0; i < std::min(gr.size(), wr.size()); ++i)
      radius_bad += gr[i].index != wr[i].index;

    const PointCloud other = random_cloud(rng, 3 + static_cast<Eigen::Index>(rng() % 150), 0.1);
    const double c = chamfer(pts, other);
    const double bc = brute_chamfer(pts, other);
    chamfer_bad += std::abs(c - bc) > 1e-12 * bc;

    std::vector<PointCloud> sim, obs, tracks;
    for (int t = 0; t < 4; ++t) {
      sim.push_back(random_cloud(rng, 30, 0.05));
      obs.push_back(random_cloud(rng, 40, 0.05));
      tracks.push_back(random_cloud(rng, 10, 0.05));
    }
    double sum = 0.0, track_sum = 0.0;
    for (int t = 1; t < 4; ++t) {
      sum += brute_chamfer(sim[static_cast<std::size_t>(t)], obs[static_cast<std::size_t>(t)]);
      for (Eigen::Index j = 0; j < 10; ++j) {
        const Eigen::Index node = brute_knn(sim.front(), tracks.front().col(j), 1).front().index;
        track_sum += (sim[static_cast<std::size_t>(t)].col(node) - tracks[static_cast<std::size_t>(t)].col(j)).norm();
      }
    }
    const double want_cd = 1000.0 * std::sqrt(sum / 3.0 / 2.0);
    const double want_tr = 100.0 * track_sum / 30.0;
    metric_bad += std::abs(cd_full(sim, obs) - want_cd) > 1e-12 * want_cd;
    metric_bad += std::abs(track_error(sim, tracks) - want_tr) > 1e-12 * want_tr;
  }
  v.require(knn_bad == 0, "knn mismatches " + std::to_string(knn_bad));
  v.require(radius_bad == 0, "radius mismatches " + std::to_string(radius_bad));
  v.require(chamfer_bad == 0, "chamfer mismatches " + std::to_string(chamfer_bad));
  v.require(metric_bad == 0, "metric mismatches " + std::to_string(metric_bad));
  v.note(std::to_string(kOracleTrials) + " random instances each for knn, radius, chamfer, CD_full and track error");

  // Lossless round trips for every file type: parse(format(x)) formats identically.
  int trips = 0;
  for (const auto& s : scenes) {
    const std::string scene = format_scene(s.scene);
    v.require(format_scene(parse_scene(scene)) == scene, s.name + " scene round trip");
    const std::string obs = format_observations(s.obs);
    v.require(format_observations(parse_observations(obs)) == obs, s.name + " observation round trip");
    const std::string spec = format_spec(s.scene.spec);
    v.require(format_spec(parse_spec(spec)) == spec, s.name + " spec round trip");
    const std::string ctl = format_controller(s.scene.truth.controller);
    v.require(format_controller(parse_controller(ctl)) == ctl, s.name + " controller round trip");
    const std::string roll = format_rollout(s.scene.truth.reference);
    v.require(parse_rollout(roll) == s.scene.truth.reference, s.name + " rollout round trip");
    trips += 5;
  }
  FitResult fit;
  fit.global = {0.0123, 7, 456.789, {0.0, 0.75, 0.125}};
  fit.topology = scenes.front().scene.truth.topology;
  fit.loss = 1.0 / 3.0;
  fit.zero_order_curve = {3.0, 1.0 / 7.0};
  fit.warnings = {"a warning"};
  fit.refined_controller = scenes.front().scene.truth.controller;
  const std::string ft = format_fit(fit, {{"seed", "1"}});
  ConfigStamp stamp;
  const FitResult back = parse_fit(ft, &stamp);
  v.require(format_fit(back, stamp) == ft, "fit round trip");
  EvalReport rep;
  rep.cd_full_mm = 0.1;
  rep.cd_dyn_mm = 0.3;
  rep.rrd_virtual = 1.0 / 3.0;
  rep.frame_cd_mm = {0.0, 0.2};
  const std::string rt = format_report(rep);
  v.require(format_report(parse_report(rt)) == rt, "report round trip");
  const ConfigStamp cfg{{"seed", "5"}, {"stage", "all"}};
  v.require(parse_config(format_config(cfg)) == cfg, "config round trip");
  v.note(std::to_string(trips + 3) + " round trips over scene, obs, spec, ctl, roll, fit, report and config files");
  return v;
}

} // namespace

int main(int argc, char** argv)
{
  const std::filesystem::path scene_dir = argc > 1 ? argv[1] : SPRINGFIT_SCENE_DIR;
  const auto t0 = Clock::now();

  std::vector<BundledScene> scenes;
  for (const char* name : {"cloth_lift", "blob_stretch", "cloth_two_material"})
    scenes.push_back(bundle(load_spec(scene_dir, name)));

  std::vector<std::pair<int, Verdict>> verdicts;
  auto run = [&](int id, const std::string& title, const std::function<Verdict()>& fn) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    report(id, title, v);
    verdicts.emplace_back(id, v);
  };

  run(1, "gradient correctness", gradient_correctness);
  run(9, "oracle equivalence", [&] { return oracle_equivalence(scenes); });

  std::map<std::string, FitRun> dense, sparse;
  for (const auto& s : scenes) {
    dense[s.name] = run_fit(s, s.obs, s.scene.truth.controller);
    std::printf("  fitted %s dense: %s\n", s.name.c_str(), describe(dense[s.name]).c_str());
    std::fflush(stdout);
    sparse[s.name] = run_fit(s, s.obs, sparse_controller(s.scene));
    std::printf("  fitted %s sparse: %s\n", s.name.c_str(), describe(sparse[s.name]).c_str());
    std::fflush(stdout);
  }

  run(2, "physical invariants", [&] { return physical_invariants(scenes, dense["blob_stretch"], scenes[1]); });
  run(3, "parameter recovery", [&] { return parameter_recovery(scenes, dense); });
  run(4, "dense vs sparse controller", [&] { return dense_vs_sparse(scenes, dense, sparse); });
  run(5, "RRD trend", [&] { return rrd_trend(scenes, dense, sparse); });
  run(6, "refinement efficacy", [&] { return refinement(scenes, dense); });
  run(7, "robustness to observation noise", [&] { return robustness(scenes, dense); });
  run(8, "initial radius sensitivity", [&] { return sensitivity(scenes.front(), dense["cloth_lift"]); });

  std::sort(verdicts.begin(), verdicts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  int failed = 0;
  std::printf("\nSUMMARY (%.0fs)\n", seconds_since(t0));
  for (const auto& [id, v] : verdicts) {
    std::printf("CRITERION %d: %s\n", id, v.pass ? "PASS" : "FAIL");
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}

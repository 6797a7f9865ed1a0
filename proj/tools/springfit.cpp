// Command-line front end: scene generation, simulation, fitting, refinement
// and evaluation over the line-based file formats.

#include <springfit/io.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace springfit;

namespace {

/// Which pipeline stage was running when a failure escaped; reported in the
/// error record.
std::string g_stage = "setup";

/// Option values as parsed plus which ones were given on the command line.
struct Options
{
  std::string config_file;
  std::uint64_t seed = 0;
  int substeps = 0;
  double lambda_tr = 1.0;
  double tau_dyn = kDefaultDynamicThreshold;
  int iters = 0;
  double lr = 0.0;
  std::string stage = "all";
  std::string controller = "dense";
  std::string out;
};

/// Effective settings after applying flag > config file > default.
class Settings
{
public:
  Settings(const CLI::App& cmd, const Options& opt) : cmd_(cmd), opt_(opt)
  {
    if (!opt.config_file.empty()) {
      file_ = parse_config(read_text(opt.config_file));
      static const std::set<std::string> known = {
        "seed", "substeps", "lambda-tr", "tau-dyn", "iters", "lr", "stage", "controller",
        "zero-order.iters", "zero-order.population", "first-order.iters", "first-order.lr",
        "refine.iters", "refine.lr", "refine.decay"};
      for (const auto& [key, value] : file_)
        if (!known.count(key))
          throw FormatError("unknown config key '" + key + "'");
    }
  }

  /// Flag value when given, else the config-file entry, else `fallback`.
  std::optional<std::string> raw(const std::string& flag) const
  {
    if (cmd_.get_option_no_throw("--" + flag) && cmd_.count("--" + flag) > 0)
      return flag_text(flag);
    if (const auto it = file_.find(flag); it != file_.end())
      return it->second;
    return std::nullopt;
  }

  /// Config-file only keys (stage-specific hyperparameters).
  std::optional<std::string> file_only(const std::string& key) const
  {
    if (const auto it = file_.find(key); it != file_.end())
      return it->second;
    return std::nullopt;
  }

  double number(const std::string& flag, double fallback) const
  {
    const auto v = raw(flag);
    return v ? parse_double(*v) : fallback;
  }

  long long integer(const std::string& flag, long long fallback) const
  {
    const auto v = raw(flag);
    if (!v)
      return fallback;
    try {
      std::size_t used = 0;
      const long long x = std::stoll(*v, &used);
      if (used != v->size())
        throw std::invalid_argument(*v);
      return x;
    } catch (const std::exception&) {
      throw FormatError("'" + flag + "' expects an integer, got '" + *v + "'");
    }
  }

  std::string text(const std::string& flag, const std::string& fallback) const
  {
    return raw(flag).value_or(fallback);
  }

private:
  std::string flag_text(const std::string& flag) const
  {
    if (flag == "seed")
      return std::to_string(opt_.seed);
    if (flag == "substeps")
      return std::to_string(opt_.substeps);
    if (flag == "lambda-tr")
      return format_double(opt_.lambda_tr);
    if (flag == "tau-dyn")
      return format_double(opt_.tau_dyn);
    if (flag == "iters")
      return std::to_string(opt_.iters);
    if (flag == "lr")
      return format_double(opt_.lr);
    if (flag == "stage")
      return opt_.stage;
    if (flag == "controller")
      return opt_.controller;
    throw std::logic_error("no flag " + flag);
  }

  const CLI::App& cmd_;
  const Options& opt_;
  ConfigStamp file_;
};

/// Dense controller, or its farthest-point subsample for "sparse:k".
ControllerTrajectory select_controller(const Scene& scene, const std::string& kind)
{
  const ControllerTrajectory& dense = scene.truth.controller;
  if (kind == "dense")
    return dense;
  if (kind.rfind("sparse:", 0) == 0 || kind == "sparse") {
    const std::string count = kind == "sparse" ? std::to_string(scene.spec.sparse_k) : kind.substr(7);
    Eigen::Index k = 0;
    try {
      k = std::stol(count);
    } catch (const std::exception&) {
      throw FormatError("bad controller spec '" + kind + "'");
    }
    return dense.select(sparse_subsample_indices(dense.frames.front(), k, scene.spec.seed));
  }
  throw FormatError("controller must be 'dense' or 'sparse:k', got '" + kind + "'");
}

/// Writes `text` to `path`, creating parent directories.
void emit(const fs::path& path, const std::string& text)
{
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  write_text_atomic(path, text);
  std::cout << path.string() << "\n";
}

fs::path output_path(const Options& opt, const std::string& fallback)
{
  return opt.out.empty() ? fs::path(fallback) : fs::path(opt.out);
}

Scene load_scene(const std::string& path) { return parse_scene(read_text(path)); }
ObservationSequence load_obs(const std::string& path) { return parse_observations(read_text(path)); }

/// The controller a fit result was produced with: its refined trajectory when
/// present, otherwise the one named in its run stamp.
ControllerTrajectory fit_controller(const Scene& scene, const FitResult& fit, const ConfigStamp& stamp)
{
  if (fit.refined_controller)
    return *fit.refined_controller;
  const auto it = stamp.find("controller");
  return select_controller(scene, it == stamp.end() ? "dense" : it->second);
}

std::vector<PointCloud> simulate_fit(const Scene& scene, const FitResult& fit, const ConfigStamp& stamp,
                                     int substeps)
{
  PhysicsConfig cfg = scene.spec.physics();
  cfg.global = fit.global;
  if (const auto it = stamp.find("substeps"); it != stamp.end())
    cfg.substeps = std::stoi(it->second);
  if (substeps > 0)
    cfg.substeps = substeps;
  const ControllerTrajectory ctl = fit_controller(scene, fit, stamp);
  return object_frames(rollout(fit.topology, cfg, ctl), fit.topology.object_count);
}

int run_gen(const std::string& spec_path, const Options& opt)
{
  g_stage = "gen";
  const SceneSpec spec = parse_spec(read_text(spec_path));
  const auto [scene, obs] = generate(spec);
  const ConfigStamp stamp{{"command", "gen"}, {"seed", std::to_string(spec.seed)}};
  const fs::path prefix = output_path(opt, spec.name);
  emit(fs::path(prefix.string() + ".scene"), format_scene(scene, stamp));
  emit(fs::path(prefix.string() + ".obs"), format_observations(obs, stamp));
  if (scene.truth.perturbed_controller)
    emit(fs::path(prefix.string() + ".ctl"), format_controller(*scene.truth.perturbed_controller, stamp));
  return 0;
}

int run_simulate(const std::string& scene_path, const std::string& params_path, const CLI::App& cmd,
                 const Options& opt)
{
  const Settings set(cmd, opt);
  g_stage = "simulate";
  const Scene scene = load_scene(scene_path);
  const int substeps = static_cast<int>(set.integer("substeps", 0));
  ConfigStamp stamp{{"command", "simulate"}};
  std::vector<PointCloud> frames;
  if (params_path.empty()) {
    // Ground truth at its own (reference) substep count.
    PhysicsConfig cfg = scene.truth.config;
    if (substeps > 0)
      cfg.substeps = substeps;
    stamp["params"] = "truth";
    stamp["substeps"] = std::to_string(cfg.substeps);
    frames = object_frames(rollout(scene.truth.topology, cfg, scene.truth.controller),
                           scene.truth.topology.object_count);
  } else {
    ConfigStamp fit_stamp;
    const FitResult fit = parse_fit(read_text(params_path), &fit_stamp);
    stamp["params"] = "fit";
    if (substeps > 0)
      stamp["substeps"] = std::to_string(substeps);
    frames = simulate_fit(scene, fit, fit_stamp, substeps);
  }
  emit(output_path(opt, scene.spec.name + ".roll"), format_rollout(frames, stamp));
  return 0;
}

int run_fit(const std::string& scene_path, const std::string& obs_path, const std::string& from_path,
            const CLI::App& cmd, const Options& opt)
{
  const Settings set(cmd, opt);
  const Scene scene = load_scene(scene_path);
  const ObservationSequence obs = load_obs(obs_path);

  const std::string stage = set.text("stage", "all");
  if (stage != "zero-order" && stage != "first-order" && stage != "all")
    throw FormatError("stage must be zero-order, first-order or all");
  const std::string controller = set.text("controller", "dense");

  FitProblem problem;
  problem.object_rest = scene.object_rest();
  problem.controller = select_controller(scene, controller);
  problem.observations = obs;
  problem.config = scene.spec.physics();
  problem.config.substeps = static_cast<int>(set.integer("substeps", problem.config.substeps));
  problem.lambda_tr = set.number("lambda-tr", 1.0);

  ZeroOrderConfig zero;
  zero.seed = static_cast<std::uint64_t>(set.integer("seed", 0));
  zero.iterations = static_cast<int>(set.integer("iters", parse_double(set.file_only("zero-order.iters").value_or("100"))));
  if (const auto v = set.file_only("zero-order.population"))
    zero.population = static_cast<int>(parse_double(*v));

  AdamConfig adam = AdamConfig::first_order();
  adam.iterations = static_cast<int>(set.integer("iters", parse_double(set.file_only("first-order.iters").value_or("200"))));
  adam.learning_rate = set.number("lr", parse_double(set.file_only("first-order.lr").value_or("0.001")));

  ConfigStamp stamp{{"command", "fit"},
                    {"stage", stage},
                    {"controller", controller},
                    {"seed", std::to_string(zero.seed)},
                    {"substeps", std::to_string(problem.config.substeps)},
                    {"lambda-tr", format_double(problem.lambda_tr)}};

  FitResult result;
  if (stage == "zero-order" || stage == "all") {
    g_stage = "zero-order";
    stamp["zero-order.iters"] = std::to_string(zero.iterations);
    stamp["zero-order.population"] = std::to_string(zero.population);
    result = fit_zero_order(problem, zero);
  } else if (!from_path.empty()) {
    result = parse_fit(read_text(from_path));
  } else {
    // First-order from the default homogeneous start.
    g_stage = "first-order";
    zero.iterations = 0;
    result = fit_zero_order(problem, zero);
  }
  if (stage == "first-order" || stage == "all") {
    g_stage = "first-order";
    stamp["first-order.iters"] = std::to_string(adam.iterations);
    stamp["first-order.lr"] = format_double(adam.learning_rate);
    result = fit_first_order(problem, result, adam);
  }
  result.seed = zero.seed;
  emit(output_path(opt, scene.spec.name + ".fit"), format_fit(result, stamp));
  return 0;
}

int run_refine(const std::string& fit_path, const std::string& ctl_path, const std::string& scene_path,
               const std::string& obs_path, const CLI::App& cmd, const Options& opt)
{
  const Settings set(cmd, opt);
  const Scene scene = load_scene(scene_path);
  ConfigStamp fit_stamp;
  const FitResult model = parse_fit(read_text(fit_path), &fit_stamp);

  FitProblem problem;
  problem.object_rest = scene.object_rest();
  problem.controller = parse_controller(read_text(ctl_path));
  problem.observations = load_obs(obs_path);
  problem.config = scene.spec.physics();
  problem.config.global = model.global;
  if (const auto it = fit_stamp.find("substeps"); it != fit_stamp.end())
    problem.config.substeps = std::stoi(it->second);
  problem.config.substeps = static_cast<int>(set.integer("substeps", problem.config.substeps));
  problem.lambda_tr = set.number("lambda-tr", 1.0);

  AdamConfig adam = AdamConfig::refinement();
  adam.iterations = static_cast<int>(set.integer("iters", parse_double(set.file_only("refine.iters").value_or("40"))));
  adam.learning_rate = set.number("lr", parse_double(set.file_only("refine.lr").value_or("2e-5")));
  adam.decay = parse_double(set.file_only("refine.decay").value_or("0.99"));

  g_stage = "refine";
  const FitResult refined = refine_controller(problem, model, adam);
  const ConfigStamp stamp{{"command", "refine"},
                          {"refine.iters", std::to_string(adam.iterations)},
                          {"refine.lr", format_double(adam.learning_rate)},
                          {"refine.decay", format_double(adam.decay)},
                          {"substeps", std::to_string(problem.config.substeps)},
                          {"lambda-tr", format_double(problem.lambda_tr)},
                          {"loss", format_double(refined.loss)}};
  emit(output_path(opt, scene.spec.name + ".ctl"), format_controller(*refined.refined_controller, stamp));
  return 0;
}

int run_eval(const std::string& input_path, const std::string& obs_path, const std::string& scene_path,
             const CLI::App& cmd, const Options& opt)
{
  const Settings set(cmd, opt);
  g_stage = "eval";
  const std::string text = read_text(input_path);
  std::vector<PointCloud> frames;
  if (file_kind(text) == "fit") {
    if (scene_path.empty())
      throw Error("usage", "evaluating a fit result needs --scene");
    ConfigStamp fit_stamp;
    const FitResult fit = parse_fit(text, &fit_stamp);
    frames = simulate_fit(load_scene(scene_path), fit, fit_stamp, static_cast<int>(set.integer("substeps", 0)));
  } else {
    frames = parse_rollout(text);
  }
  const double tau = set.number("tau-dyn", kDefaultDynamicThreshold);
  const EvalReport report = evaluate(frames, load_obs(obs_path), tau);
  emit(output_path(opt, fs::path(input_path).stem().string() + ".report"),
       format_report(report, {{"command", "eval"}, {"tau-dyn", format_double(tau)}}));
  return 0;
}

int run_analyze(const std::string& fit_path, const std::string& scene_path, const std::string& obs_path,
                const CLI::App& cmd, const Options& opt)
{
  const Settings set(cmd, opt);
  g_stage = "analyze";
  const Scene scene = load_scene(scene_path);
  ConfigStamp fit_stamp;
  const FitResult fit = parse_fit(read_text(fit_path), &fit_stamp);
  const double tau = set.number("tau-dyn", kDefaultDynamicThreshold);
  EvalReport report;
  report.tau_dyn = tau;
  if (!obs_path.empty())
    report = evaluate(simulate_fit(scene, fit, fit_stamp, static_cast<int>(set.integer("substeps", 0))),
                      load_obs(obs_path), tau);
  analyze_topology(report, fit.topology, fit.global.connection_radius, scene.truth.controller.frames.front());
  emit(output_path(opt, fs::path(fit_path).stem().string() + ".analysis.report"),
       format_report(report, {{"command", "analyze"}, {"tau-dyn", format_double(tau)}}));
  return 0;
}

void add_common(CLI::App* cmd, Options& opt)
{
  cmd->add_option("--config", opt.config_file, "Run configuration file (kind 'config')");
  cmd->add_option("--out", opt.out, "Output path (prefix for gen)");
}

int print_error(const std::string& kind, const std::string& message, const std::string& command,
                std::optional<long> frame = std::nullopt)
{
  nlohmann::json record{{"error", kind}, {"message", message}, {"command", command}, {"stage", g_stage}};
  if (frame)
    record["frame"] = *frame;
  std::cerr << record.dump() << "\n";
  return kind == "usage" ? 2 : 1;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Spring-mass system identification on synthetic scenes"};
  app.require_subcommand(1);
  Options opt;
  std::string a, b, c, d;

  auto* gen = app.add_subcommand("gen", "Generate a scene and its observations from a spec file");
  gen->add_option("spec", a, "Scene spec file")->required();
  add_common(gen, opt);

  auto* sim = app.add_subcommand("simulate", "Roll out the ground truth or a fitted model");
  sim->add_option("scene", a, "Scene file")->required();
  sim->add_option("params", b, "Fit result to simulate (ground truth when omitted)");
  sim->add_option("--substeps", opt.substeps, "Substeps per frame");
  add_common(sim, opt);

  auto* fit = app.add_subcommand("fit", "Fit global and per-spring parameters");
  fit->add_option("scene", a, "Scene file")->required();
  fit->add_option("obs", b, "Observation file")->required();
  fit->add_option("--from", c, "Start the first-order stage from this fit result");
  fit->add_option("--seed", opt.seed, "Search seed");
  fit->add_option("--substeps", opt.substeps, "Substeps per frame");
  fit->add_option("--lambda-tr", opt.lambda_tr, "Track-loss weight");
  fit->add_option("--iters", opt.iters, "Iterations of each selected stage");
  fit->add_option("--lr", opt.lr, "First-order learning rate");
  fit->add_option("--stage", opt.stage, "zero-order, first-order or all");
  fit->add_option("--controller", opt.controller, "dense or sparse:k");
  add_common(fit, opt);

  auto* refine = app.add_subcommand("refine", "Refine a controller trajectory against a fitted model");
  refine->add_option("fit", a, "Fit result")->required();
  refine->add_option("controller", b, "Initial controller file")->required();
  refine->add_option("--scene", c, "Scene file")->required();
  refine->add_option("--obs", d, "Observation file")->required();
  refine->add_option("--substeps", opt.substeps, "Substeps per frame");
  refine->add_option("--lambda-tr", opt.lambda_tr, "Track-loss weight");
  refine->add_option("--iters", opt.iters, "Refinement steps");
  refine->add_option("--lr", opt.lr, "Initial learning rate");
  add_common(refine, opt);

  auto* eval = app.add_subcommand("eval", "Point-set metrics of a rollout or fit against observations");
  eval->add_option("input", a, "Rollout or fit result")->required();
  eval->add_option("obs", b, "Observation file")->required();
  eval->add_option("--scene", c, "Scene file (needed for fit results)");
  eval->add_option("--substeps", opt.substeps, "Substeps per frame when simulating a fit");
  eval->add_option("--tau-dyn", opt.tau_dyn, "Motion threshold of the dynamic region, m^2");
  add_common(eval, opt);

  auto* analyze = app.add_subcommand("analyze", "Resolution ratios and contact accuracy of a fit");
  analyze->add_option("fit", a, "Fit result")->required();
  analyze->add_option("--scene", c, "Scene file")->required();
  analyze->add_option("--obs", d, "Observation file; adds point-set metrics");
  analyze->add_option("--substeps", opt.substeps, "Substeps per frame");
  analyze->add_option("--tau-dyn", opt.tau_dyn, "Motion threshold of the dynamic region, m^2");
  add_common(analyze, opt);

  std::string command = "springfit";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return print_error("usage", e.what(), command);
  }

  try {
    if (gen->parsed()) {
      command = "gen";
      return run_gen(a, opt);
    }
    if (sim->parsed()) {
      command = "simulate";
      return run_simulate(a, b, *sim, opt);
    }
    if (fit->parsed()) {
      command = "fit";
      return run_fit(a, b, c, *fit, opt);
    }
    if (refine->parsed()) {
      command = "refine";
      return run_refine(a, b, c, d, *refine, opt);
    }
    if (eval->parsed()) {
      command = "eval";
      return run_eval(a, b, c, *eval, opt);
    }
    command = "analyze";
    return run_analyze(a, c, d, *analyze, opt);
  } catch (const SimulationDiverged& e) {
    return print_error(e.kind(), e.what(), command, e.frame());
  } catch (const Error& e) {
    return print_error(e.kind(), e.what(), command);
  } catch (const std::exception& e) {
    return print_error("invalid_argument", e.what(), command);
  }
}

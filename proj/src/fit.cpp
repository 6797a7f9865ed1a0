#include <springfit/fit.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace springfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kSearchDims = 5;
using SearchVector = Eigen::Matrix<double, kSearchDims, 1>;

/// Zero-order parameters mapped onto the unit box: log radius, degree, log
/// stiffness, friction retention, restitution.
struct SearchSpace
{
  const ZeroOrderConfig& cfg;
  double ground_height;

  SearchVector lower() const
  {
    SearchVector v;
    v << std::log(cfg.min_radius), 0.5, std::log(cfg.min_stiffness), 0.0, 0.0;
    return v;
  }
  SearchVector upper() const
  {
    SearchVector v;
    v << std::log(cfg.max_radius), cfg.max_degree_bound + 0.49, std::log(cfg.max_stiffness), 1.0, 1.0;
    return v;
  }

  SearchVector encode(const GlobalParams& g) const
  {
    SearchVector u;
    u << std::log(g.connection_radius), g.max_degree, std::log(g.global_stiffness),
      g.collision.friction_retention, g.collision.restitution;
    return clamp(((u - lower()).array() / (upper() - lower()).array()).matrix());
  }

  static SearchVector clamp(const SearchVector& u) { return u.cwiseMax(0.0).cwiseMin(1.0); }

  GlobalParams decode(const SearchVector& unit) const
  {
    const SearchVector u = lower() + clamp(unit).cwiseProduct(upper() - lower());
    GlobalParams g;
    g.connection_radius = std::exp(u[0]);
    g.max_degree = std::max(1, static_cast<int>(std::lround(u[1])));
    g.global_stiffness = std::exp(u[2]);
    g.collision.ground_height = ground_height;
    g.collision.friction_retention = u[3];
    g.collision.restitution = u[4];
    return g;
  }
};

std::string describe(const GlobalParams& g)
{
  std::ostringstream os;
  os << "(radius=" << g.connection_radius << ", degree=" << g.max_degree
     << ", stiffness=" << g.global_stiffness << ", friction=" << g.collision.friction_retention
     << ", restitution=" << g.collision.restitution << ")";
  return os.str();
}

PhysicsConfig with_global(PhysicsConfig config, const GlobalParams& global)
{
  config.global = global;
  return config;
}

struct AdamOutcome
{
  Eigen::VectorXd best;
  double best_loss = kInf;
  std::vector<double> curve;
  bool diverged = false;
};

/// Adam over a flat parameter vector, keeping the lowest-loss iterate. The
/// callback returns false when the evaluation diverged.
template <typename Evaluate>
AdamOutcome run_adam(Eigen::VectorXd params, const AdamConfig& cfg, Evaluate&& evaluate)
{
  AdamOutcome out;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
  double lr = cfg.learning_rate;
  for (int it = 0; it <= cfg.iterations; ++it) {
    double loss = kInf;
    Eigen::VectorXd grad;
    if (!evaluate(params, loss, grad)) {
      out.diverged = true;
      break;
    }
    out.curve.push_back(loss);
    if (loss < out.best_loss || out.best.size() == 0) {
      out.best_loss = loss;
      out.best = params;
    }
    if (it == cfg.iterations)
      break;
    const int t = it + 1;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
    lr *= cfg.decay;
  }
  return out;
}

} // namespace

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn)
{
  const std::size_t workers =
    std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers)
          fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool)
    t.join();
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

double evaluate_global(const FitProblem& problem, const GlobalParams& global)
{
  try {
    const SystemTopology topo =
      build_topology(problem.object_rest, problem.controller.frames.front(), global);
    return rollout_loss(topo, with_global(problem.config, global), problem.controller,
                        problem.observations, problem.lambda_tr);
  } catch (const NoContact&) {
    return kInf;
  } catch (const SimulationDiverged&) {
    return kInf;
  }
}

FitResult fit_zero_order(const FitProblem& problem, const ZeroOrderConfig& cfg)
{
  const SearchSpace space{cfg, problem.config.global.collision.ground_height};
  const int n = cfg.search_collision ? kSearchDims : 3;
  const int lambda = std::max(2, cfg.population);
  const int mu = lambda / 2;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // Standard evolution-strategy constants for dimension n.
  Eigen::VectorXd weights(mu);
  for (int i = 0; i < mu; ++i)
    weights[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();
  const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
  const double d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
  const double c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
  const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) * (n + 2.0) + mu_eff));
  const double chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  GlobalParams start = cfg.initial;
  start.collision.ground_height = space.ground_height;
  const SearchVector origin = space.encode(start);

  // The start itself, not its decoded image, so a zero budget returns it verbatim.
  GlobalParams best = start;
  double best_loss = evaluate_global(problem, best);
  SearchVector best_unit = origin;
  std::vector<GlobalParams> tried{best};

  FitResult result;
  result.seed = cfg.seed;
  result.zero_order_curve.push_back(best_loss);

  auto embed = [&](const Eigen::VectorXd& x) {
    SearchVector u = origin;
    u.head(n) = x;
    return u;
  };

  Eigen::VectorXd mean = origin.head(n);
  double sigma = cfg.initial_spread;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd path_sigma = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd path_c = Eigen::VectorXd::Zero(n);
  int generation = 0;
  int stalled = 0;
  int restarts = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd scale = eig.eigenvalues().cwiseMax(1e-20).cwiseSqrt();
    const Eigen::MatrixXd basis = eig.eigenvectors();

    std::vector<Eigen::VectorXd> steps(static_cast<std::size_t>(lambda));
    std::vector<SearchVector> units(static_cast<std::size_t>(lambda));
    std::vector<GlobalParams> params(static_cast<std::size_t>(lambda));
    for (std::size_t c = 0; c < steps.size(); ++c) {
      Eigen::VectorXd z(n);
      for (int d = 0; d < n; ++d)
        z[d] = normal(rng);
      steps[c] = basis * scale.cwiseProduct(z);
      units[c] = SearchSpace::clamp(embed(mean + sigma * steps[c]));
      params[c] = space.decode(units[c]);
    }
    std::vector<double> losses(steps.size(), kInf);
    parallel_for(steps.size(), [&](std::size_t c) { losses[c] = evaluate_global(problem, params[c]); });
    tried.insert(tried.end(), params.begin(), params.end());

    std::vector<std::size_t> rank(steps.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
    if (losses[rank[0]] < best_loss) {
      const double gain = (best_loss - losses[rank[0]]) / std::max(std::abs(best_loss), 1e-300);
      best_loss = losses[rank[0]];
      best = params[rank[0]];
      best_unit = units[rank[0]];
      stalled = gain > cfg.min_relative_gain || !std::isfinite(gain) ? 0 : stalled + 1;
    } else {
      ++stalled;
    }
    result.zero_order_curve.push_back(best_loss);

    // Recombine on the box-repaired points so the mean stays feasible.
    Eigen::VectorXd step_w = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) {
      const auto c = rank[static_cast<std::size_t>(i)];
      steps[c] = (units[c].head(n) - mean) / sigma;
      step_w += weights[i] * steps[c];
    }
    mean += sigma * step_w;
    ++generation;

    const Eigen::VectorXd whitened = basis * (basis.transpose() * step_w).cwiseQuotient(scale);
    path_sigma = (1.0 - c_sigma) * path_sigma + std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * whitened;
    const bool h_sigma = path_sigma.norm() / std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * generation)) <
                         (1.4 + 2.0 / (n + 1.0)) * chi_n;
    path_c = (1.0 - c_c) * path_c + (h_sigma ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) : 0.0) * step_w;
    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const auto& y = steps[rank[static_cast<std::size_t>(i)]];
      rank_mu += weights[i] * y * y.transpose();
    }
    cov = (1.0 - c_1 - c_mu) * cov +
          c_1 * (path_c * path_c.transpose() + (h_sigma ? 0.0 : c_c * (2.0 - c_c)) * cov) + c_mu * rank_mu;
    sigma *= std::exp(c_sigma / d_sigma * (path_sigma.norm() / chi_n - 1.0));
    sigma = std::min(sigma, 1.0);

    // Restart once the search has collapsed or stopped paying off. Restarts
    // alternate between the incumbent and a uniformly drawn point, since the
    // radius/degree landscape is piecewise constant with narrow basins.
    const bool collapsed = sigma * scale.maxCoeff() < 1e-3;
    if (collapsed || stalled >= cfg.patience) {
      ++restarts;
      if (restarts % 2 == 1) {
        mean = best_unit.head(n);
      } else {
        for (int d = 0; d < n; ++d)
          mean[d] = uniform(rng);
      }
      sigma = cfg.initial_spread;
      cov.setIdentity();
      path_sigma.setZero();
      path_c.setZero();
      generation = 0;
      stalled = 0;
    }
  }

  if (!std::isfinite(best_loss)) {
    std::ostringstream os;
    os << "every zero-order candidate failed; tried";
    for (std::size_t k = 0; k < tried.size() && k < 20; ++k)
      os << ' ' << describe(tried[k]);
    if (tried.size() > 20)
      os << " ... (" << tried.size() << " total)";
    throw Error("all_candidates_failed", os.str());
  }

  result.global = best;
  result.topology = build_topology(problem.object_rest, problem.controller.frames.front(), best);
  result.loss = best_loss;
  if (!result.topology.isolated_nodes.empty())
    result.warnings.push_back(std::to_string(result.topology.isolated_nodes.size()) +
                              " isolated object nodes at radius " +
                              std::to_string(best.connection_radius));
  return result;
}

FitResult fit_first_order(const FitProblem& problem, const FitResult& start, const AdamConfig& cfg)
{
  FitResult result = start;
  const PhysicsConfig config = with_global(problem.config, start.global);
  const Eigen::VectorXd initial = spring_params(start.topology).to_log();

  auto evaluate = [&](const Eigen::VectorXd& log_params, double& loss, Eigen::VectorXd& grad) {
    try {
      const GradientReport r =
        loss_and_grad_params(start.topology, config, SpringParams::from_log(log_params),
                             problem.controller, problem.observations, problem.lambda_tr);
      loss = r.loss;
      grad = r.d_log_params;
      return true;
    } catch (const SimulationDiverged&) {
      return false;
    }
  };
  const auto outcome = run_adam(initial, cfg, evaluate);
  result.first_order_curve = outcome.curve;
  result.diverged = outcome.diverged;
  if (outcome.best.size() == 0) {
    result.warnings.push_back("first-order stage diverged at its starting point");
    return result;
  }
  apply_spring_params(result.topology, SpringParams::from_log(outcome.best));
  result.loss = outcome.best_loss;
  if (outcome.diverged)
    result.warnings.push_back("first-order stage diverged; reverted to the best valid iterate");
  return result;
}

FitResult refine_controller(const FitProblem& problem, const FitResult& model, const AdamConfig& cfg)
{
  FitResult result = model;
  const PhysicsConfig config = with_global(problem.config, model.global);
  const SpringParams params = spring_params(model.topology);
  const ControllerTrajectory& init = problem.controller;
  init.validate();
  const Eigen::Index per_frame = 3 * init.node_count();

  auto unflatten = [&](const Eigen::VectorXd& flat) {
    ControllerTrajectory traj;
    traj.frame_dt = init.frame_dt;
    for (Eigen::Index f = 0; f < init.frame_count(); ++f)
      traj.frames.emplace_back(
        Eigen::Map<const PointCloud>(flat.data() + f * per_frame, 3, init.node_count()));
    return traj;
  };
  Eigen::VectorXd flat(per_frame * init.frame_count());
  for (Eigen::Index f = 0; f < init.frame_count(); ++f)
    flat.segment(f * per_frame, per_frame) =
      Eigen::Map<const Eigen::VectorXd>(init.frames[static_cast<std::size_t>(f)].data(), per_frame);

  auto evaluate = [&](const Eigen::VectorXd& x, double& loss, Eigen::VectorXd& grad) {
    try {
      const GradientReport r = loss_and_grad_controller(model.topology, config, params, unflatten(x),
                                                        problem.observations, problem.lambda_tr);
      loss = r.loss;
      grad = r.controller_flat();
      return true;
    } catch (const SimulationDiverged&) {
      return false;
    }
  };
  const auto outcome = run_adam(flat, cfg, evaluate);
  result.refine_curve = outcome.curve;
  result.diverged = outcome.diverged;
  if (outcome.best.size() == 0) {
    result.refined_controller = init;
    result.warnings.push_back("refinement diverged at its starting point");
    return result;
  }
  result.refined_controller = unflatten(outcome.best);
  result.loss = outcome.best_loss;
  if (outcome.diverged)
    result.warnings.push_back("refinement diverged; reverted to the best valid iterate");
  return result;
}

FitResult fit_pipeline(const FitProblem& problem, const ZeroOrderConfig& zero_order,
                       const AdamConfig& first_order)
{
  return fit_first_order(problem, fit_zero_order(problem, zero_order), first_order);
}

} // namespace springfit

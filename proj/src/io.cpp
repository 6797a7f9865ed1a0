#include <springfit/io.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace springfit {

namespace fs = std::filesystem;

std::string format_double(double value)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text)
{
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw FormatError("not a number: '" + std::string(text) + "'");
  return value;
}

namespace {

template <typename Int>
Int parse_int(std::string_view text)
{
  Int value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw FormatError("not an integer: '" + std::string(text) + "'");
  return value;
}

std::vector<std::string_view> split(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t at = 0;
  while (at < line.size()) {
    while (at < line.size() && (line[at] == ' ' || line[at] == '\t'))
      ++at;
    const std::size_t start = at;
    while (at < line.size() && line[at] != ' ' && line[at] != '\t')
      ++at;
    if (at > start)
      out.push_back(line.substr(start, at - start));
  }
  return out;
}

std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

class Writer
{
public:
  Writer(std::string_view kind, const ConfigStamp& stamp)
  {
    out_ << "#springfit " << kind << ' ' << kFormatMajor << '.' << kFormatMinor << '\n';
    for (const auto& [key, value] : stamp)
      put("run." + key, value);
  }

  void put(const std::string& key, std::string_view value)
  {
    if (value.find('\n') != std::string_view::npos)
      throw FormatError("value of '" + key + "' spans lines");
    out_ << key << ' ' << value << '\n';
  }
  void num(const std::string& key, double v) { put(key, format_double(v)); }
  template <typename Int>
  void integer(const std::string& key, Int v) { put(key, std::to_string(v)); }
  void vec(const std::string& key, const Vec3d& v)
  {
    put(key, format_double(v.x()) + ' ' + format_double(v.y()) + ' ' + format_double(v.z()));
  }
  void list(const std::string& key, const std::vector<double>& values)
  {
    std::string s = std::to_string(values.size());
    for (double v : values)
      s += ' ' + format_double(v);
    put(key, s);
  }
  void optional(const std::string& key, const std::optional<double>& v)
  {
    put(key, v ? format_double(*v) : std::string("undefined"));
  }
  void block(const std::string& key, const std::vector<std::string>& lines)
  {
    out_ << key << " @" << lines.size() << '\n';
    for (const auto& l : lines)
      out_ << l << '\n';
  }
  void points(const std::string& key, const PointCloud& pts)
  {
    std::vector<std::string> lines;
    lines.reserve(static_cast<std::size_t>(pts.cols()));
    for (Eigen::Index c = 0; c < pts.cols(); ++c)
      lines.push_back(format_double(pts(0, c)) + ' ' + format_double(pts(1, c)) + ' ' +
                      format_double(pts(2, c)));
    block(key, lines);
  }
  std::string str() const { return out_.str(); }

private:
  std::ostringstream out_;
};

struct Record
{
  std::string value;
  std::vector<std::string> block;
  bool is_block = false;
};

class Reader
{
public:
  Reader(const std::string& text, std::string_view kind, ConfigStamp* stamp)
  {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
      throw FormatError("empty file");
    check_header(line, kind);
    while (std::getline(in, line)) {
      const std::string_view t = trim(line);
      if (t.empty() || t.front() == '#')
        continue;
      const auto space = t.find_first_of(" \t");
      const std::string key(t.substr(0, space));
      const std::string_view rest = space == std::string_view::npos ? std::string_view{} : trim(t.substr(space));
      Record rec;
      if (!rest.empty() && rest.front() == '@') {
        const auto n = parse_int<std::size_t>(rest.substr(1));
        rec.is_block = true;
        for (std::size_t k = 0; k < n; ++k) {
          if (!std::getline(in, line))
            throw FormatError("block '" + key + "' truncated");
          rec.block.emplace_back(trim(line));
        }
      } else {
        rec.value = std::string(rest);
      }
      if (key.rfind("run.", 0) == 0) {
        if (stamp)
          (*stamp)[key.substr(4)] = rec.value;
        continue;
      }
      if (!records_.emplace(key, std::move(rec)).second)
        throw FormatError("duplicate key '" + key + "'");
    }
  }

  bool has(const std::string& key) const { return records_.count(key) != 0; }

  std::string str(const std::string& key)
  {
    Record r = take(key);
    if (r.is_block)
      throw FormatError("key '" + key + "' expects a value, found a block");
    return r.value;
  }
  std::string token(const std::string& key)
  {
    const std::string s = str(key);
    if (split(s).size() != 1)
      throw FormatError("key '" + key + "' expects one token");
    return s;
  }
  double num(const std::string& key) { return parse_double(token(key)); }
  template <typename Int>
  Int integer(const std::string& key) { return parse_int<Int>(token(key)); }
  bool flag(const std::string& key)
  {
    const int v = integer<int>(key);
    if (v != 0 && v != 1)
      throw FormatError("key '" + key + "' expects 0 or 1");
    return v == 1;
  }
  Vec3d vec(const std::string& key)
  {
    const std::string s = str(key);
    const auto toks = split(s);
    if (toks.size() != 3)
      throw FormatError("key '" + key + "' expects three numbers");
    return Vec3d(parse_double(toks[0]), parse_double(toks[1]), parse_double(toks[2]));
  }
  std::vector<double> list(const std::string& key)
  {
    const std::string s = str(key);
    const auto toks = split(s);
    if (toks.empty())
      throw FormatError("key '" + key + "' expects a count");
    const auto n = parse_int<std::size_t>(toks[0]);
    if (toks.size() != n + 1)
      throw FormatError("key '" + key + "' count does not match its values");
    std::vector<double> out;
    for (std::size_t k = 1; k < toks.size(); ++k)
      out.push_back(parse_double(toks[k]));
    return out;
  }
  std::optional<double> optional(const std::string& key)
  {
    const std::string s = token(key);
    if (s == "undefined")
      return std::nullopt;
    return parse_double(s);
  }
  std::vector<std::string> block(const std::string& key)
  {
    Record r = take(key);
    if (!r.is_block)
      throw FormatError("key '" + key + "' expects a block");
    return std::move(r.block);
  }
  PointCloud points(const std::string& key)
  {
    const auto lines = block(key);
    PointCloud pts(3, static_cast<Eigen::Index>(lines.size()));
    for (std::size_t c = 0; c < lines.size(); ++c) {
      const auto toks = split(lines[c]);
      if (toks.size() != 3)
        throw FormatError("point row of '" + key + "' needs three numbers");
      for (int d = 0; d < 3; ++d)
        pts(d, static_cast<Eigen::Index>(c)) = parse_double(toks[static_cast<std::size_t>(d)]);
    }
    return pts;
  }

  void finish() const
  {
    if (!records_.empty())
      throw FormatError("unknown key '" + records_.begin()->first + "'");
  }

private:
  void check_header(std::string_view line, std::string_view kind)
  {
    const auto toks = split(trim(line));
    if (toks.size() != 3 || toks[0] != "#springfit")
      throw FormatError("missing '#springfit' header");
    if (toks[1] != kind)
      throw FormatError("expected a '" + std::string(kind) + "' file, found '" + std::string(toks[1]) + "'");
    const auto dot = toks[2].find('.');
    if (dot == std::string_view::npos)
      throw FormatError("malformed version '" + std::string(toks[2]) + "'");
    const int major = parse_int<int>(toks[2].substr(0, dot));
    parse_int<int>(toks[2].substr(dot + 1));
    if (major != kFormatMajor)
      throw FormatError("unsupported format major version " + std::to_string(major));
  }

  Record take(const std::string& key)
  {
    auto it = records_.find(key);
    if (it == records_.end())
      throw FormatError("missing key '" + key + "'");
    Record r = std::move(it->second);
    records_.erase(it);
    return r;
  }

  std::map<std::string, Record> records_;
};

void put_global(Writer& w, const std::string& p, const GlobalParams& g)
{
  w.num(p + "radius", g.connection_radius);
  w.integer(p + "max_degree", g.max_degree);
  w.num(p + "stiffness", g.global_stiffness);
  w.num(p + "ground_height", g.collision.ground_height);
  w.num(p + "friction", g.collision.friction_retention);
  w.num(p + "restitution", g.collision.restitution);
}

GlobalParams get_global(Reader& r, const std::string& p)
{
  GlobalParams g;
  g.connection_radius = r.num(p + "radius");
  g.max_degree = r.integer<int>(p + "max_degree");
  g.global_stiffness = r.num(p + "stiffness");
  g.collision.ground_height = r.num(p + "ground_height");
  g.collision.friction_retention = r.num(p + "friction");
  g.collision.restitution = r.num(p + "restitution");
  return g;
}

void put_physics(Writer& w, const std::string& p, const PhysicsConfig& c)
{
  put_global(w, p, c.global);
  w.vec(p + "gravity", c.gravity);
  w.num(p + "frame_dt", c.frame_dt);
  w.integer(p + "substeps", c.substeps);
}

PhysicsConfig get_physics(Reader& r, const std::string& p)
{
  PhysicsConfig c;
  c.global = get_global(r, p);
  c.gravity = r.vec(p + "gravity");
  c.frame_dt = r.num(p + "frame_dt");
  c.substeps = r.integer<int>(p + "substeps");
  return c;
}

void put_frames(Writer& w, const std::string& p, const std::vector<PointCloud>& frames)
{
  w.integer(p + "frames", frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t)
    w.points(p + std::to_string(t), frames[t]);
}

std::vector<PointCloud> get_frames(Reader& r, const std::string& p)
{
  const auto n = r.integer<std::size_t>(p + "frames");
  std::vector<PointCloud> frames;
  for (std::size_t t = 0; t < n; ++t)
    frames.push_back(r.points(p + std::to_string(t)));
  return frames;
}

void put_controller(Writer& w, const std::string& p, const ControllerTrajectory& traj)
{
  w.num(p + "frame_dt", traj.frame_dt);
  put_frames(w, p, traj.frames);
}

ControllerTrajectory get_controller(Reader& r, const std::string& p)
{
  ControllerTrajectory traj;
  traj.frame_dt = r.num(p + "frame_dt");
  traj.frames = get_frames(r, p);
  return traj;
}

void put_topology(Writer& w, const std::string& p, const SystemTopology& topo)
{
  std::vector<std::string> nodes;
  for (Eigen::Index c = 0; c < topo.rest.cols(); ++c)
    nodes.push_back(format_double(topo.rest(0, c)) + ' ' + format_double(topo.rest(1, c)) + ' ' +
                    format_double(topo.rest(2, c)) + ' ' + format_double(topo.mass[c]));
  w.block(p + "nodes", nodes);
  w.integer(p + "object_count", topo.object_count);
  w.integer(p + "object_spring_count", topo.object_spring_count);
  std::vector<std::string> springs;
  for (const Spring& s : topo.springs)
    springs.push_back(std::to_string(s.i) + ' ' + std::to_string(s.j) + ' ' + format_double(s.stiffness) + ' ' +
                      format_double(s.damping) + ' ' + format_double(s.rest_length) + ' ' +
                      (s.kind == SpringKind::object ? "object" : "contact"));
  w.block(p + "springs", springs);
  std::vector<std::string> isolated;
  for (Eigen::Index i : topo.isolated_nodes)
    isolated.push_back(std::to_string(i));
  w.block(p + "isolated", isolated);
}

SystemTopology get_topology(Reader& r, const std::string& p)
{
  SystemTopology topo;
  const auto nodes = r.block(p + "nodes");
  topo.rest.resize(3, static_cast<Eigen::Index>(nodes.size()));
  topo.mass.resize(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t c = 0; c < nodes.size(); ++c) {
    const auto toks = split(nodes[c]);
    if (toks.size() != 4)
      throw FormatError("node row needs position and mass");
    const auto col = static_cast<Eigen::Index>(c);
    for (int d = 0; d < 3; ++d)
      topo.rest(d, col) = parse_double(toks[static_cast<std::size_t>(d)]);
    topo.mass[col] = parse_double(toks[3]);
  }
  topo.object_count = r.integer<Eigen::Index>(p + "object_count");
  topo.object_spring_count = r.integer<std::size_t>(p + "object_spring_count");
  for (const auto& line : r.block(p + "springs")) {
    const auto toks = split(line);
    if (toks.size() != 6)
      throw FormatError("spring row needs six fields");
    Spring s;
    s.i = parse_int<Eigen::Index>(toks[0]);
    s.j = parse_int<Eigen::Index>(toks[1]);
    s.stiffness = parse_double(toks[2]);
    s.damping = parse_double(toks[3]);
    s.rest_length = parse_double(toks[4]);
    if (toks[5] == "object")
      s.kind = SpringKind::object;
    else if (toks[5] == "contact")
      s.kind = SpringKind::contact;
    else
      throw FormatError("unknown spring kind '" + std::string(toks[5]) + "'");
    if (s.i < 0 || s.j < 0 || s.i >= topo.rest.cols() || s.j >= topo.rest.cols())
      throw FormatError("spring endpoint out of range");
    topo.springs.push_back(s);
  }
  for (const auto& line : r.block(p + "isolated"))
    topo.isolated_nodes.push_back(parse_int<Eigen::Index>(trim(line)));
  if (topo.object_count < 0 || topo.object_count > topo.rest.cols() ||
      topo.object_spring_count > topo.springs.size())
    throw FormatError("inconsistent topology counts");
  return topo;
}

void put_spec(Writer& w, const std::string& p, const SceneSpec& s)
{
  w.put(p + "name", s.name);
  w.put(p + "geometry", to_string(s.geometry));
  w.put(p + "counts", std::to_string(s.counts.x()) + ' ' + std::to_string(s.counts.y()) + ' ' +
                        std::to_string(s.counts.z()));
  w.num(p + "spacing", s.spacing);
  w.vec(p + "origin", s.origin);
  put_global(w, p + "truth.", s.truth);
  w.num(p + "stiffness_b", s.stiffness_b);
  w.num(p + "damping_factor", s.damping_factor);
  w.vec(p + "gravity", s.gravity);
  w.num(p + "frame_dt", s.frame_dt);
  w.integer(p + "frames", s.frames);
  w.integer(p + "substeps", s.substeps);
  w.integer(p + "reference_factor", s.reference_factor);
  w.integer(p + "patches", s.patches);
  w.integer(p + "controller_rows", s.controller_rows);
  w.integer(p + "controller_cols", s.controller_cols);
  w.num(p + "controller_spacing", s.controller_spacing);
  w.num(p + "controller_gap", s.controller_gap);
  w.integer(p + "sparse_k", s.sparse_k);
  w.put(p + "script", to_string(s.script));
  w.num(p + "amplitude", s.amplitude);
  w.num(p + "sigma_obs", s.sigma_obs);
  w.num(p + "sigma_tr", s.sigma_tr);
  w.num(p + "sigma_ctl", s.sigma_ctl);
  w.num(p + "track_fraction", s.track_fraction);
  w.integer(p + "seed", s.seed);
}

/// With `partial`, absent keys keep the defaults.
SceneSpec get_spec(Reader& r, const std::string& p, bool partial)
{
  SceneSpec s;
  auto want = [&](const char* key) { return !partial || r.has(p + key); };
  if (want("name")) s.name = r.token(p + "name");
  if (want("geometry")) s.geometry = geometry_from_string(r.token(p + "geometry"));
  if (want("counts")) {
    const std::string c = r.str(p + "counts");
    const auto toks = split(c);
    if (toks.size() != 3)
      throw FormatError("counts needs three integers");
    s.counts = Eigen::Vector3i(parse_int<int>(toks[0]), parse_int<int>(toks[1]), parse_int<int>(toks[2]));
  }
  if (want("spacing")) s.spacing = r.num(p + "spacing");
  if (want("origin")) s.origin = r.vec(p + "origin");
  if (want("truth.radius")) s.truth.connection_radius = r.num(p + "truth.radius");
  if (want("truth.max_degree")) s.truth.max_degree = r.integer<int>(p + "truth.max_degree");
  if (want("truth.stiffness")) s.truth.global_stiffness = r.num(p + "truth.stiffness");
  if (want("truth.ground_height")) s.truth.collision.ground_height = r.num(p + "truth.ground_height");
  if (want("truth.friction")) s.truth.collision.friction_retention = r.num(p + "truth.friction");
  if (want("truth.restitution")) s.truth.collision.restitution = r.num(p + "truth.restitution");
  if (want("stiffness_b")) s.stiffness_b = r.num(p + "stiffness_b");
  if (want("damping_factor")) s.damping_factor = r.num(p + "damping_factor");
  if (want("gravity")) s.gravity = r.vec(p + "gravity");
  if (want("frame_dt")) s.frame_dt = r.num(p + "frame_dt");
  if (want("frames")) s.frames = r.integer<int>(p + "frames");
  if (want("substeps")) s.substeps = r.integer<int>(p + "substeps");
  if (want("reference_factor")) s.reference_factor = r.integer<int>(p + "reference_factor");
  if (want("patches")) s.patches = r.integer<int>(p + "patches");
  if (want("controller_rows")) s.controller_rows = r.integer<int>(p + "controller_rows");
  if (want("controller_cols")) s.controller_cols = r.integer<int>(p + "controller_cols");
  if (want("controller_spacing")) s.controller_spacing = r.num(p + "controller_spacing");
  if (want("controller_gap")) s.controller_gap = r.num(p + "controller_gap");
  if (want("sparse_k")) s.sparse_k = r.integer<int>(p + "sparse_k");
  if (want("script")) s.script = script_from_string(r.token(p + "script"));
  if (want("amplitude")) s.amplitude = r.num(p + "amplitude");
  if (want("sigma_obs")) s.sigma_obs = r.num(p + "sigma_obs");
  if (want("sigma_tr")) s.sigma_tr = r.num(p + "sigma_tr");
  if (want("sigma_ctl")) s.sigma_ctl = r.num(p + "sigma_ctl");
  if (want("track_fraction")) s.track_fraction = r.num(p + "track_fraction");
  if (want("seed")) s.seed = r.integer<std::uint64_t>(p + "seed");
  return s;
}

} // namespace

std::string format_spec(const SceneSpec& spec)
{
  Writer w("spec", {});
  put_spec(w, "", spec);
  return w.str();
}

SceneSpec parse_spec(const std::string& text)
{
  Reader r(text, "spec", nullptr);
  SceneSpec s = get_spec(r, "", true);
  r.finish();
  s.validate();
  return s;
}

std::string format_scene(const Scene& scene, const ConfigStamp& stamp)
{
  Writer w("scene", stamp);
  put_spec(w, "spec.", scene.spec);
  put_topology(w, "truth.", scene.truth.topology);
  put_physics(w, "truth.config.", scene.truth.config);
  put_controller(w, "controller.", scene.truth.controller);
  put_frames(w, "reference.", scene.truth.reference);
  std::string mask;
  for (auto m : scene.truth.material)
    mask += m ? '1' : '0';
  w.put("material", std::to_string(scene.truth.material.size()) + (mask.empty() ? "" : " " + mask));
  if (scene.truth.perturbed_controller)
    put_controller(w, "perturbed.", *scene.truth.perturbed_controller);
  return w.str();
}

Scene parse_scene(const std::string& text, ConfigStamp* stamp)
{
  Reader r(text, "scene", stamp);
  Scene scene;
  scene.spec = get_spec(r, "spec.", false);
  scene.truth.topology = get_topology(r, "truth.");
  scene.truth.config = get_physics(r, "truth.config.");
  scene.truth.controller = get_controller(r, "controller.");
  scene.truth.reference = get_frames(r, "reference.");
  const std::string mask = r.str("material");
  const auto toks = split(mask);
  const auto n = toks.empty() ? 0 : parse_int<std::size_t>(toks[0]);
  if (toks.size() != (n == 0 ? 1u : 2u) || (n > 0 && toks[1].size() != n))
    throw FormatError("material mask length mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    if (toks[1][k] != '0' && toks[1][k] != '1')
      throw FormatError("material mask must be 0/1");
    scene.truth.material.push_back(toks[1][k] == '1');
  }
  if (r.has("perturbed.frame_dt"))
    scene.truth.perturbed_controller = get_controller(r, "perturbed.");
  r.finish();
  return scene;
}

std::string format_observations(const ObservationSequence& obs, const ConfigStamp& stamp)
{
  Writer w("obs", stamp);
  w.num("frame_dt", obs.frame_dt);
  put_frames(w, "cloud.", obs.clouds);
  put_frames(w, "track.", obs.tracks);
  return w.str();
}

ObservationSequence parse_observations(const std::string& text, ConfigStamp* stamp)
{
  Reader r(text, "obs", stamp);
  ObservationSequence obs;
  obs.frame_dt = r.num("frame_dt");
  obs.clouds = get_frames(r, "cloud.");
  obs.tracks = get_frames(r, "track.");
  r.finish();
  obs.validate();
  return obs;
}

std::string format_controller(const ControllerTrajectory& traj, const ConfigStamp& stamp)
{
  Writer w("ctl", stamp);
  put_controller(w, "", traj);
  return w.str();
}

ControllerTrajectory parse_controller(const std::string& text, ConfigStamp* stamp)
{
  Reader r(text, "ctl", stamp);
  ControllerTrajectory traj = get_controller(r, "");
  r.finish();
  traj.validate();
  return traj;
}

std::string format_rollout(const std::vector<PointCloud>& frames, const ConfigStamp& stamp)
{
  Writer w("roll", stamp);
  put_frames(w, "frame.", frames);
  return w.str();
}

std::vector<PointCloud> parse_rollout(const std::string& text, ConfigStamp* stamp)
{
  Reader r(text, "roll", stamp);
  auto frames = get_frames(r, "frame.");
  r.finish();
  return frames;
}

std::string format_fit(const FitResult& fit, const ConfigStamp& stamp)
{
  Writer w("fit", stamp);
  put_global(w, "global.", fit.global);
  put_topology(w, "model.", fit.topology);
  w.num("loss", fit.loss);
  w.list("zero_order_curve", fit.zero_order_curve);
  w.list("first_order_curve", fit.first_order_curve);
  w.list("refine_curve", fit.refine_curve);
  w.integer("seed", fit.seed);
  w.integer("diverged", fit.diverged ? 1 : 0);
  w.block("warnings", fit.warnings);
  if (fit.refined_controller)
    put_controller(w, "refined.", *fit.refined_controller);
  return w.str();
}

FitResult parse_fit(const std::string& text, ConfigStamp* stamp)
{
  Reader r(text, "fit", stamp);
  FitResult fit;
  fit.global = get_global(r, "global.");
  fit.topology = get_topology(r, "model.");
  fit.loss = r.num("loss");
  fit.zero_order_curve = r.list("zero_order_curve");
  fit.first_order_curve = r.list("first_order_curve");
  fit.refine_curve = r.list("refine_curve");
  fit.seed = r.integer<std::uint64_t>("seed");
  fit.diverged = r.flag("diverged");
  fit.warnings = r.block("warnings");
  if (r.has("refined.frame_dt"))
    fit.refined_controller = get_controller(r, "refined.");
  r.finish();
  return fit;
}

std::string format_report(const EvalReport& rep, const ConfigStamp& stamp)
{
  Writer w("report", stamp);
  w.put("reduction", rep.reduction);
  w.num("tau_dyn", rep.tau_dyn);
  w.num("cd_full_mm", rep.cd_full_mm);
  w.optional("cd_dyn_mm", rep.cd_dyn_mm);
  w.num("track_error", rep.track_error);
  w.optional("rrd_object", rep.rrd_object);
  w.optional("rrd_virtual", rep.rrd_virtual);
  w.optional("contact_acc_5mm", rep.contact_acc_5mm);
  w.optional("contact_acc_10mm", rep.contact_acc_10mm);
  w.list("frame_cd_mm", rep.frame_cd_mm);
  w.list("frame_track_error", rep.frame_track_error);
  return w.str();
}

EvalReport parse_report(const std::string& text, ConfigStamp* stamp)
{
  Reader r(text, "report", stamp);
  EvalReport rep;
  rep.reduction = r.str("reduction");
  rep.tau_dyn = r.num("tau_dyn");
  rep.cd_full_mm = r.num("cd_full_mm");
  rep.cd_dyn_mm = r.optional("cd_dyn_mm");
  rep.track_error = r.num("track_error");
  rep.rrd_object = r.optional("rrd_object");
  rep.rrd_virtual = r.optional("rrd_virtual");
  rep.contact_acc_5mm = r.optional("contact_acc_5mm");
  rep.contact_acc_10mm = r.optional("contact_acc_10mm");
  rep.frame_cd_mm = r.list("frame_cd_mm");
  rep.frame_track_error = r.list("frame_track_error");
  r.finish();
  return rep;
}

std::string format_config(const ConfigStamp& config)
{
  Writer w("config", {});
  for (const auto& [key, value] : config)
    w.put(key, value);
  return w.str();
}

ConfigStamp parse_config(const std::string& text)
{
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  {
    Reader header(line + "\n", "config", nullptr);
  }
  ConfigStamp out;
  while (std::getline(in, line)) {
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#')
      continue;
    const auto space = t.find_first_of(" \t");
    const std::string key(t.substr(0, space));
    const std::string value(space == std::string_view::npos ? std::string_view{} : trim(t.substr(space)));
    if (!out.emplace(key, value).second)
      throw FormatError("duplicate key '" + key + "'");
  }
  return out;
}

std::string file_kind(const std::string& text)
{
  const auto end = text.find('\n');
  const auto toks = split(std::string_view(text).substr(0, end));
  if (toks.size() != 3 || toks[0] != "#springfit")
    throw FormatError("missing '#springfit' header");
  return std::string(toks[1]);
}

std::string read_text(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("missing_file", "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const fs::path& path, const std::string& text)
{
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error("io", "cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out)
      throw Error("io", "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("io", "cannot move output into '" + path.string() + "'");
  }
}

} // namespace springfit

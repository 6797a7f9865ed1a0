#pragma once

#include <springfit/fit.hpp>
#include <springfit/metrics.hpp>
#include <springfit/scenegen.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace springfit {

/// Line-oriented text files. The first line is `#springfit <kind> <major>.<minor>`;
/// each following line is `key value...`, and `key @N` introduces N raw lines.
/// Doubles use the shortest representation that reads back to the same value.
inline constexpr int kFormatMajor = 1;
inline constexpr int kFormatMinor = 0;

/// Effective run configuration, stamped into outputs as `run.<key>` lines.
using ConfigStamp = std::map<std::string, std::string>;

std::string format_double(double value);
double parse_double(std::string_view text);

std::string format_spec(const SceneSpec& spec);
/// Keys missing from a spec file keep their defaults; unknown keys are rejected.
SceneSpec parse_spec(const std::string& text);

std::string format_scene(const Scene& scene, const ConfigStamp& stamp = {});
Scene parse_scene(const std::string& text, ConfigStamp* stamp = nullptr);

std::string format_observations(const ObservationSequence& obs, const ConfigStamp& stamp = {});
ObservationSequence parse_observations(const std::string& text, ConfigStamp* stamp = nullptr);

std::string format_controller(const ControllerTrajectory& traj, const ConfigStamp& stamp = {});
ControllerTrajectory parse_controller(const std::string& text, ConfigStamp* stamp = nullptr);

/// Object node positions per frame.
std::string format_rollout(const std::vector<PointCloud>& frames, const ConfigStamp& stamp = {});
std::vector<PointCloud> parse_rollout(const std::string& text, ConfigStamp* stamp = nullptr);

std::string format_fit(const FitResult& fit, const ConfigStamp& stamp = {});
FitResult parse_fit(const std::string& text, ConfigStamp* stamp = nullptr);

std::string format_report(const EvalReport& report, const ConfigStamp& stamp = {});
EvalReport parse_report(const std::string& text, ConfigStamp* stamp = nullptr);

/// Flat `key value` run configuration (kind `config`).
std::string format_config(const ConfigStamp& config);
ConfigStamp parse_config(const std::string& text);

/// Kind named in a file's header line.
std::string file_kind(const std::string& text);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary sibling file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

} // namespace springfit

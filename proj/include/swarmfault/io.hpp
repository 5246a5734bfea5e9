#pragma once

// Trace, checkpoint, CSV and SVG emitters.
//
// Trace files are JSONL: the first line is the starting state (empty
// command), every further line is one step record. Any trace file can be
// read back as a trajectory of observed vectors.

#include "swarmfault/hypothesis.hpp"
#include "swarmfault/policy_model.hpp"
#include "swarmfault/rl.hpp"
#include "swarmfault/spatial_index.hpp"
#include "swarmfault/world.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace swarmfault {

struct TraceData {
  std::vector<std::int64_t> ticks;
  Trajectory observed;
  Trajectory physical;
  std::vector<std::vector<AgentPair>> collisions;  // per line; the first is empty
  std::vector<Command> commands;                    // per line; the first is empty

  std::size_t size() const { return observed.size(); }
};

/// Trace of a run starting at `start`; records must chain from it.
TraceData make_trace(const WorldState& start, const std::vector<StepRecord>& records);

nlohmann::json step_record_json(const StepRecord& rec);
void write_trace_jsonl(const std::filesystem::path& path, const TraceData& trace);
TraceData read_trace_jsonl(const std::filesystem::path& path);
Trajectory read_trajectory_jsonl(const std::filesystem::path& path);

/// World state on line `i` of a trace.
WorldState state_at(const TraceData& trace, std::size_t i);
/// Commands of every step line, in order (the replayable plan).
std::vector<Command> trace_commands(const TraceData& trace);

// -- checkpoints -------------------------------------------------------------
//
// Layout (little-endian): 8-byte magic "SWFTCKPT", u32 version, u32 inputs,
// u32 hidden, u32 heads, u32 actions, then every tensor row-major as f64 in
// PolicyModel::Tensor order.

inline constexpr char kCheckpointMagic[8] = {'S', 'W', 'F', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const PolicyModeld& model);
PolicyModeld load_checkpoint(const std::filesystem::path& path);
std::string encode_checkpoint(const PolicyModeld& model);
PolicyModeld decode_checkpoint(const std::string& bytes);

// -- tables ------------------------------------------------------------------

void write_training_curve_csv(const std::filesystem::path& path, const std::vector<CurveRow>& curve);
std::string bench_csv(const BenchResult& bench);

// -- plots -------------------------------------------------------------------

struct PlotSpec {
  bool show_real = true;
  bool show_pred_a = true;
  bool show_pred_s = true;
  std::string color_real = "#222222";
  std::string color_pred_a = "#d62728";
  std::string color_pred_s = "#1f77b4";
  bool collision_markers = true;
  bool goal_markers = true;
  std::string title;
};

struct PlotInput {
  std::optional<TraceData> real;
  std::optional<TraceData> pred_a;
  std::optional<TraceData> pred_s;
  double arena_size = 10.0;
  std::vector<double> radii;
  std::vector<Vec2> goals;
};

/// Deterministic SVG: one polyline per agent per series (a point marker for
/// a stationary agent), goal squares, dotted collision circles and a legend.
/// Throws std::invalid_argument when no series is selected or a selected
/// trajectory is empty.
std::string render_svg(const PlotInput& input, const PlotSpec& spec);
void emit_plot(const PlotInput& input, const PlotSpec& spec, const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace swarmfault

#include "swarmfault/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace swarmfault {

using nlohmann::json;

namespace {

json pairs_json(const std::vector<AgentPair>& pairs) {
  json a = json::array();
  for (const auto& [i, j] : pairs) a.push_back(json::array({i, j}));
  return a;
}

json command_json(const Command& cmd) {
  json a = json::array();
  for (Action act : cmd.actions) a.push_back(to_string(act));
  return a;
}

Eigen::VectorXd vector_from(const json& a, const std::string& where) {
  if (!a.is_array()) throw std::runtime_error(where + ": expected an array of numbers");
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json trace_line(std::int64_t tick, const Command* cmd, const Eigen::VectorXd& physical,
                const Eigen::VectorXd& observed, const std::vector<AgentPair>& collisions) {
  json j;
  j["tick"] = tick;
  j["command"] = cmd ? command_json(*cmd) : json::array();
  j["physical"] = std::vector<double>(physical.data(), physical.data() + physical.size());
  j["observed"] = std::vector<double>(observed.data(), observed.data() + observed.size());
  j["collisions"] = pairs_json(collisions);
  return j;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& s) : s_(s) {}
  std::uint64_t take(int bytes) {
    if (pos_ + static_cast<std::size_t>(bytes) > s_.size()) throw std::runtime_error("checkpoint truncated");
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_++])) << (8 * b);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  double f64() { return std::bit_cast<double>(take(8)); }
  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  // avoid "-0.000"
  if (std::strcmp(buf, "-0.000") == 0) return "0.000";
  return buf;
}

}  // namespace

TraceData make_trace(const WorldState& start, const std::vector<StepRecord>& records) {
  TraceData t;
  t.ticks.push_back(start.tick);
  t.observed.push_back(start.observed_vector());
  t.physical.push_back(start.physical_vector());
  t.collisions.emplace_back();
  t.commands.emplace_back();
  for (const auto& r : records) {
    t.ticks.push_back(r.post.tick);
    t.observed.push_back(r.post.observed_vector());
    t.physical.push_back(r.post.physical_vector());
    t.collisions.push_back(r.collisions);
    t.commands.push_back(r.command);
  }
  return t;
}

json step_record_json(const StepRecord& rec) {
  return trace_line(rec.post.tick, &rec.command, rec.post.physical_vector(), rec.post.observed_vector(),
                    rec.collisions);
}

void write_trace_jsonl(const std::filesystem::path& path, const TraceData& trace) {
  std::string out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const Command* cmd = trace.commands[i].actions.empty() ? nullptr : &trace.commands[i];
    out += trace_line(trace.ticks[i], cmd, trace.physical[i], trace.observed[i], trace.collisions[i]).dump();
    out += '\n';
  }
  write_text_file(path, out);
}

TraceData read_trace_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path.string());
  TraceData t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
    if (!j.contains("tick") || !j.contains("observed")) throw std::runtime_error(where + ": missing tick/observed");
    t.ticks.push_back(j["tick"].get<std::int64_t>());
    t.observed.push_back(vector_from(j["observed"], where));
    if (!t.observed.empty() && t.observed.back().size() != t.observed.front().size())
      throw std::runtime_error(where + ": inconsistent state width");
    t.physical.push_back(j.contains("physical") ? vector_from(j["physical"], where) : t.observed.back());
    std::vector<AgentPair> pairs;
    if (j.contains("collisions"))
      for (const auto& p : j["collisions"]) pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    t.collisions.push_back(std::move(pairs));
    Command cmd;
    if (j.contains("command"))
      for (const auto& a : j["command"]) cmd.actions.push_back(action_from_string(a.get<std::string>()));
    t.commands.push_back(std::move(cmd));
  }
  return t;
}

Trajectory read_trajectory_jsonl(const std::filesystem::path& path) { return read_trace_jsonl(path).observed; }

WorldState state_at(const TraceData& trace, std::size_t i) {
  if (i >= trace.size()) throw std::out_of_range("trace line out of range");
  auto unflat = [](const Eigen::VectorXd& v) {
    std::vector<Vec2> pts(v.size() / 2);
    for (std::size_t j = 0; j < pts.size(); ++j) pts[j] = Vec2(v[2 * j], v[2 * j + 1]);
    return pts;
  };
  return {unflat(trace.physical[i]), unflat(trace.observed[i]), trace.ticks[i]};
}

std::vector<Command> trace_commands(const TraceData& trace) {
  return {trace.commands.begin() + (trace.commands.empty() ? 0 : 1), trace.commands.end()};
}

std::string encode_checkpoint(const PolicyModeld& model) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  const auto& s = model.shape();
  put_u32(out, static_cast<std::uint32_t>(s.inputs));
  put_u32(out, static_cast<std::uint32_t>(s.hidden));
  put_u32(out, static_cast<std::uint32_t>(s.heads));
  put_u32(out, static_cast<std::uint32_t>(s.actions));
  for (const auto& m : model.tensors())
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
  return out;
}

PolicyModeld decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw std::runtime_error("not a checkpoint (bad magic)");
  const std::string body = bytes.substr(sizeof kCheckpointMagic);
  ByteReader r(body);
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  ModelShape s;
  s.inputs = static_cast<int>(r.u32());
  s.hidden = static_cast<int>(r.u32());
  s.heads = static_cast<int>(r.u32());
  s.actions = static_cast<int>(r.u32());
  PolicyModeld model(s);
  for (auto& m : model.tensors())
    for (Eigen::Index row = 0; row < m.rows(); ++row)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(row, c) = r.f64();
  if (!r.done()) throw std::runtime_error("checkpoint has trailing bytes");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyModeld& model) {
  write_text_file(path, encode_checkpoint(model));
}

PolicyModeld load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_text_file(path)); }

void write_training_curve_csv(const std::filesystem::path& path, const std::vector<CurveRow>& curve) {
  std::ostringstream out;
  out << "update,env_steps,episodes,mean_episode_reward,policy_loss,value_loss,entropy,approx_kl,clip_fraction\n";
  out.precision(10);
  for (const auto& r : curve)
    out << r.update << ',' << r.env_steps << ',' << r.episodes << ',' << r.mean_episode_reward << ','
        << r.stats.policy_loss << ',' << r.stats.value_loss << ',' << r.stats.entropy << ',' << r.stats.approx_kl
        << ',' << r.stats.clip_fraction << '\n';
  write_text_file(path, out.str());
}

std::string bench_csv(const BenchResult& bench) {
  std::ostringstream out;
  out << "N,method,median_ns\n";
  out.precision(12);
  for (const auto& r : bench.rows) {
    out << r.n << ",grid," << r.grid_median_ns << '\n';
    out << r.n << ",naive," << r.naive_median_ns << '\n';
  }
  out.precision(4);
  out << "# slope grid=" << bench.grid_slope << " naive=" << bench.naive_slope << '\n';
  return out.str();
}

std::string render_svg(const PlotInput& input, const PlotSpec& spec) {
  struct Series {
    const TraceData* trace;
    std::string label;
    std::string color;
    std::string dash;
  };
  std::vector<Series> series;
  if (spec.show_real && input.real) series.push_back({&*input.real, "real", spec.color_real, ""});
  if (spec.show_pred_a && input.pred_a) series.push_back({&*input.pred_a, "pred H_a", spec.color_pred_a, "6,3"});
  if (spec.show_pred_s && input.pred_s) series.push_back({&*input.pred_s, "pred H_s", spec.color_pred_s, "2,3"});
  if (series.empty()) throw std::invalid_argument("plot: no series selected");
  for (const auto& s : series)
    if (s.trace->size() == 0) throw std::invalid_argument("plot: zero-length trajectory (" + s.label + ")");

  const double scale = 50.0, margin = 20.0;
  const double side = input.arena_size * scale;
  const double legend_h = 20.0 * static_cast<double>(series.size()) + 10.0;
  const double width = side + 2 * margin, height = side + 2 * margin + legend_h;
  auto px = [&](double x) { return fmt(margin + x * scale); };
  auto py = [&](double y) { return fmt(margin + (input.arena_size - y) * scale); };
  auto radius_of = [&](std::size_t agent) { return agent < input.radii.size() ? input.radii[agent] : 0.5; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\"" << fmt(height)
    << "\" viewBox=\"0 0 " << fmt(width) << ' ' << fmt(height) << "\">\n";
  o << "<rect x=\"" << fmt(margin) << "\" y=\"" << fmt(margin) << "\" width=\"" << fmt(side) << "\" height=\""
    << fmt(side) << "\" fill=\"white\" stroke=\"black\"/>\n";
  if (!spec.title.empty()) o << "<title>" << spec.title << "</title>\n";

  if (spec.goal_markers) {
    for (std::size_t g = 0; g < input.goals.size(); ++g) {
      const double h = 0.3;
      o << "<rect class=\"goal\" x=\"" << px(input.goals[g].x() - h / 2) << "\" y=\"" << py(input.goals[g].y() + h / 2)
        << "\" width=\"" << fmt(h * scale) << "\" height=\"" << fmt(h * scale) << "\" fill=\"black\"/>\n";
    }
  }

  for (const auto& s : series) {
    const auto& traj = s.trace->observed;
    const std::size_t agents = static_cast<std::size_t>(traj.front().size() / 2);
    for (std::size_t a = 0; a < agents; ++a) {
      bool stationary = true;
      for (const auto& v : traj)
        if (v.segment<2>(2 * a) != traj.front().segment<2>(2 * a)) stationary = false;
      const Vec2 p0 = traj.front().segment<2>(2 * a);
      if (stationary) {
        o << "<circle class=\"point\" cx=\"" << px(p0.x()) << "\" cy=\"" << py(p0.y()) << "\" r=\"4.000\" fill=\""
          << s.color << "\"/>\n";
      } else {
        o << "<polyline class=\"path\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2.000\"";
        if (!s.dash.empty()) o << " stroke-dasharray=\"" << s.dash << "\"";
        o << " points=\"";
        for (std::size_t t = 0; t < traj.size(); ++t) {
          if (t) o << ' ';
          o << px(traj[t][2 * a]) << ',' << py(traj[t][2 * a + 1]);
        }
        o << "\"/>\n";
      }
      o << "<text x=\"" << px(p0.x() + 0.15) << "\" y=\"" << py(p0.y() - 0.35) << "\" font-size=\"12\" fill=\""
        << s.color << "\">(" << (a + 1) << ")</text>\n";
    }
    if (spec.collision_markers) {
      for (std::size_t t = 0; t < s.trace->collisions.size(); ++t) {
        for (const auto& [i, j] : s.trace->collisions[t]) {
          const Vec2 pi = traj[t].segment<2>(2 * i), pj = traj[t].segment<2>(2 * j);
          const Vec2 mid = 0.5 * (pi + pj);
          const double r = std::max(radius_of(i), radius_of(j));
          o << "<circle class=\"collision\" cx=\"" << px(mid.x()) << "\" cy=\"" << py(mid.y()) << "\" r=\""
            << fmt(r * scale) << "\" fill=\"none\" stroke=\"" << s.color
            << "\" stroke-dasharray=\"2,2\" stroke-width=\"1.000\"/>\n";
        }
      }
    }
  }

  double ly = side + 2 * margin + 5.0;
  for (const auto& s : series) {
    o << "<line x1=\"" << fmt(margin) << "\" y1=\"" << fmt(ly + 7) << "\" x2=\"" << fmt(margin + 30) << "\" y2=\""
      << fmt(ly + 7) << "\" stroke=\"" << s.color << "\" stroke-width=\"2.000\"";
    if (!s.dash.empty()) o << " stroke-dasharray=\"" << s.dash << "\"";
    o << "/>\n";
    o << "<text x=\"" << fmt(margin + 36) << "\" y=\"" << fmt(ly + 11) << "\" font-size=\"12\">" << s.label
      << "</text>\n";
    ly += 20.0;
  }
  o << "</svg>\n";
  return o.str();
}

void emit_plot(const PlotInput& input, const PlotSpec& spec, const std::filesystem::path& path) {
  write_text_file(path, render_svg(input, spec));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace swarmfault

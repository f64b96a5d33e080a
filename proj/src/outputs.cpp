#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "unp/experiment.hpp"

namespace unp {

namespace {

constexpr int kDigits = std::numeric_limits<double>::max_digits10;

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << std::setprecision(kDigits);
  return f;
}

void finish(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

std::vector<std::vector<std::string>> read_rows(const std::string& path, const std::string& header) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != header)
    throw std::runtime_error(path + ": expected header '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  const std::size_t width = split_csv(header).size();
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != width) throw std::runtime_error(path + ": malformed row '" + line + "'");
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

void write_runs_csv(const std::string& path, std::span<const RunResult> runs) {
  auto f = open_out(path);
  f << "seed,episode,reward,unsafe_actions,interventions\n";
  for (const auto& r : runs)
    for (std::size_t e = 0; e < r.episodes(); ++e)
      f << r.seed << ',' << e + 1 << ',' << r.episode_rewards[e] << ',' << r.unsafe_action_counts[e]
        << ',' << r.intervention_counts[e] << '\n';
  finish(f, path);
}

std::vector<RunResult> read_runs_csv(const std::string& path) {
  std::vector<RunResult> runs;
  for (const auto& cells : read_rows(path, "seed,episode,reward,unsafe_actions,interventions")) {
    const std::uint64_t seed = std::stoull(cells[0]);
    if (runs.empty() || runs.back().seed != seed) {
      runs.emplace_back();
      runs.back().seed = seed;
    }
    RunResult& r = runs.back();
    if (std::stoul(cells[1]) != r.episodes() + 1)
      throw std::runtime_error(path + ": episodes out of order for seed " + cells[0]);
    r.episode_rewards.push_back(std::stod(cells[2]));
    r.unsafe_action_counts.push_back(std::stol(cells[3]));
    r.intervention_counts.push_back(std::stol(cells[4]));
  }
  return runs;
}

void write_curve_csv(const std::string& path, const AggregateCurve& curve) {
  auto f = open_out(path);
  f << "episode,mean,std\n";
  for (std::size_t e = 0; e < curve.size(); ++e)
    f << e + 1 << ',' << curve.mean[e] << ',' << curve.std[e] << '\n';
  finish(f, path);
}

AggregateCurve read_curve_csv(const std::string& path) {
  AggregateCurve c;
  for (const auto& cells : read_rows(path, "episode,mean,std")) {
    c.mean.push_back(std::stod(cells[1]));
    c.std.push_back(std::stod(cells[2]));
  }
  return c;
}

void write_trace_csv(const std::string& path, const EpisodeTrace& trace) {
  auto f = open_out(path);
  f << "step";
  if (!trace.rows.empty())
    for (const auto& name : trace.rows.front().state.names()) f << ',' << name;
  f << ",action,unsafe,intervened\n";
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    const TraceRow& r = trace.rows[i];
    f << i;
    for (double v : r.state.values()) f << ',' << v;
    f << ',' << r.action.as_real() << ',' << (r.unsafe ? "true" : "false") << ','
      << (r.intervened ? "true" : "false") << '\n';
  }
  finish(f, path);
}

void write_curve_svg(const std::string& path, const AggregateCurve& curve, double threshold,
                     const std::string& title) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 40;
  double lo = threshold, hi = threshold;
  for (std::size_t e = 0; e < curve.size(); ++e) {
    lo = std::min(lo, curve.mean[e] - curve.std[e]);
    hi = std::max(hi, curve.mean[e] + curve.std[e]);
  }
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const double n = std::max<double>(1.0, static_cast<double>(curve.size()) - 1.0);
  auto px = [&](std::size_t e) { return L + (W - L - R) * static_cast<double>(e) / n; };
  auto py = [&](double v) { return T + (H - T - B) * (hi - v) / (hi - lo); };

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << std::fixed << std::setprecision(2);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << L << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title
    << "</text>\n";
  f << "<polygon fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
  for (std::size_t e = 0; e < curve.size(); ++e) f << px(e) << ',' << py(curve.mean[e] + curve.std[e]) << ' ';
  for (std::size_t e = curve.size(); e-- > 0;) f << px(e) << ',' << py(curve.mean[e] - curve.std[e]) << ' ';
  f << "\"/>\n";
  f << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t e = 0; e < curve.size(); ++e) f << px(e) << ',' << py(curve.mean[e]) << ' ';
  f << "\"/>\n";
  f << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"4 3\" points=\"" << L << ','
    << py(threshold) << ' ' << W - R << ',' << py(threshold) << "\"/>\n";
  f << "<text x=\"" << L << "\" y=\"" << H - 12 << "\" font-family=\"sans-serif\" font-size=\"11\">episodes: "
    << curve.size() << "   reward range [" << lo << ", " << hi << "]</text>\n";
  f << "</svg>\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

void emit_outputs(const ExperimentOutcome& outcome, const std::string& output_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + output_dir + ": " + ec.message());
  const fs::path dir(output_dir);
  write_runs_csv((dir / "runs.csv").string(), outcome.runs);
  write_curve_csv((dir / "curve.csv").string(), outcome.curve);
  if (!outcome.traces.empty()) {
    const EpisodeTrace& t = outcome.traces[outcome.best_run()];
    write_trace_csv((dir / ("trace_" + std::to_string(t.seed) + ".csv")).string(), t);
  }
  const auto& cfg = outcome.config;
  write_curve_svg((dir / "curve.svg").string(), outcome.curve, convergence_threshold(cfg.env),
                  to_string(cfg.env) + " / shield " + to_string(cfg.shield));
  for (std::size_t i = 0; i < outcome.policies.size(); ++i)
    save_mlp_file((dir / ("policy_" + std::to_string(outcome.runs[i].seed) + ".mlp")).string(),
                  outcome.policies[i]);
}

}  // namespace unp

#pragma once

// Training loop: episode collection, real + hindsight storage, optimization
// cycles, noise-free evaluation, multi-seed aggregation and artifact output.

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "archer/agent.hpp"
#include "archer/envs.hpp"
#include "archer/errors.hpp"
#include "archer/numcore.hpp"
#include "archer/replay.hpp"
#include "archer/rewards.hpp"
#include "archer/rng.hpp"

namespace archer {

// `none` stores real transitions only (plain DDPG baseline).
enum class GoalStrategy { final, future, none };

inline std::string_view to_string(GoalStrategy s) {
  switch (s) {
    case GoalStrategy::final:
      return "final";
    case GoalStrategy::future:
      return "future";
    case GoalStrategy::none:
      return "none";
  }
  return "?";
}

inline GoalStrategy parse_strategy(std::string_view s) {
  if (s == "final") return GoalStrategy::final;
  if (s == "future") return GoalStrategy::future;
  if (s == "none") return GoalStrategy::none;
  throw ConfigError("unknown strategy '" + std::string(s) + "' (expected final|future|none)");
}

inline constexpr double kSuccessThreshold = 0.8;
inline constexpr std::size_t kSmoothingWindow = 50;

struct ExperimentConfig {
  EnvKind env = EnvKind::reacher;
  RewardKind reward = RewardKind::binary_negative;
  TradeOff tradeoff{};
  GoalStrategy strategy = GoalStrategy::final;
  std::size_t k = 4;
  std::size_t cycles = 300;
  std::size_t episodes_per_cycle = 16;
  std::size_t opt_steps_per_cycle = 40;
  std::size_t batch_size = 128;
  std::size_t buffer_capacity = ReplayBuffer::kDefaultCapacity;
  double gamma = 0.98;
  double tau = 0.001;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double epsilon = 0.1;
  double epsilon_decay = 0.99;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double tolerance = kSparseTolerance;
  std::size_t episode_length = 50;
  double link1 = 0.5;
  double link2 = 0.5;
  double max_displacement = 0.1;
  double workspace_half_extent = 1.0;
  std::vector<std::size_t> hidden_layers{400, 300};
  std::size_t eval_episodes = 20;
  std::string output_dir = "runs/default";

  EnvSpec env_spec() const {
    EnvSpec s = env == EnvKind::reacher ? reacher_spec() : pointgoal_spec();
    s.link1 = link1;
    s.link2 = link2;
    s.max_displacement = max_displacement;
    s.workspace_half_extent = workspace_half_extent;
    s.success_tolerance = tolerance;
    s.episode_length = episode_length;
    return s;
  }

  AgentHyperparams agent_hyperparams() const { return {gamma, tau, actor_lr, critic_lr}; }

  /// Throws ConfigError on the first violated constraint.
  TradeOffClass validate() const {
    const auto count = [](std::size_t v, const char* name) {
      if (v == 0) throw ConfigError(std::string(name) + " must be >= 1");
    };
    count(k, "k");
    count(cycles, "cycles");
    count(episodes_per_cycle, "episodes_per_cycle");
    count(opt_steps_per_cycle, "opt_steps_per_cycle");
    count(batch_size, "batch_size");
    count(buffer_capacity, "buffer_capacity");
    count(eval_episodes, "eval_episodes");
    if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
      throw ConfigError("seeds must be distinct");
    }
    for (std::size_t w : hidden_layers) count(w, "hidden layer width");
    if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
    if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) throw ConfigError("epsilon_decay must lie in (0, 1]");
    agent_hyperparams().validate();
    env_spec().validate();
    return validate_tradeoff(reward, tradeoff);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["env"] = std::string(to_string(env));
    j["reward"] = std::string(to_string(reward));
    j["lambda_r"] = tradeoff.lambda_r;
    j["lambda_h"] = tradeoff.lambda_h;
    j["strategy"] = std::string(to_string(strategy));
    j["k"] = k;
    j["cycles"] = cycles;
    j["episodes_per_cycle"] = episodes_per_cycle;
    j["opt_steps_per_cycle"] = opt_steps_per_cycle;
    j["batch_size"] = batch_size;
    j["buffer_capacity"] = buffer_capacity;
    j["gamma"] = gamma;
    j["tau"] = tau;
    j["actor_lr"] = actor_lr;
    j["critic_lr"] = critic_lr;
    j["epsilon"] = epsilon;
    j["epsilon_decay"] = epsilon_decay;
    j["seeds"] = seeds;
    j["tolerance"] = tolerance;
    j["episode_length"] = episode_length;
    j["link1"] = link1;
    j["link2"] = link2;
    j["max_displacement"] = max_displacement;
    j["workspace_half_extent"] = workspace_half_extent;
    j["hidden_layers"] = hidden_layers;
    j["eval_episodes"] = eval_episodes;
    j["output_dir"] = output_dir;
    return j;
  }

  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c;
    const nlohmann::json known = c.to_json();
    for (const auto& [key, _] : j.items()) {
      if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    try {
      if (j.contains("env")) c.env = parse_env_kind(j.at("env").get<std::string>());
      if (j.contains("reward")) c.reward = parse_reward_kind(j.at("reward").get<std::string>());
      if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
      auto read = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
      };
      read("lambda_r", c.tradeoff.lambda_r);
      read("lambda_h", c.tradeoff.lambda_h);
      read("k", c.k);
      read("cycles", c.cycles);
      read("episodes_per_cycle", c.episodes_per_cycle);
      read("opt_steps_per_cycle", c.opt_steps_per_cycle);
      read("batch_size", c.batch_size);
      read("buffer_capacity", c.buffer_capacity);
      read("gamma", c.gamma);
      read("tau", c.tau);
      read("actor_lr", c.actor_lr);
      read("critic_lr", c.critic_lr);
      read("epsilon", c.epsilon);
      read("epsilon_decay", c.epsilon_decay);
      read("seeds", c.seeds);
      read("tolerance", c.tolerance);
      read("episode_length", c.episode_length);
      read("link1", c.link1);
      read("link2", c.link2);
      read("max_displacement", c.max_displacement);
      read("workspace_half_extent", c.workspace_half_extent);
      read("hidden_layers", c.hidden_layers);
      read("eval_episodes", c.eval_episodes);
      read("output_dir", c.output_dir);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config field has the wrong type: ") + e.what());
    }
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + path + ": " + e.what());
    }
    return from_json(j);
  }
};

/// SHA-256 over the canonical JSON of the config, excluding output_dir.
inline std::string config_digest(const ExperimentConfig& c) {
  nlohmann::json j = c.to_json();
  j.erase("output_dir");
  const std::string text = j.dump();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

/// Harness switches that are not part of the experiment config.
struct RunOptions {
  // When false, stored rewards are the raw task rewards and the trade-off
  // multipliers are never applied.
  bool apply_weighting = true;
  // Write a final checkpoint per seed into the output directory.
  bool write_checkpoints = true;
  // Called after every cycle with (seed, cycle, success_rate).
  std::function<void(std::uint64_t, std::size_t, double)> progress;
};

/// Reward rule shared by real storage and hindsight relabeling.
struct RewardRule {
  RewardKind kind = RewardKind::binary_negative;
  TradeOff tradeoff{};
  double tolerance = kSparseTolerance;
  bool apply_weighting = true;
};

/// Collects one episode of T steps. Real rewards are weighted by lambda_r at
/// this point; `noise` may be null for greedy rollouts.
inline Episode run_episode(const EnvSpec& spec, const DdpgAgent& agent, OuNoise* noise, const RewardRule& rule,
                           Rng& env_rng, Rng& noise_rng) {
  if (agent.obs_dim() != spec.state_dim + spec.goal_dim || agent.action_dim() != spec.action_dim) {
    throw ShapeError("agent dimensions do not match the environment");
  }
  if (noise != nullptr) noise->reset();
  GoalEnvState s = reset(spec, env_rng);
  Episode ep;
  ep.transitions.reserve(spec.episode_length);
  ep.achieved_goals.reserve(spec.episode_length);
  for (std::size_t t = 0; t < spec.episode_length; ++t) {
    Vector a = select_action(agent, s.physical, s.goal, noise, noise_rng);
    GoalEnvState next = step(spec, s, a);
    Vector achieved = achieved_goal(spec, next);
    const double base = base_reward(rule.kind, achieved, s.goal, rule.tolerance);
    Transition tr;
    tr.state = s.physical;
    tr.goal = s.goal;
    tr.action = std::move(a);
    tr.reward = rule.apply_weighting ? weighted_reward(rule.tradeoff, false, base) : base;
    tr.next_state = next.physical;
    tr.is_hindsight = false;
    tr.success = goal_distance(achieved, s.goal) <= rule.tolerance;
    ep.transitions.push_back(std::move(tr));
    ep.achieved_goals.push_back(std::move(achieved));
    s = std::move(next);
  }
  return ep;
}

struct StoreCounts {
  std::size_t real = 0;
  std::size_t hindsight = 0;
};

/// Pushes each real transition followed by its hindsight copies.
inline StoreCounts store_with_hindsight(ReplayBuffer& buffer, const Episode& ep, GoalStrategy strategy,
                                        std::size_t k, const RewardRule& rule, Rng& rng) {
  const std::size_t T = ep.length();
  std::vector<Transition> hindsight;
  std::size_t per_step = 0;
  if (strategy == GoalStrategy::final) {
    hindsight = relabel_final(ep, rule.kind, rule.tradeoff, rule.tolerance);
    per_step = 1;
  } else if (strategy == GoalStrategy::future) {
    if (k == 0) throw ConfigError("future strategy needs k >= 1");
    hindsight = relabel_future(ep, k, rule.kind, rule.tradeoff, rule.tolerance, rng);
    per_step = k;
  }
  if (!rule.apply_weighting) {
    for (std::size_t i = 0; i < hindsight.size(); ++i) {
      hindsight[i].reward = base_reward(rule.kind, ep.achieved_goals[i / per_step], hindsight[i].goal, rule.tolerance);
    }
  }
  StoreCounts counts;
  for (std::size_t t = 0; t < T; ++t) {
    buffer.push(ep.transitions[t]);
    ++counts.real;
    for (std::size_t i = 0; i < per_step; ++i) {
      buffer.push(std::move(hindsight[t * per_step + i]));
      ++counts.hindsight;
    }
  }
  return counts;
}

/// Sum of unweighted task rewards along the episode's real goal.
inline double episode_return(const Episode& ep, RewardKind kind, double tolerance) {
  double total = 0.0;
  for (std::size_t t = 0; t < ep.length(); ++t) {
    total += base_reward(kind, ep.achieved_goals[t], ep.transitions[t].goal, tolerance);
  }
  return total;
}

/// Everything one seed's training run owns.
struct RunState {
  EnvSpec env;
  DdpgAgent agent;
  ReplayBuffer buffer;
  OuNoise noise;
  RunStreams streams;
  std::size_t cycles_done = 0;
};

inline RunState make_run_state(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  RunStreams streams(seed);
  const EnvSpec spec = config.env_spec();
  DdpgAgent agent = DdpgAgent::create(spec.state_dim + spec.goal_dim, spec.action_dim, config.hidden_layers,
                                      config.agent_hyperparams(), streams.init);
  return RunState{spec, std::move(agent), ReplayBuffer(config.buffer_capacity),
                  OuNoise(spec.action_dim, config.epsilon, config.epsilon_decay), std::move(streams)};
}

struct CycleStats {
  double mean_critic_loss = 0.0;
  double mean_actor_loss = 0.0;
  double mean_return = 0.0;
  double epsilon = 0.0;  // after this cycle's decay
  std::size_t real_stored = 0;
  std::size_t hindsight_stored = 0;
  std::size_t train_steps = 0;
};

/// Collect episodes_per_cycle episodes, then opt_steps_per_cycle minibatch
/// updates each followed by a soft target update, then decay epsilon.
inline CycleStats run_cycle(const ExperimentConfig& config, RunState& run, const RunOptions& options = {}) {
  const RewardRule rule{config.reward, config.tradeoff, config.tolerance, options.apply_weighting};
  CycleStats stats;
  double returns = 0.0;
  for (std::size_t e = 0; e < config.episodes_per_cycle; ++e) {
    const Episode ep = run_episode(run.env, run.agent, &run.noise, rule, run.streams.env, run.streams.noise);
    returns += episode_return(ep, config.reward, config.tolerance);
    const StoreCounts c = store_with_hindsight(run.buffer, ep, config.strategy, config.k, rule, run.streams.relabel);
    stats.real_stored += c.real;
    stats.hindsight_stored += c.hindsight;
  }
  stats.mean_return = returns / static_cast<double>(config.episodes_per_cycle);

  double critic_loss = 0.0, actor_loss = 0.0;
  for (std::size_t i = 0; i < config.opt_steps_per_cycle; ++i) {
    const auto batch = run.buffer.sample_minibatch(config.batch_size, run.streams.buffer);
    TrainStats ts;
    try {
      ts = train_step(run.agent, batch);
    } catch (const NumericError& e) {
      throw NumericError("cycle " + std::to_string(run.cycles_done + 1) + ", step " + std::to_string(i + 1) + ": " +
                         e.what());
    }
    soft_update(run.agent);
    critic_loss += ts.critic_loss;
    actor_loss += ts.actor_loss;
    ++stats.train_steps;
  }
  stats.mean_critic_loss = critic_loss / static_cast<double>(config.opt_steps_per_cycle);
  stats.mean_actor_loss = actor_loss / static_cast<double>(config.opt_steps_per_cycle);
  run.noise.decay();
  stats.epsilon = run.noise.epsilon;
  ++run.cycles_done;
  return stats;
}

using Policy = std::function<Vector(const GoalEnvState&)>;

/// Fraction of greedy episodes whose final state satisfies the goal.
inline double evaluate(const EnvSpec& spec, const Policy& policy, std::size_t n_episodes, Rng& rng) {
  if (n_episodes == 0) throw ConfigError("evaluation needs at least one episode");
  std::size_t successes = 0;
  for (std::size_t e = 0; e < n_episodes; ++e) {
    GoalEnvState s = reset(spec, rng);
    for (std::size_t t = 0; t < spec.episode_length; ++t) s = step(spec, s, policy(s));
    if (is_success(spec, s, s.goal)) ++successes;
  }
  return static_cast<double>(successes) / static_cast<double>(n_episodes);
}

inline double evaluate(const EnvSpec& spec, const DdpgAgent& agent, std::size_t n_episodes, Rng& rng) {
  Rng unused(0);
  return evaluate(
      spec, [&](const GoalEnvState& s) { return select_action(agent, s.physical, s.goal, nullptr, unused); },
      n_episodes, rng);
}

/// Trailing moving average over the last `window` entries (fewer at the start).
inline std::vector<double> smooth(std::span<const double> series, std::size_t window = kSmoothingWindow) {
  if (window == 0) throw ConfigError("smoothing window must be >= 1");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    // Offsets from the first element keep constant stretches exact.
    double s = 0.0;
    for (std::size_t j = lo; j <= i; ++j) s += series[j] - series[lo];
    out[i] = series[lo] + s / static_cast<double>(i - lo + 1);
  }
  return out;
}

/// 1-based index of the first entry >= threshold.
inline std::optional<std::size_t> cycles_to_threshold(std::span<const double> smoothed,
                                                      double threshold = kSuccessThreshold) {
  for (std::size_t i = 0; i < smoothed.size(); ++i)
    if (smoothed[i] >= threshold) return i + 1;
  return std::nullopt;
}

/// Median with "never" ordered after every finite value; for an even count
/// the mean of the two middle values, "never" if either is.
inline std::optional<double> median_cycles(std::vector<std::optional<std::size_t>> values) {
  if (values.empty()) return std::nullopt;
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> v;
  for (const auto& x : values) v.push_back(x ? static_cast<double>(*x) : inf);
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double m = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  if (std::isinf(m)) return std::nullopt;
  return m;
}

struct CycleRow {
  std::size_t cycle = 0;
  double success_rate = 0.0;
  double critic_loss = 0.0;
  double mean_return = 0.0;
  double epsilon = 0.0;

  friend bool operator==(const CycleRow&, const CycleRow&) = default;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<CycleRow> rows;
  std::optional<std::string> error;

  std::vector<double> success_series() const {
    std::vector<double> s;
    for (const auto& r : rows) s.push_back(r.success_rate);
    return s;
  }

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline constexpr std::string_view kRunCsvHeader = "cycle,success_rate,critic_loss,mean_return,epsilon";

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

inline std::string run_csv(const RunRecord& r) {
  std::string out(kRunCsvHeader);
  out += '\n';
  for (const auto& row : r.rows) {
    out += std::to_string(row.cycle) + ',' + detail::fmt_double(row.success_rate) + ',' +
           detail::fmt_double(row.critic_loss) + ',' + detail::fmt_double(row.mean_return) + ',' +
           detail::fmt_double(row.epsilon) + '\n';
  }
  return out;
}

/// Trains one seed for config.cycles cycles, evaluating after every cycle.
/// If `final_state` is given it receives the trained run state.
inline RunRecord run_seed(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options = {},
                          std::optional<RunState>* final_state = nullptr) {
  RunState run = make_run_state(config, seed);
  RunRecord record;
  record.seed = seed;
  for (std::size_t c = 1; c <= config.cycles; ++c) {
    const CycleStats stats = run_cycle(config, run, options);
    const double success = evaluate(run.env, run.agent, config.eval_episodes, run.streams.eval);
    record.rows.push_back({c, success, stats.mean_critic_loss, stats.mean_return, stats.epsilon});
    if (options.progress) options.progress(seed, c, success);
  }
  if (final_state != nullptr) *final_state = std::move(run);
  return record;
}

/// Success rate averaged across seeds per cycle (failed seeds excluded).
inline std::vector<double> seed_average(std::span<const RunRecord> records) {
  std::vector<double> avg;
  std::size_t used = 0;
  for (const auto& r : records) {
    if (r.error) continue;
    if (avg.size() < r.rows.size()) avg.resize(r.rows.size(), 0.0);
    for (std::size_t i = 0; i < r.rows.size(); ++i) avg[i] += r.rows[i].success_rate;
    ++used;
  }
  for (double& v : avg) v /= static_cast<double>(std::max<std::size_t>(used, 1));
  return avg;
}

struct ExperimentResult {
  std::vector<RunRecord> records;
  nlohmann::json summary;

  bool all_failed() const {
    return std::all_of(records.begin(), records.end(), [](const RunRecord& r) { return r.error.has_value(); });
  }
};

inline nlohmann::json make_summary(const ExperimentConfig& config, std::span<const RunRecord> records) {
  nlohmann::json per_seed = nlohmann::json::object();
  std::vector<std::optional<std::size_t>> cycles;
  for (const auto& r : records) {
    if (r.error) {
      per_seed[std::to_string(r.seed)] = "error";
      continue;
    }
    const auto series = r.success_series();
    const auto hit = cycles_to_threshold(smooth(series), kSuccessThreshold);
    cycles.push_back(hit);
    per_seed[std::to_string(r.seed)] = hit ? nlohmann::json(*hit) : nlohmann::json("never");
  }
  const auto median = median_cycles(cycles);
  nlohmann::json s;
  s["median_cycles_to_threshold"] = median ? nlohmann::json(*median) : nlohmann::json("never");
  s["per_seed_cycles"] = per_seed;
  s["threshold"] = kSuccessThreshold;
  s["config_digest"] = config_digest(config);
  return s;
}

struct Series {
  std::string label;
  std::vector<double> values;
};

/// Line chart of one or more series over cycle index, y fixed to [0, 1].
inline std::string render_svg(std::span<const Series> series, std::string_view title) {
  constexpr double W = 720, H = 420, L = 60, R = 160, T = 40, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  std::size_t n = 1;
  for (const auto& s : series) n = std::max(n, s.values.size());
  const auto x_of = [&](std::size_t i) { return L + (n > 1 ? pw * static_cast<double>(i) / (n - 1) : 0.0); };
  const auto y_of = [&](double v) { return T + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };
  static constexpr const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  std::ostringstream os;
  char buf[128];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << L << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
  for (int g = 0; g <= 4; ++g) {
    const double v = g / 4.0;
    std::snprintf(buf, sizeof buf, "%.2f", v);
    os << "<line x1=\"" << L << "\" x2=\"" << L + pw << "\" y1=\"" << y_of(v) << "\" y2=\"" << y_of(v)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << L - 8 << "\" y=\"" << y_of(v) + 4
       << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  os << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12
     << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">cycle (1.." << n << ")</text>\n";
  os << "<text x=\"16\" y=\"" << T + ph / 2 << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
     << T + ph / 2 << ")\" text-anchor=\"middle\">success rate</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = palette[k % std::size(palette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[k].values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x_of(i), y_of(series[k].values[i]));
      os << buf;
    }
    os << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(k);
    os << "<line x1=\"" << L + pw + 12 << "\" x2=\"" << L + pw + 32 << "\" y1=\"" << ly << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << L + pw + 38 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
       << series[k].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << text;
}

}  // namespace detail

/// Reads a CSV with a header row into named numeric columns.
inline std::vector<Series> read_csv_columns(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw FormatError(path + " is empty");
  std::vector<Series> cols;
  {
    std::stringstream ss(line);
    std::string name;
    while (std::getline(ss, name, ',')) cols.push_back({name, {}});
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= cols.size()) throw FormatError(path + ":" + std::to_string(lineno) + ": too many fields");
      try {
        cols[c].values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
      ++c;
    }
    if (c != cols.size()) throw FormatError(path + ":" + std::to_string(lineno) + ": too few fields");
  }
  return cols;
}

/// Plots every column whose name mentions "success".
inline void plot_csv(const std::string& in, const std::string& out) {
  std::vector<Series> picked;
  for (auto& s : read_csv_columns(in))
    if (s.label.find("success") != std::string::npos) picked.push_back(std::move(s));
  if (picked.empty()) throw FormatError(in + " has no success-rate column");
  detail::write_text(out, render_svg(picked, std::filesystem::path(in).filename().string()));
}

/// One run per seed, then per-seed CSVs, a seed-averaged smoothed CSV, an SVG
/// chart and summary.json in config.output_dir (skipped when it is empty).
inline ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {}) {
  config.validate();
  const bool write = !config.output_dir.empty();
  const std::filesystem::path dir(config.output_dir);
  if (write) std::filesystem::create_directories(dir);

  ExperimentResult result;
  for (std::uint64_t seed : config.seeds) {
    RunRecord rec;
    try {
      std::optional<RunState> state;
      rec = run_seed(config, seed, options, &state);
      if (write && options.write_checkpoints) {
        nlohmann::json meta;
        meta["epsilon"] = state->noise.epsilon;
        meta["seed"] = seed;
        meta["cycles"] = state->cycles_done;
        meta["config"] = config.to_json();
        meta["config"].erase("output_dir");
        save_checkpoint((dir / ("seed_" + std::to_string(seed) + ".ckpt")).string(), state->agent, meta);
      }
    } catch (const Error& e) {
      rec.seed = seed;
      rec.rows.clear();
      rec.error = e.what();
    }
    if (write) {
      if (rec.error) {
        detail::write_text(dir / ("seed_" + std::to_string(seed) + ".error.txt"), *rec.error + "\n");
      } else {
        detail::write_text(dir / ("seed_" + std::to_string(seed) + ".csv"), run_csv(rec));
      }
    }
    result.records.push_back(std::move(rec));
  }

  result.summary = make_summary(config, result.records);
  if (write) {
    const auto avg = seed_average(result.records);
    const auto sm = smooth(avg);
    std::string csv = "cycle,success_rate,smoothed_success_rate\n";
    for (std::size_t i = 0; i < avg.size(); ++i) {
      csv += std::to_string(i + 1) + ',' + detail::fmt_double(avg[i]) + ',' + detail::fmt_double(sm[i]) + '\n';
    }
    detail::write_text(dir / "averaged.csv", csv);
    const std::vector<Series> lines{{"mean", avg}, {"smoothed", sm}};
    const std::string title = std::string(to_string(config.env)) + " / " + std::string(to_string(config.reward)) +
                              " / " + std::string(to_string(config.strategy)) + " / lambda_r=" +
                              detail::fmt_double(config.tradeoff.lambda_r) +
                              " lambda_h=" + detail::fmt_double(config.tradeoff.lambda_h);
    detail::write_text(dir / "success.svg", render_svg(lines, title));
    detail::write_text(dir / "summary.json", result.summary.dump(2) + "\n");
  }
  return result;
}

}  // namespace archer

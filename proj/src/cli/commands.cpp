#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <json.hpp>

#include "instasim/cli.hpp"
#include "instasim/encoder/agent_centric.hpp"
#include "instasim/eval.hpp"
#include "instasim/gradcheck_suite.hpp"
#include "instasim/nn/checkpoint.hpp"
#include "instasim/scenario_io.hpp"

namespace instasim::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string numbered(const std::string& prefix, int index, const std::string& suffix) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return prefix + buf + suffix;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<scene::Scenario> training_set(const RunConfig& c, std::uint64_t seed) {
  if (!c.scenarios.empty()) return load_scenario_set(c.scenarios);
  return generate_scenarios(c.tmpl, c.n_agents, c.n_scenarios, seed);
}

// Held-out scenarios never overlap the training seeds.
std::vector<scene::Scenario> validation_set(const RunConfig& c, std::uint64_t seed) {
  return generate_scenarios(c.tmpl, c.n_agents, c.n_validation, seed + 0x9E3779B97F4A7C15ULL);
}

struct RunSummary {
  fs::path best_checkpoint;
  rl::Candidate best;
};

RunSummary train_once(RunConfig config, const fs::path& resume, std::span<const scene::Scenario> scenarios,
                      std::span<const scene::Scenario* const> validation, std::ostream& log) {
  config.train.out_dir = config.out_dir;
  fs::create_directories(config.out_dir);
  write_text(config.out_dir / "config.txt", format_run_config(config));
  rl::Trainer trainer(config.train, scenarios);
  if (!resume.empty()) {
    trainer.resume(resume);
    log << "resumed at epoch " << trainer.epoch() << "\n";
  }
  while (trainer.epoch() < config.train.epochs) {
    const rl::EpochLog e = trainer.run_epoch();
    log << "epoch " << e.epoch << " disc_loss " << e.disc_loss << " disc_acc " << e.disc_acc << " offset " << e.offset
        << " offtrack " << e.offtrack_rate << " collision " << e.collision_rate << "\n";
  }
  std::vector<fs::path> checkpoints = trainer.checkpoints();
  const fs::path final_path = config.out_dir / (nn::checkpoint_stem(trainer.epoch()) + ".bin");
  if (checkpoints.empty() || checkpoints.back() != final_path) checkpoints.push_back(trainer.save_checkpoint());

  std::vector<rl::Candidate> scored;
  const std::size_t best = rl::model_selection(checkpoints, config.train.model, validation, &scored);
  json sel{{"best_checkpoint", checkpoints[best].filename().string()}, {"candidates", json::array()}};
  for (std::size_t k = 0; k < scored.size(); ++k) {
    sel["candidates"].push_back({{"checkpoint", checkpoints[k].filename().string()},
                                 {"epoch", scored[k].epoch},
                                 {"metrics", scored[k].metrics.to_json()}});
  }
  write_text(config.out_dir / "selection.json", sel.dump(2) + "\n");
  log << "selected " << checkpoints[best].filename().string() << " score "
      << eval::selection_score(scored[best].metrics) << "\n";
  return {checkpoints[best], scored[best]};
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, double>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) flatten(*it, name, out);
    else if (it->is_number()) out.emplace_back(name, it->get<double>());
  }
}

}  // namespace

std::uint64_t scenario_seed(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::vector<scene::Scenario> generate_scenarios(synthetic::Template tmpl, int n_agents, int count,
                                                std::uint64_t seed) {
  std::vector<scene::Scenario> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    out.push_back(synthetic::generate_synthetic_scenario(tmpl, n_agents, scenario_seed(seed, k)));
  }
  return out;
}

std::vector<scene::Scenario> load_scenario_set(const fs::path& path) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    if (fs::exists(path / "manifest.json")) return load_scenario_set(path / "manifest.json");
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    const json j = read_json(path);
    if (j.is_object() && j.contains("files")) {
      for (const auto& f : j.at("files")) files.push_back(path.parent_path() / f.get<std::string>());
    } else {
      files.push_back(path);
    }
  }
  if (files.empty()) throw std::runtime_error("no scenarios found at " + path.string());
  std::vector<scene::Scenario> out;
  for (const fs::path& f : files) out.push_back(scene::load_scenario(f));
  return out;
}

std::vector<const scene::Scenario*> pointers(const std::vector<scene::Scenario>& scenarios) {
  std::vector<const scene::Scenario*> out;
  for (const auto& s : scenarios) out.push_back(&s);
  return out;
}

rl::ModelConfig model_config_for_checkpoint(const fs::path& checkpoint, double radius) {
  fs::path manifest = checkpoint;
  manifest.replace_extension(".json");
  if (!fs::exists(checkpoint) || !fs::exists(manifest)) {
    throw std::runtime_error("checkpoint not found: " + checkpoint.string());
  }
  const json extra = read_json(manifest).value("extra", json::object());
  rl::ModelConfig config;
  config.encoder = encoder::EncoderConfig::small(radius);
  config.encoder.hidden = extra.value("hidden", config.encoder.hidden);
  config.encoder.layers = extra.value("layers", config.encoder.layers);
  return config;
}

int cmd_gen(const GenOptions& options, std::ostream& log) {
  synthetic::Template tmpl;
  try {
    tmpl = synthetic::template_from_string(options.tmpl);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (options.n_agents < 1 || options.count < 1) throw ConfigError("gen: agents and count must be >= 1");
  if (options.out_dir.empty()) throw ConfigError("gen: output directory required");
  fs::create_directories(options.out_dir);
  json manifest{{"template", options.tmpl},
                {"n_agents", options.n_agents},
                {"count", options.count},
                {"seed", options.seed},
                {"files", json::array()}};
  for (int k = 0; k < options.count; ++k) {
    const std::string name = numbered("scenario_", k, ".json");
    const scene::Scenario s = synthetic::generate_synthetic_scenario(tmpl, options.n_agents, scenario_seed(options.seed, k));
    scene::save_scenario(s, options.out_dir / name);
    manifest["files"].push_back(name);
  }
  write_text(options.out_dir / "manifest.json", manifest.dump(2) + "\n");
  log << "wrote " << options.count << " scenarios to " << options.out_dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const TrainOptions& options, std::ostream& log) {
  const std::vector<scene::Scenario> scenarios = training_set(options.config, options.seed);
  const std::vector<scene::Scenario> validation = validation_set(options.config, options.seed);
  const auto val = pointers(validation);
  if (options.sweep.empty()) {
    train_once(options.config, options.resume, scenarios, val, log);
    return kExitOk;
  }
  fs::create_directories(options.config.out_dir);
  std::ofstream csv(options.config.out_dir / "sweep.csv");
  eval::write_metrics_csv_header(csv);
  for (double target : options.sweep) {
    RunConfig c = options.config;
    c.train.reward.mode = airl::RewardMode::kAdaptive;
    c.train.reward.target = target;
    std::ostringstream dir;
    dir << "target_" << std::setw(2) << std::setfill('0') << target;
    c.out_dir = options.config.out_dir / dir.str();
    log << "sweep target " << target << "\n";
    const RunSummary s = train_once(c, {}, scenarios, val, log);
    std::ostringstream label;
    label << "target=" << target;
    eval::write_metrics_csv_row(csv, label.str(), s.best.metrics);
    csv.flush();
  }
  return kExitOk;
}

int cmd_eval(const EvalOptions& options, std::ostream& log) {
  if (options.checkpoint.empty() == !options.cv_baseline) {
    throw ConfigError("eval: give exactly one of --checkpoint or --cv-baseline");
  }
  const RunConfig& c = options.config;
  const std::vector<scene::Scenario> scenarios =
      c.scenarios.empty() ? validation_set(c, options.seed) : load_scenario_set(c.scenarios);
  const auto ptrs = pointers(scenarios);
  eval::MetricsReport report;
  std::string label;
  if (options.cv_baseline) {
    report = eval::evaluate_cv(ptrs);
    label = "cv_baseline";
  } else {
    const rl::ModelConfig mc = model_config_for_checkpoint(options.checkpoint, c.policy_radius);
    rl::BehaviorModel model(mc, options.seed);
    nn::load_checkpoint(options.checkpoint, {{"policy", &model.store()}});
    report = eval::evaluate_policy(model, ptrs, c.train.workers);
    label = options.checkpoint.filename().string();
  }
  fs::create_directories(c.out_dir);
  json j = report.to_json();
  j["label"] = label;
  j["n_scenarios"] = scenarios.size();
  write_text(c.out_dir / "metrics.json", j.dump(2) + "\n");
  std::ofstream csv(c.out_dir / "metrics.csv");
  eval::write_metrics_csv_header(csv);
  eval::write_metrics_csv_row(csv, label, report);
  log << label << " rmse " << report.rmse << " offtrack " << report.offtrack_rate << " collision "
      << report.collision_rate << "\n";
  return kExitOk;
}

int cmd_bench(const BenchOptions& options, std::ostream& log) {
  const RunConfig& c = options.config;
  if (options.horizon < 2 || options.repetitions < 1 || options.warmup < 0) {
    throw ConfigError("bench: need horizon >= 2, repetitions >= 1, warmup >= 0");
  }
  rl::ModelConfig mc = c.train.model;
  if (!options.checkpoint.empty()) mc = model_config_for_checkpoint(options.checkpoint, c.policy_radius);
  rl::BehaviorModel model(mc, options.seed);
  if (!options.checkpoint.empty()) nn::load_checkpoint(options.checkpoint, {{"policy", &model.store()}});

  fs::create_directories(c.out_dir);
  std::ofstream jsonl(c.out_dir / "throughput.jsonl");
  std::ofstream csv(c.out_dir / "throughput.csv");
  csv << "n_envs,n_agents,workers,horizon,isps,elapsed_s,initial_step_latency_s,subsequent_step_latency_s\n";
  for (int n_agents : options.agent_counts) {
    for (int n_envs : options.env_counts) {
      const auto envs = generate_scenarios(c.tmpl, n_agents, n_envs, options.seed);
      const eval::ThroughputReport r = eval::isps_benchmark(model, pointers(envs), options.horizon,
                                                            options.repetitions, options.warmup, c.train.workers);
      json j = r.to_json();
      j["workers"] = c.train.workers;
      jsonl << j.dump() << "\n";
      csv << n_envs << ',' << n_agents << ',' << c.train.workers << ',' << options.horizon << ',' << r.isps << ','
          << r.elapsed << ',' << r.initial_step_latency << ',' << r.subsequent_step_latency << '\n';
      log << "envs " << n_envs << " agents " << n_agents << " isps " << r.isps << "\n";
    }
  }

  const int max_agents = *std::max_element(options.agent_counts.begin(), options.agent_counts.end());
  const scene::Scenario base = synthetic::generate_synthetic_scenario(c.tmpl, max_agents, options.seed);
  nn::ParamStore ac_store;
  std::mt19937_64 rng(options.seed);
  const encoder::AgentCentricEncoder agent_centric(ac_store, "agent_centric", mc.encoder, rng);
  const auto rows = eval::scaling_report(model.encoder(), model.store(),
                                         options.compare_agent_centric ? &agent_centric : nullptr, base,
                                         options.agent_counts, options.horizon, options.repetitions);
  std::ofstream scaling(c.out_dir / "scaling.csv");
  eval::write_scaling_csv(scaling, rows, options.compare_agent_centric);
  return kExitOk;
}

int cmd_gradcheck(const GradcheckOptions& options, std::ostream& log) {
  GradSuiteOptions opt;
  opt.seed = options.seed;
  opt.inject_bug = options.inject_bug;
  const auto entries = run_gradcheck_suite(opt);
  bool all = true;
  json report = json::array();
  for (const GradSuiteEntry& e : entries) {
    all = all && e.pass;
    log << (e.pass ? "PASS " : "FAIL ") << e.name << " max_rel " << e.result.max_rel_error << " at "
        << e.result.worst_tensor << "[" << e.result.worst_index << "] per_tensor " << e.result.max_tensor_rel_error
        << "\n";
    report.push_back({{"name", e.name},
                      {"pass", e.pass},
                      {"max_rel_error", e.result.max_rel_error},
                      {"worst_tensor", e.result.worst_tensor},
                      {"worst_index", e.result.worst_index},
                      {"max_tensor_rel_error", e.result.max_tensor_rel_error},
                      {"checked", e.result.checked}});
  }
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    write_text(options.out_dir / "gradcheck.json",
               json{{"eps", opt.eps}, {"tolerance", opt.tolerance}, {"inject_bug", opt.inject_bug}, {"checks", report}}
                       .dump(2) +
                   "\n");
  }
  return all ? kExitOk : kExitRuntime;
}

int cmd_export_plots(const ExportOptions& options, std::ostream& log) {
  if (options.logs.empty()) throw ConfigError("export-plots: no logs given");
  if (options.out_dir.empty()) throw ConfigError("export-plots: output directory required");
  fs::create_directories(options.out_dir);
  std::ofstream csv(options.out_dir / "training_curves.csv");
  csv << "run,epoch,metric,value\n";
  csv.precision(10);
  std::size_t rows = 0;
  for (const fs::path& path : options.logs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    const std::string run = path.parent_path().filename().string();
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      const int epoch = j.value("epoch", -1);
      std::vector<std::pair<std::string, double>> values;
      flatten(j, "", values);
      for (const auto& [name, v] : values) {
        if (name == "epoch") continue;
        csv << run << ',' << epoch << ',' << name << ',' << v << '\n';
        ++rows;
      }
    }
  }
  log << "wrote " << rows << " rows\n";
  return kExitOk;
}

}  // namespace instasim::cli

#pragma once

// Batch entry point. Every subcommand writes its outputs plus manifest.json
// into --out; identical manifests reproduce identical outputs.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "robust_entropy/error.hpp"
#include "robust_entropy/evaluation.hpp"
#include "robust_entropy/gridworld.hpp"
#include "robust_entropy/reward_adversary.hpp"
#include "robust_entropy/serialization.hpp"
#include "robust_entropy/solver.hpp"
#include "robust_entropy/training.hpp"
#include "robust_entropy/verification.hpp"

#ifndef ROBUST_ENTROPY_VERSION
#define ROBUST_ENTROPY_VERSION "dev"
#endif

namespace robust_entropy::cli {

enum ExitCode : int {
  ok = 0,
  verify_failed = 1,
  usage = 2,
  malformed_config = 3,
  missing_file = 4,
  runtime_error = 5,
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Worker count: ROBUST_ENTROPY_WORKERS wins over the flag; at least one.
inline std::size_t resolve_workers(std::size_t flag) {
  if (const char* env = std::getenv("ROBUST_ENTROPY_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    fail(ErrorKind::invalid_input, "ROBUST_ENTROPY_WORKERS must be a positive integer");
  }
  return std::max<std::size_t>(flag, 1);
}

/// Runs job(i) for i in [0, n) on up to `workers` threads. Results are
/// written by index, so the merge order never depends on scheduling.
template <class T>
std::vector<T> fan_out(std::size_t n, std::size_t workers, const std::function<T(std::size_t)>& job) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        out[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(workers, n); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorKind::invalid_input, "not a number: '" + item + "'");
    }
  }
  if (out.empty()) fail(ErrorKind::invalid_input, "empty list");
  return out;
}

struct Outputs {
  std::filesystem::path dir;
  std::vector<std::string> files;

  void text(const std::string& name, const std::string& body) {
    std::filesystem::create_directories(dir);
    write_text_file((dir / name).string(), body);
    files.push_back(name);
  }
  void json(const std::string& name, const nlohmann::json& j) { text(name, j.dump(2) + "\n"); }

  /// The manifest records the effective configuration; timestamps and worker
  /// counts are left out so reruns compare byte for byte.
  void manifest(const std::string& command, const nlohmann::json& config, std::uint64_t seed) {
    nlohmann::json m = {{"command", command},
                        {"config", config},
                        {"config_hash", hex64(fnv1a(config.dump()))},
                        {"seed", seed},
                        {"version", ROBUST_ENTROPY_VERSION},
                        {"outputs", files}};
    std::filesystem::create_directories(dir);
    write_text_file((dir / "manifest.json").string(), m.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_verify(int theorem, std::size_t instances, std::uint64_t seed, std::size_t workers, Outputs& out,
                      std::ostream& log) {
  if (theorem < 0 || theorem > 5) fail(ErrorKind::invalid_input, "--theorem must lie in 0..5");
  const std::vector<int> theorems = theorem == 0 ? std::vector<int>{1, 2, 3, 4, 5} : std::vector<int>{theorem};
  const auto reports = fan_out<std::vector<SuiteReport>>(
      theorems.size(), workers, [&](std::size_t i) { return theorem_suites(theorems[i], instances, seed); });
  nlohmann::json doc = nlohmann::json::array();
  bool all = true;
  for (std::size_t i = 0; i < theorems.size(); ++i)
    for (const auto& r : reports[i]) {
      all = all && r.passed();
      nlohmann::json j = to_json(r);
      j["theorem"] = theorems[i];
      doc.push_back(j);
      log << (r.passed() ? "PASS " : "FAIL ") << "theorem " << theorems[i] << " " << r.name << " (" << r.checks
          << " checks, " << r.failures << " failures, max error " << r.max_error << ")\n";
    }
  out.json("verify_report.json", doc);
  out.manifest("verify", {{"theorem", theorem}, {"instances", instances}}, seed);
  return all ? ok : verify_failed;
}

inline int cmd_solve(const std::string& mdp_path, const std::string& reg, double alpha, double tolerance,
                     Outputs& out, std::ostream& log) {
  const Mdp mdp = mdp_from_json(read_json_file(mdp_path));
  SolveOptions opts;
  opts.regularizer = parse_regularizer(reg);
  opts.alpha = alpha;
  opts.tolerance = tolerance;
  const auto sol = solve_regularized(mdp, opts);
  char buf[128];
  std::snprintf(buf, sizeof buf, "objective %.12g (dual bound %.12g, gap %.3g)\n", sol.objective, sol.dual_bound,
                sol.gap);
  log << buf;
  out.json("policy.json", to_json(sol.policy));
  out.json("solution.json", {{"objective", sol.objective},
                             {"dual_bound", sol.dual_bound},
                             {"gap", sol.gap},
                             {"iterations", sol.iterations},
                             {"state_marginal", sol.occupancy.state_marginal}});
  out.manifest("solve",
               {{"mdp", to_json(mdp)}, {"regularizer", reg}, {"alpha", alpha}, {"tolerance", tolerance}}, 0);
  return ok;
}

/// Training document: {"grid": GridSpec, "training": TrainingConfig}.
inline int cmd_train(const std::string& config_path, const std::vector<std::uint64_t>& seeds, std::size_t workers,
                     Outputs& out, std::ostream& log) {
  const nlohmann::json doc = read_json_file(config_path);
  if (!doc.is_object()) fail(ErrorKind::invalid_input, "training document must be an object");
  const GridSpec grid = grid_from_json(doc.value("grid", nlohmann::json::object()));
  validate(grid);
  const TrainingConfig base = training_config_from_json(doc.value("training", nlohmann::json::object()));
  std::vector<std::uint64_t> run_seeds = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;
  const auto results = fan_out<TrainingResult>(run_seeds.size(), workers, [&](std::size_t i) {
    TrainingConfig c = base;
    c.seed = run_seeds[i];
    return train_rollout_agent(grid, c);
  });
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string tag = "seed" + std::to_string(run_seeds[i]);
    out.json("policy_" + tag + ".json", to_json(results[i].policy));
    out.text("log_" + tag + ".jsonl", results[i].log_jsonl());
    const auto& last = results[i].log.back();
    log << tag << ": return " << last.mean_return << ", success " << last.success_rate << ", state entropy "
        << last.state_entropy << ", policy entropy " << last.policy_entropy << "\n";
  }
  out.manifest("train", {{"grid", to_json(grid)}, {"training", to_json(base)}, {"seeds", run_seeds}},
               run_seeds.front());
  return ok;
}

/// Perturbation document: a JSON array of perturbation specs.
inline int cmd_evaluate(const std::string& policy_path, const std::string& grid_path, const std::string& pert_path,
                        std::size_t episodes, std::size_t horizon, std::uint64_t seed, Outputs& out,
                        std::ostream& log) {
  const Policy policy = policy_from_json(read_json_file(policy_path));
  const GridSpec nominal = grid_path.empty() ? GridSpec{} : grid_from_json(read_json_file(grid_path));
  validate(nominal);
  std::vector<std::pair<std::string, GridSpec>> specs = {{"nominal", nominal}};
  nlohmann::json perts = nlohmann::json::array();
  if (!pert_path.empty()) {
    perts = read_json_file(pert_path);
    if (!perts.is_array()) fail(ErrorKind::invalid_input, "perturbation document must be an array");
    for (std::size_t i = 0; i < perts.size(); ++i) {
      const PerturbationSpec p = perturbation_from_json(perts[i]);
      specs.push_back({"p" + std::to_string(i) + "_" + to_string(p.kind), apply_perturbation(nominal, p)});
    }
  }
  const auto evals = evaluate(policy, specs, episodes, horizon, seed);
  for (const auto& ev : evals) log << ev.spec_id << ": success " << ev.success_at(horizon) << "\n";
  out.text("evaluation.csv", evaluation_csv(evals));
  out.manifest("evaluate",
               {{"policy", to_json(policy)},
                {"grid", to_json(nominal)},
                {"perturbations", perts},
                {"episodes", episodes},
                {"horizon", horizon}},
               seed);
  return ok;
}

/// Boundary CSV for a two-state MDP, or the worst-case reward when --reg is given.
inline int cmd_adversary(const std::string& mdp_path, const std::string& policy_path, const std::string& alphas,
                         double epsilon, std::size_t samples, const std::string& reg, const std::string& csv_name,
                         Outputs& out, std::ostream& log) {
  const Mdp mdp = mdp_from_json(read_json_file(mdp_path));
  const Policy policy = policy_path.empty() ? Policy::uniform(mdp.n_states, mdp.n_actions)
                                            : policy_from_json(read_json_file(policy_path));
  validate(policy, mdp);
  const std::vector<double> alpha_list = parse_doubles(alphas);
  nlohmann::json config = {{"mdp", to_json(mdp)}, {"policy", to_json(policy)}, {"alphas", alpha_list},
                           {"epsilon", epsilon}};
  if (!reg.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (double alpha : alpha_list) {
      const UncertaintySpec spec{parse_regularizer(reg), alpha, epsilon};
      const auto pert = worst_case_reward(mdp, policy, spec);
      rows.push_back({{"alpha", alpha},
                      {"r_tilde", pert.r_tilde},
                      {"delta", pert.delta},
                      {"robust_return", robust_return_closed_form(mdp, policy, spec)}});
      log << "alpha " << alpha << ": robust return " << robust_return_closed_form(mdp, policy, spec) << "\n";
    }
    out.json("worst_case.json", rows);
    config["regularizer"] = reg;
  } else {
    if (mdp.n_states != 2) fail(ErrorKind::invalid_input, "boundary output needs a two-state MDP; pass --reg otherwise");
    const numvec r_pi = policy_reward(mdp, policy);
    out.text(csv_name, boundary_csv(r_pi, epsilon, alpha_list, samples));
    log << "wrote " << alpha_list.size() << " boundary polylines\n";
    config["samples"] = samples;
  }
  out.manifest("adversary", config, 0);
  return ok;
}

/// One summary row per JSON-lines training log.
inline int cmd_report(const std::vector<std::string>& logs, Outputs& out, std::ostream& log) {
  std::string csv = "log,updates,final_return,final_success_rate,final_state_entropy,final_policy_entropy\n";
  nlohmann::json hashes = nlohmann::json::array();
  for (const auto& path : logs) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
    std::string line, text;
    nlohmann::json last;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      text += line + "\n";
      try {
        last = nlohmann::json::parse(line);
        last.at("return");
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::invalid_input, "bad log line in '" + path + "': " + e.what());
      }
      ++n;
    }
    if (n == 0) fail(ErrorKind::invalid_input, "empty log '" + path + "'");
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%.17g,%.17g\n",
                  std::filesystem::path(path).filename().string().c_str(), n, last.at("return").get<double>(),
                  last.value("success_rate", 0.0), last.value("state_entropy", 0.0), last.value("policy_entropy", 0.0));
    csv += buf;
    hashes.push_back(hex64(fnv1a(text)));
  }
  out.text("summary.csv", csv);
  log << "summarized " << logs.size() << " logs\n";
  out.manifest("report", {{"log_hashes", hashes}}, 0);
  return ok;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Entropy-regularized robustness toolkit"};
  app.require_subcommand(1);
  std::size_t workers_flag = 1;
  std::string out_dir = ".";
  app.add_option("--workers", workers_flag, "Worker threads for fan-out");
  app.add_option("--out", out_dir, "Output directory");

  int theorem = 0;
  std::size_t instances = 100;
  std::uint64_t seed = 0;
  auto* verify = app.add_subcommand("verify", "Run randomized property suites (theorem 1..5, 0 = all)");
  verify->add_option("--theorem", theorem);
  verify->add_option("--instances", instances);
  verify->add_option("--seed", seed);

  std::string mdp_path, reg = "state";
  double alpha = 1.0, tolerance = 1e-8;
  auto* solve = app.add_subcommand("solve", "Entropy-regularized solve of an MDP file");
  solve->add_option("--mdp", mdp_path)->required();
  solve->add_option("--reg", reg);
  solve->add_option("--alpha", alpha);
  solve->add_option("--tolerance", tolerance);

  std::string config_path;
  std::vector<std::uint64_t> seeds;
  auto* train = app.add_subcommand("train", "Train grid agents from a config");
  train->add_option("--config", config_path)->required();
  train->add_option("--seeds", seeds)->delimiter(',');

  std::string policy_path, grid_path, pert_path;
  std::size_t episodes = 200, horizon = 64;
  auto* eval = app.add_subcommand("evaluate", "Success rates of a policy under perturbations");
  eval->add_option("--policy", policy_path)->required();
  eval->add_option("--grid", grid_path);
  eval->add_option("--perturbations", pert_path);
  eval->add_option("--episodes", episodes);
  eval->add_option("--horizon", horizon);
  eval->add_option("--seed", seed);

  std::string adv_mdp, adv_policy, alphas = "1", adv_reg, csv_name = "boundary.csv";
  double epsilon = 0.5;
  std::size_t samples = 200;
  auto* adversary = app.add_subcommand("adversary", "Worst-case rewards or two-state boundary CSV");
  adversary->add_option("--mdp", adv_mdp)->required();
  adversary->add_option("--policy", adv_policy);
  adversary->add_option("--alphas", alphas);
  adversary->add_option("--epsilon", epsilon);
  adversary->add_option("--samples", samples);
  adversary->add_option("--reg", adv_reg);
  adversary->add_option("--csv", csv_name);

  std::vector<std::string> logs;
  auto* report = app.add_subcommand("report", "Summarize JSON-lines training logs");
  report->add_option("--logs", logs)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, log, err);
    return ok;
  } catch (const CLI::ParseError& e) {
    app.exit(e, log, err);
    return usage;
  }

  auto report_failure = [&](const char* kind, const std::string& what) {
    err << nlohmann::json{{"error", kind}, {"message", what}}.dump() << "\n";
  };
  try {
    Outputs out{out_dir, {}};
    const std::size_t workers = resolve_workers(workers_flag);
    if (*verify) return cmd_verify(theorem, instances, seed, workers, out, log);
    if (*solve) return cmd_solve(mdp_path, reg, alpha, tolerance, out, log);
    if (*train) return cmd_train(config_path, seeds, workers, out, log);
    if (*eval) return cmd_evaluate(policy_path, grid_path, pert_path, episodes, horizon, seed, out, log);
    if (*adversary) return cmd_adversary(adv_mdp, adv_policy, alphas, epsilon, samples, adv_reg, csv_name, out, log);
    if (*report) return cmd_report(logs, out, log);
  } catch (const Error& e) {
    const bool config = e.kind() == ErrorKind::invalid_input || e.kind() == ErrorKind::unknown_regularizer ||
                        e.kind() == ErrorKind::invalid_distribution;
    report_failure(to_string(e.kind()), e.what());
    return config ? malformed_config : runtime_error;
  } catch (const std::ios_base::failure& e) {
    report_failure("missing_file", e.what());
    return missing_file;
  } catch (const std::exception& e) {
    report_failure("runtime_error", e.what());
    return runtime_error;
  }
  return usage;
}

}  // namespace robust_entropy::cli

#pragma once

// JSON encoding of MDPs and policies. Doubles are written in shortest
// round-trip form, so decode(encode(m)) reproduces every bit.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "robust_entropy/error.hpp"
#include "robust_entropy/mdp.hpp"

namespace robust_entropy {

using json = nlohmann::json;

inline json to_json(const Mdp& mdp) {
  json kernel = json::array();
  json reward = json::array();
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    json ks = json::array();
    json rs = json::array();
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto row = mdp.row(s, a);
      ks.push_back(json(std::vector<double>(row.begin(), row.end())));
      rs.push_back(mdp.r(s, a));
    }
    kernel.push_back(std::move(ks));
    reward.push_back(std::move(rs));
  }
  return json{{"n_states", mdp.n_states}, {"n_actions", mdp.n_actions}, {"kernel", std::move(kernel)},
              {"reward", std::move(reward)},  {"discount", mdp.discount},   {"initial_dist", mdp.initial_dist}};
}

inline Mdp mdp_from_json(const json& j) {
  try {
    const auto S = j.at("n_states").get<std::size_t>();
    const auto A = j.at("n_actions").get<std::size_t>();
    Mdp mdp = Mdp::zeros(S, A, j.at("discount").get<double>());
    const auto& kernel = j.at("kernel");
    const auto& reward = j.at("reward");
    if (kernel.size() != S || reward.size() != S) fail(ErrorKind::invalid_input, "kernel/reward outer size != n_states");
    for (std::size_t s = 0; s < S; ++s) {
      if (kernel[s].size() != A || reward[s].size() != A)
        fail(ErrorKind::invalid_input, "kernel/reward inner size != n_actions");
      for (std::size_t a = 0; a < A; ++a) {
        if (kernel[s][a].size() != S) fail(ErrorKind::invalid_input, "kernel row size != n_states");
        for (std::size_t n = 0; n < S; ++n) mdp.P(s, a, n) = kernel[s][a][n].get<double>();
        mdp.r(s, a) = reward[s][a].get<double>();
      }
    }
    mdp.initial_dist = j.at("initial_dist").get<numvec>();
    validate(mdp);
    return mdp;
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("malformed MDP document: ") + e.what());
  }
}

inline json to_json(const Policy& policy) {
  json probs = json::array();
  for (std::size_t s = 0; s < policy.n_states; ++s) {
    const auto row = policy.row(s);
    probs.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  return json{{"n_states", policy.n_states}, {"n_actions", policy.n_actions}, {"probs", std::move(probs)}};
}

inline Policy policy_from_json(const json& j) {
  try {
    Policy p;
    p.n_states = j.at("n_states").get<std::size_t>();
    p.n_actions = j.at("n_actions").get<std::size_t>();
    const auto& probs = j.at("probs");
    if (probs.size() != p.n_states) fail(ErrorKind::invalid_input, "probs outer size != n_states");
    for (const auto& row : probs) {
      if (row.size() != p.n_actions) fail(ErrorKind::invalid_input, "probs row size != n_actions");
      for (const auto& v : row) p.probs.push_back(v.get<double>());
    }
    return p;
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("malformed policy document: ") + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::invalid_input, "cannot parse '" + path + "': " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + path + "'");
  out << text;
}

inline void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace robust_entropy

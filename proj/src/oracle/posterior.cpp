#include "prim/oracle/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace prim::oracle {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Running log-sum-exp.
struct LogAcc {
  double max = kNegInf;
  double sum = 0.0;
  void add(double x) {
    if (x == kNegInf) return;
    if (x > max) {
      sum = sum * std::exp(max - x) + 1.0;
      max = x;
    } else {
      sum += std::exp(x - max);
    }
  }
  double value() const { return max == kNegInf ? kNegInf : max + std::log(sum); }
};

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// counts[node][row * card + value]
std::vector<std::vector<double>> tally(const DiscreteBcm& bcm, const scm::Dag& dag, const DiscreteData& data) {
  std::vector<std::vector<double>> counts(bcm.k());
  for (std::size_t j = 0; j < bcm.k(); ++j) {
    std::size_t rows = 1;
    for (auto p : dag.parents[j]) rows *= bcm.cards[p];
    counts[j].assign(rows * bcm.cards[j], 0.0);
  }
  for (const auto& row : data)
    for (std::size_t j = 0; j < bcm.k(); ++j) {
      std::size_t r = 0;
      for (auto p : dag.parents[j]) r = r * bcm.cards[p] + static_cast<std::size_t>(row[p]);
      counts[j][r * bcm.cards[j] + static_cast<std::size_t>(row[j])] += 1.0;
    }
  return counts;
}

double loglik(const std::vector<double>& counts, const std::vector<double>& table) {
  double l = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0.0) continue;
    if (table[i] <= 0.0) return kNegInf;
    l += counts[i] * std::log(table[i]);
  }
  return l;
}

void check_data(const DiscreteBcm& bcm, const DiscreteData& d, const char* name) {
  for (std::size_t r = 0; r < d.size(); ++r) {
    if (d[r].size() != bcm.k())
      throw std::invalid_argument(std::string(name) + " row " + std::to_string(r) + ": wrong width");
    for (std::size_t j = 0; j < bcm.k(); ++j)
      if (d[r][j] < 0 || static_cast<std::size_t>(d[r][j]) >= bcm.cards[j])
        throw std::invalid_argument(std::string(name) + " row " + std::to_string(r) + ": value outside support of node " +
                                    std::to_string(j));
  }
}

bool mask_explained(const scm::Dag& dag, const std::vector<std::size_t>& targets, const std::vector<std::size_t>& mask) {
  for (auto m : mask) {
    bool ok = false;
    for (auto t : targets) {
      if (m == t) ok = true;
      else {
        const auto d = dag.descendants(t);
        ok |= std::find(d.begin(), d.end(), m) != d.end();
      }
      if (ok) break;
    }
    if (!ok) return false;
  }
  return true;
}

}  // namespace

double TargetPosterior::prob_of(const std::vector<std::size_t>& t) const {
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (targets[i] == t) return probs[i];
  return 0.0;
}

double TargetPosterior::node_marginal(std::size_t node) const {
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (std::find(targets[i].begin(), targets[i].end(), node) != targets[i].end()) s += probs[i];
  return s;
}

TargetPosterior enumerate_posterior(const DiscreteBcm& bcm, const DiscreteData& obs, const DiscreteData& intv,
                                    const std::vector<std::size_t>& mask) {
  validate(bcm);
  check_data(bcm, obs, "obs");
  check_data(bcm, intv, "int");
  if (mask.empty()) throw std::invalid_argument("enumerate_posterior: empty mask");
  for (auto m : mask)
    if (m >= bcm.k()) throw std::invalid_argument("enumerate_posterior: mask node out of range");

  TargetPosterior out;
  out.targets = bcm.candidate_targets();
  std::vector<LogAcc> acc(out.targets.size());
  const std::size_t k = bcm.k();

  for (std::size_t g = 0; g < bcm.graphs.size(); ++g) {
    const auto& gr = bcm.graphs[g];
    if (gr.prob <= 0.0) continue;
    const auto co = tally(bcm, gr.dag, obs);
    const auto ci = tally(bcm, gr.dag, intv);

    // per node and candidate: log-likelihoods and the interventional
    // renormaliser that excludes tables equal to the observational one
    std::vector<std::vector<double>> l_obs(k), l_int_same(k), l_int_new(k), z_int(k);
    for (std::size_t j = 0; j < k; ++j) {
      for (const auto& c : gr.mechanisms[j]) {
        l_obs[j].push_back(loglik(co[j], c.table));
        l_int_same[j].push_back(loglik(ci[j], c.table));
        double z = 0.0;
        for (const auto& c2 : gr.interventions[j])
          if (c2.table != c.table) z += c2.weight;
        z_int[j].push_back(z);
      }
      for (const auto& c : gr.interventions[j]) l_int_new[j].push_back(loglik(ci[j], c.table));
    }

    struct Candidate {
      std::size_t slot;
      std::vector<std::size_t> nodes;
      double log_prior;
    };
    std::vector<Candidate> cands;
    for (const auto& t : bcm.targets_for(g)) {
      if (!mask_explained(gr.dag, t.nodes, mask)) continue;
      const auto it = std::find(out.targets.begin(), out.targets.end(), t.nodes);
      cands.push_back({static_cast<std::size_t>(it - out.targets.begin()), t.nodes, safe_log(t.weight)});
    }
    if (cands.empty()) continue;

    std::vector<std::size_t> choice(k, 0);
    for (;;) {
      double base = std::log(gr.prob);
      for (std::size_t j = 0; j < k; ++j) base += safe_log(gr.mechanisms[j][choice[j]].weight) + l_obs[j][choice[j]];
      if (base != kNegInf) {
        for (const auto& cand : cands) {
          std::vector<std::uint8_t> is_target(k, 0);
          for (auto t : cand.nodes) is_target[t] = 1;
          double fixed = base + cand.log_prior;
          for (std::size_t j = 0; j < k; ++j)
            if (!is_target[j]) fixed += l_int_same[j][choice[j]];
          if (fixed == kNegInf) continue;
          // enumerate interventional tables over the targets
          std::vector<std::size_t> ic(cand.nodes.size(), 0);
          bool feasible = true;
          for (auto t : cand.nodes) feasible &= !gr.interventions[t].empty() && z_int[t][choice[t]] > 0.0;
          if (!feasible) continue;
          for (;;) {
            double term = fixed;
            for (std::size_t a = 0; a < cand.nodes.size() && term != kNegInf; ++a) {
              const auto t = cand.nodes[a];
              const auto& c2 = gr.interventions[t][ic[a]];
              if (c2.table == gr.mechanisms[t][choice[t]].table) {
                term = kNegInf;
                break;
              }
              term += safe_log(c2.weight / z_int[t][choice[t]]) + l_int_new[t][ic[a]];
            }
            acc[cand.slot].add(term);
            std::size_t a = 0;
            for (; a < ic.size(); ++a) {
              if (++ic[a] < gr.interventions[cand.nodes[a]].size()) break;
              ic[a] = 0;
            }
            if (a == ic.size()) break;
          }
        }
      }
      std::size_t j = 0;
      for (; j < k; ++j) {
        if (++choice[j] < gr.mechanisms[j].size()) break;
        choice[j] = 0;
      }
      if (j == k) break;
    }
  }

  LogAcc total;
  std::vector<double> logs;
  for (const auto& a : acc) {
    logs.push_back(a.value());
    total.add(logs.back());
  }
  const double z = total.value();
  if (z == kNegInf)
    throw std::domain_error("enumerate_posterior: zero evidence; data and mask are inconsistent with the model");
  for (double l : logs) out.probs.push_back(l == kNegInf ? 0.0 : std::exp(l - z));
  return out;
}

double kl_to_oracle(const std::vector<double>& model, const std::vector<double>& oracle) {
  if (model.size() != oracle.size()) throw std::invalid_argument("kl_to_oracle: support sizes differ");
  double kl = 0.0;
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    if (oracle[i] <= 0.0) continue;
    if (model[i] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += oracle[i] * (std::log(oracle[i]) - std::log(model[i]));
  }
  return kl;
}

Json to_json(const TargetPosterior& p) {
  Json j;
  j["targets"] = p.targets;
  j["probs"] = p.probs;
  return j;
}

}  // namespace prim::oracle

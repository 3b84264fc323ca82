#pragma once

#include <vector>

#include "prim/oracle/bcm.hpp"

namespace prim::oracle {

struct TargetPosterior {
  std::vector<std::vector<std::size_t>> targets;
  std::vector<double> probs;

  /// Probability of the exact target set; 0 if not a candidate.
  double prob_of(const std::vector<std::size_t>& t) const;
  /// Total mass of target sets containing `node`.
  double node_marginal(std::size_t node) const;
};

/// Exact posterior over target sets by enumeration of graphs, observational
/// tables, targets and interventional tables. A term is kept only when every
/// mask node is a target or a descendant of one under its graph. Throws
/// std::domain_error when no term has positive mass.
TargetPosterior enumerate_posterior(const DiscreteBcm& bcm, const DiscreteData& obs, const DiscreteData& intv,
                                    const std::vector<std::size_t>& mask);

/// KL(oracle || model); +inf when the model misses oracle mass.
double kl_to_oracle(const std::vector<double>& model, const std::vector<double>& oracle);

Json to_json(const TargetPosterior& p);

}  // namespace prim::oracle

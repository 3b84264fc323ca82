#include "prim/baselines/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace prim::baselines {

namespace {

constexpr double kStdFloor = 1e-8;

void check_columns(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& intv) {
  if (obs.cols() != intv.cols()) throw std::invalid_argument("baselines: obs and int column counts differ");
  if (obs.cols() == 0) throw std::invalid_argument("baselines: no nodes");
}

double column_mean(const Eigen::MatrixXd& m, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) s += m(r, j);
  return s / static_cast<double>(m.rows());
}

double column_std(const Eigen::MatrixXd& m, Eigen::Index j, double mean) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) s += (m(r, j) - mean) * (m(r, j) - mean);
  return std::sqrt(s / static_cast<double>(m.rows()));
}

// Sum over i<j of |x_i - x_j| for sorted x.
double pairwise_abs_sum(const std::vector<double>& x) {
  const auto n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * (2.0 * static_cast<double>(i) - n + 1.0);
  return s;
}

}  // namespace

std::vector<double> anomaly_score(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& intv) {
  check_columns(obs, intv);
  if (obs.rows() < 2) throw std::invalid_argument("anomaly_score: obs needs at least 2 rows");
  if (intv.rows() < 1) throw std::invalid_argument("anomaly_score: empty int data");
  std::vector<double> s(static_cast<std::size_t>(obs.cols()));
  for (Eigen::Index j = 0; j < obs.cols(); ++j) {
    const double mu = column_mean(obs, j);
    const double sd = std::max(column_std(obs, j, mu), kStdFloor);
    s[static_cast<std::size_t>(j)] = std::abs(column_mean(intv, j) - mu) / sd;
  }
  return s;
}

RankedResult traversal(const scm::Dag& graph, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& intv,
                       const std::vector<std::size_t>& mask_nodes, double threshold) {
  const auto k = static_cast<std::size_t>(obs.cols());
  if (graph.k != k) throw std::invalid_argument("traversal: graph size differs from data");
  if (mask_nodes.empty()) throw std::invalid_argument("traversal: empty mask");
  for (auto m : mask_nodes)
    if (m >= k) throw std::invalid_argument("traversal: mask node out of range");
  const auto score = anomaly_score(obs, intv);
  std::vector<std::uint8_t> anomalous(k, 0);
  bool any = false;
  for (std::size_t j = 0; j < k; ++j) any |= (anomalous[j] = score[j] > threshold) != 0;

  // tier 0: reached, no anomalous parent; 1: other anomalous; 2: rest
  std::vector<int> tier(k, 2);
  if (!any) {
    for (auto m : mask_nodes) tier[m] = 0;
  } else {
    std::vector<std::uint8_t> reached(k, 0);
    std::vector<std::size_t> stack(mask_nodes.begin(), mask_nodes.end());
    for (auto m : mask_nodes) reached[m] = 1;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto p : graph.parents[v])
        if (anomalous[p] && !reached[p]) {
          reached[p] = 1;
          stack.push_back(p);
        }
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (!anomalous[j]) continue;
      tier[j] = 1;
      if (!reached[j]) continue;
      const auto& pa = graph.parents[j];
      if (std::none_of(pa.begin(), pa.end(), [&](std::size_t p) { return anomalous[p] != 0; })) tier[j] = 0;
    }
  }

  RankedResult r;
  r.method = "traversal";
  r.scores = score;
  r.order.resize(k);
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    if (tier[a] != tier[b]) return tier[a] < tier[b];
    return score[a] > score[b];
  });
  return r;
}

RankedResult circa_score(const scm::Dag& graph, const Eigen::MatrixXd& obs, const Eigen::MatrixXd& intv) {
  check_columns(obs, intv);
  const auto k = static_cast<std::size_t>(obs.cols());
  if (graph.k != k) throw std::invalid_argument("circa_score: graph size differs from data");
  if (intv.rows() < 1) throw std::invalid_argument("circa_score: empty int data");
  std::vector<double> score(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& pa = graph.parents[j];
    const auto p = static_cast<Eigen::Index>(pa.size()) + 1;
    if (obs.rows() < p + 1)
      throw std::invalid_argument("circa_score: node " + std::to_string(j) + " needs at least " +
                                  std::to_string(p + 1) + " obs rows");
    auto design = [&](const Eigen::MatrixXd& m) {
      Eigen::MatrixXd x(m.rows(), p);
      x.col(0).setOnes();
      for (Eigen::Index c = 1; c < p; ++c) x.col(c) = m.col(static_cast<Eigen::Index>(pa[c - 1]));
      return x;
    };
    const Eigen::MatrixXd x = design(obs);
    const Eigen::VectorXd y = obs.col(static_cast<Eigen::Index>(j));
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    Eigen::VectorXd beta;
    if (qr.rank() == p) {
      beta = qr.solve(y);
    } else {
      const Eigen::MatrixXd g = x.transpose() * x + kRidge * Eigen::MatrixXd::Identity(p, p);
      beta = g.ldlt().solve(x.transpose() * y);
    }
    const Eigen::VectorXd resid = y - x * beta;
    const double dof = static_cast<double>(std::max<Eigen::Index>(obs.rows() - p, 1));
    const double sigma = std::sqrt(resid.squaredNorm() / dof);
    // a perfectly explained node: scale the floor to the column so that
    // rescaling a column leaves the ranking unchanged
    const double floor = kStdFloor * std::max(y.cwiseAbs().maxCoeff(), 1e-300);
    const double s = std::max(sigma, floor);
    const Eigen::VectorXd r_int = (intv.col(static_cast<Eigen::Index>(j)) - design(intv) * beta) / s;
    score[j] = r_int.cwiseAbs().mean();
  }
  return rank_by_scores(score, k, "circa");
}

RankedResult correlation_rank(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& intv, std::size_t m) {
  check_columns(obs, intv);
  const auto k = static_cast<std::size_t>(intv.cols());
  if (m >= k) throw std::invalid_argument("correlation_rank: symptom node out of range");
  if (intv.rows() < 3) throw std::invalid_argument("correlation_rank: int needs at least 3 rows");
  const auto n = static_cast<double>(intv.rows());
  auto centred = [&](std::size_t j) {
    Eigen::VectorXd c = intv.col(static_cast<Eigen::Index>(j));
    return Eigen::VectorXd(c.array() - c.sum() / n);
  };
  const Eigen::VectorXd cm = centred(m);
  const double nm = cm.norm();
  std::vector<double> score(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const Eigen::VectorXd cj = centred(j);
    const double nj = cj.norm();
    if (nj <= kStdFloor * std::sqrt(n) || nm <= kStdFloor * std::sqrt(n)) continue;
    score[j] = std::min(1.0, std::abs(cj.dot(cm)) / (nj * nm));
  }
  auto r = rank_by_scores(score, k, "corr");
  if (k > 1 && r.order[0] == m) std::swap(r.order[0], r.order[1]);
  return r;
}

double energy_distance(std::vector<double> x, std::vector<double> y) {
  if (x.empty() || y.empty()) throw std::invalid_argument("energy_distance: empty sample");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const auto nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) prefix[i + 1] = prefix[i] + x[i];
  double cross = 0.0;
  for (double v : y) {
    const auto c = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), v) - x.begin());
    const double below = prefix[c], above = prefix[x.size()] - below;
    cross += v * static_cast<double>(c) - below + above - v * (nx - static_cast<double>(c));
  }
  const double exy = cross / (nx * ny);
  const double exx = 2.0 * pairwise_abs_sum(x) / (nx * nx);
  const double eyy = 2.0 * pairwise_abs_sum(y) / (ny * ny);
  return std::max(0.0, 2.0 * exy - exx - eyy);
}

RankedResult epsilon_diagnosis(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& intv) {
  check_columns(obs, intv);
  if (obs.rows() < 2 || intv.rows() < 1) throw std::invalid_argument("epsilon_diagnosis: too few rows");
  const auto k = static_cast<std::size_t>(obs.cols());
  std::vector<double> score(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    const double mu = column_mean(obs, c);
    const double sd = std::max(column_std(obs, c, mu), kStdFloor);
    std::vector<double> a(static_cast<std::size_t>(obs.rows())), b(static_cast<std::size_t>(intv.rows()));
    for (std::size_t r = 0; r < a.size(); ++r) a[r] = obs(static_cast<Eigen::Index>(r), c) / sd;
    for (std::size_t r = 0; r < b.size(); ++r) b[r] = intv(static_cast<Eigen::Index>(r), c) / sd;
    score[j] = energy_distance(std::move(a), std::move(b));
  }
  return rank_by_scores(score, k, "eps_diag");
}

}  // namespace prim::baselines

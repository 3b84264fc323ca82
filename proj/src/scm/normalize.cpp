#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "prim/scm/episode.hpp"

namespace prim::scm {

Normalized normalize_and_pad(const Eigen::MatrixXd& obs_raw, const Eigen::MatrixXd& int_raw,
                             std::size_t k_real, std::size_t k_max) {
  if (obs_raw.rows() == 0) throw std::invalid_argument("normalize_and_pad: empty observational data");
  if (k_real == 0 || k_real > k_max) throw std::invalid_argument("normalize_and_pad: k_real out of range");
  if (static_cast<std::size_t>(obs_raw.cols()) < k_real || static_cast<std::size_t>(int_raw.cols()) < k_real)
    throw std::invalid_argument("normalize_and_pad: fewer columns than k_real");
  const auto km = static_cast<Eigen::Index>(k_max);
  Normalized out;
  out.obs = Eigen::MatrixXd::Zero(obs_raw.rows(), km);
  out.intv = Eigen::MatrixXd::Zero(int_raw.rows(), km);
  out.pad_mask.assign(k_max, 0);
  for (std::size_t j = k_real; j < k_max; ++j) out.pad_mask[j] = 1;
  const double factor = static_cast<double>(k_max) / static_cast<double>(k_real);
  auto transform = [&](double v, const NormStats& s) {
    const double z = (v - s.mean) / std::max(s.std, kStdFloor);
    return std::clamp(z, -kClip, kClip) * factor;
  };
  for (std::size_t j = 0; j < k_real; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    NormStats s;
    s.mean = obs_raw.col(c).mean();
    s.std = std::sqrt((obs_raw.col(c).array() - s.mean).square().mean());
    // A column whose spread is pure rounding error is treated as constant.
    if (s.std <= 1e-12 * std::max(1.0, std::abs(s.mean))) {
      s.std = 0.0;
      s.mean = obs_raw(0, c);
    }
    out.stats.push_back(s);
    for (Eigen::Index r = 0; r < obs_raw.rows(); ++r) out.obs(r, c) = transform(obs_raw(r, c), s);
    for (Eigen::Index r = 0; r < int_raw.rows(); ++r) out.intv(r, c) = transform(int_raw(r, c), s);
  }
  return out;
}

}  // namespace prim::scm

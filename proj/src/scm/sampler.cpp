#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

#include "prim/scm/scm.hpp"

namespace prim::scm {
namespace {

using Eigen::Index;

Eigen::VectorXd standard_normals(Rng& rng, Index n) {
  Eigen::VectorXd z(n);
  for (Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

// Lower Cholesky factor with escalating diagonal jitter.
Eigen::MatrixXd robust_cholesky(Eigen::MatrixXd k, double base_jitter) {
  double jitter = base_jitter;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(k + jitter * Eigen::MatrixXd::Identity(k.rows(), k.cols()));
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter *= 10.0;
  }
  throw std::runtime_error("GP kernel matrix is not positive definite");
}

Eigen::MatrixXd gp_inputs(Rng& rng, const Eigen::MatrixXd& x, const std::vector<std::size_t>& pa) {
  Eigen::MatrixXd in(x.rows(), static_cast<Index>(pa.size()) + 1);
  for (std::size_t i = 0; i < pa.size(); ++i) in.col(static_cast<Index>(i)) = x.col(static_cast<Index>(pa[i]));
  in.col(static_cast<Index>(pa.size())) = standard_normals(rng, x.rows());
  return in;
}

Eigen::VectorXd draw_gp_function(Rng& rng, const NodeMechanism& node, const Eigen::MatrixXd& in,
                                 const Eigen::MatrixXd* prev_in, const Eigen::VectorXd* prev_f) {
  const double jitter = 1e-8 * node.output_scale * node.output_scale;
  const Eigen::MatrixXd kii = gp_kernel(in, in, node.kernel, node.lengthscale, node.output_scale);
  if (!prev_in || prev_in->rows() == 0) return robust_cholesky(kii, jitter) * standard_normals(rng, in.rows());
  const Eigen::MatrixXd koo =
      gp_kernel(*prev_in, *prev_in, node.kernel, node.lengthscale, node.output_scale);
  const Eigen::MatrixXd kio = gp_kernel(in, *prev_in, node.kernel, node.lengthscale, node.output_scale);
  const Eigen::MatrixXd lo = robust_cholesky(koo, jitter);
  // A = L^{-1} K_oi, so K_io K_oo^{-1} K_oi = A^T A.
  const Eigen::MatrixXd a = lo.triangularView<Eigen::Lower>().solve(kio.transpose());
  const Eigen::VectorXd b = lo.triangularView<Eigen::Lower>().solve(*prev_f);
  const Eigen::VectorXd mean = a.transpose() * b;
  Eigen::MatrixXd cov = kii - a.transpose() * a;
  cov = 0.5 * (cov + cov.transpose());
  return mean + robust_cholesky(cov, jitter) * standard_normals(rng, in.rows());
}

Eigen::MatrixXd sample_impl(Rng& rng, const ScmInstance& scm, std::size_t n, GpMemory* record,
                            const GpMemory* condition) {
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  const std::size_t k = scm.dag.k;
  const Index rows = static_cast<Index>(n);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rows, static_cast<Index>(k));
  if (record) {
    record->inputs.assign(k, {});
    record->values.assign(k, {});
  }
  std::vector<double> buf;
  for (auto j : scm.dag.topological_order()) {
    const auto& node = scm.nodes[j];
    const auto& pa = scm.dag.parents[j];
    const Index col = static_cast<Index>(j);
    const double m = node.noise_multiplier;
    if (node.family == MechanismFamily::gp) {
      const Eigen::MatrixXd in = gp_inputs(rng, x, pa);
      const Eigen::MatrixXd* pin = nullptr;
      const Eigen::VectorXd* pf = nullptr;
      if (condition && j < condition->inputs.size() && condition->inputs[j].rows() > 0) {
        pin = &condition->inputs[j];
        pf = &condition->values[j];
      }
      const Eigen::VectorXd f = draw_gp_function(rng, node, in, pin, pf);
      if (record) {
        record->inputs[j] = in;
        record->values[j] = f;
      }
      const double sd = std::sqrt(node.gp_noise_variance) * m;
      for (Index r = 0; r < rows; ++r) x(r, col) = f[r] + sd * normal(rng) + node.shift;
    } else {
      for (Index r = 0; r < rows; ++r) {
        const double eps = sample_noise(rng, scm.noise);
        double v = 0.0;
        switch (node.family) {
          case MechanismFamily::linear:
          case MechanismFamily::baseline: {
            for (std::size_t i = 0; i < pa.size(); ++i)
              v += node.weights[i] * (x(r, static_cast<Index>(pa[i])) - node.parent_center[i]) /
                   node.parent_scale[i];
            const double h = node.family == MechanismFamily::linear ? normal(rng) : 0.0;
            v += node.level + node.confounder_weight * h + node.noise_weight * m * eps;
            break;
          }
          case MechanismFamily::tanh: {
            for (std::size_t i = 0; i < pa.size(); ++i)
              v += node.weights[i] * std::tanh(node.slopes[i] * x(r, static_cast<Index>(pa[i])));
            v += node.confounder_weight * normal(rng) + m * eps;
            break;
          }
          case MechanismFamily::nn: {
            if (pa.empty()) {
              buf.assign(1, m * eps);
              v = nn_forward(node, buf);
            } else {
              buf.resize(pa.size());
              for (std::size_t i = 0; i < pa.size(); ++i) buf[i] = x(r, static_cast<Index>(pa[i]));
              v = nn_forward(node, buf) + m * eps;
            }
            break;
          }
          case MechanismFamily::gp:
            break;
        }
        x(r, col) = v + node.shift;
      }
    }
    if (node.pinned) x.col(col).setConstant(node.pinned_value);
  }
  return x;
}

}  // namespace

Eigen::MatrixXd gp_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Kernel kernel,
                          double lengthscale, double output_scale) {
  Eigen::MatrixXd k(a.rows(), b.rows());
  const double amp = output_scale * output_scale;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.rows(); ++j) {
      const double r = (a.row(i) - b.row(j)).norm() / lengthscale;
      switch (kernel) {
        case Kernel::rbf: k(i, j) = amp * std::exp(-0.5 * r * r); break;
        case Kernel::matern12: k(i, j) = amp * std::exp(-r); break;
        case Kernel::matern32: {
          const double s = std::sqrt(3.0) * r;
          k(i, j) = amp * (1.0 + s) * std::exp(-s);
          break;
        }
      }
    }
  return k;
}

Eigen::MatrixXd sample_observational(Rng& rng, const ScmInstance& scm, std::size_t n,
                                     GpMemory* memory) {
  return sample_impl(rng, scm, n, memory, nullptr);
}

Eigen::MatrixXd sample_interventional(Rng& rng, const ScmInstance& scm, std::size_t n,
                                      const GpMemory* memory) {
  return sample_impl(rng, scm, n, nullptr, memory);
}

}  // namespace prim::scm

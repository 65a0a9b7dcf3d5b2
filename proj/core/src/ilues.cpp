#include "aquinv/ilues.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "aquinv/errors.hpp"
#include "aquinv/rng.hpp"

namespace aquinv {

int IluesConfig::n_local() const {
  return std::max(2, static_cast<int>(std::lround(local_fraction * ensemble_size)));
}

void IluesConfig::validate() const {
  if (ensemble_size < 2) throw config_error("IluesConfig: ensemble size must be at least 2");
  if (!(local_fraction > 0.0) || local_fraction > 1.0)
    throw config_error("IluesConfig: local fraction must lie in (0,1]");
  if (iterations < 0) throw config_error("IluesConfig: iteration count must be non-negative");
  if (n_local() > ensemble_size)
    throw config_error("IluesConfig: local ensemble larger than the ensemble");
}

Eigen::VectorXd PriorSpec::draw(std::mt19937_64& rng) const {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> ux(bounds.x_min, bounds.x_max);
  std::uniform_real_distribution<double> uy(bounds.y_min, bounds.y_max);
  std::uniform_real_distribution<double> us(bounds.strength_min, bounds.strength_max);
  Eigen::VectorXd v(n_params());
  for (int i = 0; i < n_kl; ++i) v[i] = gauss(rng);
  v[n_kl] = ux(rng);
  v[n_kl + 1] = uy(rng);
  for (int j = 0; j < 5; ++j) v[n_kl + 2 + j] = us(rng);
  return v;
}

namespace {

double reflect(double x, double lo, double hi) {
  if (x < lo) x = lo + (lo - x);
  if (x > hi) x = hi - (x - hi);
  return std::clamp(x, lo, hi);  // a second overshoot just pins to the bound
}

}  // namespace

void PriorSpec::clamp(Eigen::VectorXd& packed) const {
  packed[n_kl] = reflect(packed[n_kl], bounds.x_min, bounds.x_max);
  packed[n_kl + 1] = reflect(packed[n_kl + 1], bounds.y_min, bounds.y_max);
  for (int j = 0; j < 5; ++j)
    packed[n_kl + 2 + j] = reflect(packed[n_kl + 2 + j], bounds.strength_min, bounds.strength_max);
}

namespace {

// Shared per-iteration machinery: whitened parameter rows for J_m and the
// data-mismatch quadratic forms for J_d.
struct DistanceContext {
  Eigen::MatrixXd whitened;  // rows: L^{-1} (m_j - mean)
  Eigen::VectorXd j_d;
  double j_d_max = 0.0;

  DistanceContext(const Eigen::MatrixXd& params, const Eigen::MatrixXd& preds,
                  const Eigen::VectorXd& d, const Eigen::VectorXd& c_d_diag,
                  const Eigen::MatrixXd& c_mm) {
    Eigen::LLT<Eigen::MatrixXd> llt(c_mm);
    if (llt.info() != Eigen::Success)
      throw numeric_error("j_values: parameter covariance factorization failed");
    Eigen::RowVectorXd mean = params.colwise().mean();
    whitened = llt.matrixL().solve((params.rowwise() - mean).transpose()).transpose();

    const Eigen::VectorXd inv_cd = c_d_diag.cwiseInverse();
    j_d.resize(preds.rows());
    for (Eigen::Index j = 0; j < preds.rows(); ++j) {
      const Eigen::VectorXd r = preds.row(j).transpose() - d;
      j_d[j] = r.cwiseProduct(inv_cd.cwiseProduct(r)).sum();
    }
    j_d_max = j_d.maxCoeff();
  }

  Eigen::VectorXd j_for_anchor(const Eigen::VectorXd& anchor_whitened) const {
    Eigen::VectorXd j_m(whitened.rows());
    for (Eigen::Index k = 0; k < whitened.rows(); ++k)
      j_m[k] = (whitened.row(k).transpose() - anchor_whitened).squaredNorm();
    const double j_m_max = j_m.maxCoeff();
    Eigen::VectorXd j = j_d / std::max(j_d_max, 1e-300);
    if (j_m_max > 0.0) j += j_m / j_m_max;
    return j;
  }
};

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& m, double jitter_ratio) {
  Eigen::RowVectorXd mean = m.colwise().mean();
  Eigen::MatrixXd centered = m.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / std::max<double>(m.rows() - 1, 1);
  const double jitter = jitter_ratio * cov.diagonal().mean();
  cov.diagonal().array() += jitter > 0.0 ? jitter : jitter_ratio;
  return cov;
}

}  // namespace

Eigen::VectorXd j_values(const Eigen::MatrixXd& params, const Eigen::MatrixXd& preds,
                         const Eigen::VectorXd& anchor, const Eigen::VectorXd& d,
                         const Eigen::VectorXd& c_d_diag, const Eigen::MatrixXd& c_mm) {
  if ((c_d_diag.array() <= 0.0).any())
    throw std::invalid_argument("j_values: error covariance diagonal must be positive");
  DistanceContext ctx(params, preds, d, c_d_diag, c_mm);
  Eigen::LLT<Eigen::MatrixXd> llt(c_mm);
  Eigen::RowVectorXd mean = params.colwise().mean();
  Eigen::VectorXd anchor_w = llt.matrixL().solve(anchor - mean.transpose());
  return ctx.j_for_anchor(anchor_w);
}

std::vector<int> roulette_select(const Eigen::VectorXd& j, int n_local, std::mt19937_64& rng) {
  const int n = static_cast<int>(j.size());
  if (n_local > n) throw std::invalid_argument("roulette_select: n_local exceeds ensemble size");
  Eigen::VectorXd weight(n);
  for (int i = 0; i < n; ++i) weight[i] = 1.0 / std::max(j[i], 1e-12);

  std::vector<int> picked;
  picked.reserve(n_local);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int draw = 0; draw < n_local; ++draw) {
    const double total = weight.sum();
    double target = uniform(rng) * total;
    int chosen = -1;
    for (int i = 0; i < n; ++i) {
      if (weight[i] <= 0.0) continue;
      target -= weight[i];
      if (target <= 0.0) {
        chosen = i;
        break;
      }
    }
    if (chosen < 0) {  // numerical tail: take the last remaining index
      for (int i = n - 1; i >= 0; --i)
        if (weight[i] > 0.0) {
          chosen = i;
          break;
        }
    }
    picked.push_back(chosen);
    weight[chosen] = 0.0;  // without replacement
  }
  return picked;
}

Eigen::MatrixXd es_update(const Eigen::MatrixXd& m_local, const Eigen::MatrixXd& d_local,
                          const Eigen::VectorXd& d, const Eigen::VectorXd& c_d_inflated_diag,
                          std::mt19937_64& rng) {
  const Eigen::Index n_l = m_local.rows(), n_d = d.size();
  if (n_l < 2) throw std::invalid_argument("es_update: need at least 2 local samples");
  if ((c_d_inflated_diag.array() <= 0.0).any())
    throw std::invalid_argument("es_update: inflated covariance diagonal must be positive");

  Eigen::RowVectorXd m_mean = m_local.colwise().mean();
  Eigen::RowVectorXd d_mean = d_local.colwise().mean();
  Eigen::MatrixXd m_c = m_local.rowwise() - m_mean;
  Eigen::MatrixXd d_c = d_local.rowwise() - d_mean;
  const double denom = static_cast<double>(n_l - 1);
  Eigen::MatrixXd c_md = m_c.transpose() * d_c / denom;
  Eigen::MatrixXd c_dd = d_c.transpose() * d_c / denom;
  c_dd.diagonal() += c_d_inflated_diag;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(c_dd);
  if (ldlt.info() != Eigen::Success) {
    c_dd.diagonal().array() += 1e-10 * c_dd.trace() / n_d;
    ldlt.compute(c_dd);
    if (ldlt.info() != Eigen::Success)
      throw numeric_error("es_update: factorization of C_DD + C_D failed");
  }

  const Eigen::VectorXd sd = c_d_inflated_diag.cwiseSqrt();
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd innovations(n_d, n_l);
  for (Eigen::Index jcol = 0; jcol < n_l; ++jcol) {
    Eigen::VectorXd d_j = d;
    for (Eigen::Index i = 0; i < n_d; ++i) d_j[i] += sd[i] * gauss(rng);
    innovations.col(jcol) = d_j - d_local.row(jcol).transpose();
  }
  return m_local + (c_md * ldlt.solve(innovations)).transpose();
}

bool accept_reject(double j_d_new, double j_d_old, std::mt19937_64& rng) {
  if (!std::isfinite(j_d_new) || !std::isfinite(j_d_old))
    throw std::invalid_argument("accept_reject: non-finite data mismatch");
  const double rate = std::min(1.0, std::exp(-0.5 * (j_d_new - j_d_old)));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  return uniform(rng) <= rate;
}

IluesResult run_ilues(const PriorSpec& prior, ForwardEvaluator& evaluator,
                      const Eigen::VectorXd& d, const Eigen::VectorXd& sigma,
                      const IluesConfig& config,
                      const std::function<void(const Ensemble&)>& on_iteration) {
  config.validate();
  if ((sigma.array() <= 0.0).any())
    throw std::invalid_argument("run_ilues: sigma must be positive");

  const int n_e = config.ensemble_size;
  const int n_l = config.n_local();
  const int n_m = prior.n_params();
  const Eigen::VectorXd c_d = sigma.cwiseProduct(sigma);
  const Eigen::VectorXd c_d_inflated = config.beta() * c_d;
  const Eigen::VectorXd inv_cd = c_d.cwiseInverse();

  IluesResult result;

  Ensemble ens;
  ens.iteration = 0;
  ens.params.resize(n_e, n_m);
  ens.preds.resize(n_e, d.size());
  for (int i = 0; i < n_e; ++i) {
    auto rng = make_rng(config.seed, 0, i);
    ens.params.row(i) = prior.draw(rng).transpose();
    ens.preds.row(i) = evaluator.evaluate(ens.params.row(i).transpose()).transpose();
  }
  result.history.push_back(ens);
  if (on_iteration) on_iteration(ens);

  auto data_mismatch = [&](const Eigen::VectorXd& pred) {
    const Eigen::VectorXd r = pred - d;
    return r.cwiseProduct(inv_cd.cwiseProduct(r)).sum();
  };

  for (int n = 1; n <= config.iterations; ++n) {
    const Eigen::MatrixXd c_mm = sample_covariance(ens.params, config.cmm_jitter_ratio);
    DistanceContext ctx(ens.params, ens.preds, d, c_d, c_mm);

    Ensemble next;
    next.iteration = n;
    next.params = ens.params;
    next.preds = ens.preds;

    for (int i = 0; i < n_e; ++i) {
      auto rng = make_rng(config.seed, n, i);

      Eigen::VectorXd j = ctx.j_for_anchor(ctx.whitened.row(i).transpose());
      std::vector<int> local = roulette_select(j, n_l, rng);

      Eigen::MatrixXd m_local(n_l, n_m), d_local(n_l, d.size());
      for (int k = 0; k < n_l; ++k) {
        m_local.row(k) = ens.params.row(local[k]);
        d_local.row(k) = ens.preds.row(local[k]);
      }

      Eigen::MatrixXd updated = es_update(m_local, d_local, d, c_d_inflated, rng);
      for (int k = 0; k < n_l; ++k) {
        Eigen::VectorXd row = updated.row(k).transpose();
        if (!row.allFinite())
          throw numeric_error("run_ilues: non-finite parameters after update (iteration " +
                              std::to_string(n) + ")");
        prior.clamp(row);
        updated.row(k) = row.transpose();
      }

      std::uniform_int_distribution<int> pick(0, n_l - 1);
      const Eigen::VectorXd candidate = updated.row(pick(rng)).transpose();

      Eigen::VectorXd candidate_pred;
      try {
        candidate_pred = evaluator.evaluate(candidate);
      } catch (const std::exception&) {
        ++result.forward_failures;  // keep the previous state for this sample
        continue;
      }

      const double j_d_new = data_mismatch(candidate_pred);
      const double j_d_old = data_mismatch(ens.preds.row(i).transpose());
      if (accept_reject(j_d_new, j_d_old, rng)) {
        next.params.row(i) = candidate.transpose();
        next.preds.row(i) = candidate_pred.transpose();
      }
    }

    ens = std::move(next);
    result.history.push_back(ens);
    if (on_iteration) on_iteration(ens);
  }
  return result;
}

}  // namespace aquinv

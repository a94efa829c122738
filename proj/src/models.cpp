#include "gridhmc/models.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "gridhmc/hash.hpp"
#include "gridhmc/rng.hpp"

namespace gridhmc {

namespace {

std::string hash_values(const Eigen::MatrixXd& m) {
  return hash_hex(std::string_view(reinterpret_cast<const char*>(m.data()),
                                   sizeof(double) * static_cast<size_t>(m.size())));
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols() || !m.isApprox(m.transpose(), 1e-12))
    throw NumericalError(std::string(name) + " must be symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError(std::string(name) + " is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

// log(1 + exp(x)) without overflow.
double log1pexp(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

// ---------------------------------------------------------------- Gaussian

GaussianConjugateModel::GaussianConjugateModel(Eigen::VectorXd data_mean, int n_obs,
                                               Eigen::MatrixXd sigma, Eigen::MatrixXd sigma0,
                                               Eigen::VectorXd mu0)
    : data_mean_(std::move(data_mean)),
      n_obs_(n_obs),
      sigma_(std::move(sigma)),
      sigma0_(std::move(sigma0)),
      mu0_(std::move(mu0)) {
  if (n_obs_ < 1) throw ValidationError("gaussian model: need at least one observation");
  sigma_inv_ = spd_inverse(sigma_, "sigma");
  sigma0_inv_ = spd_inverse(sigma0_, "sigma0");
}

GaussianConjugateModel GaussianConjugateModel::from_data(const Eigen::MatrixXd& data_rows,
                                                         Eigen::MatrixXd sigma,
                                                         Eigen::MatrixXd sigma0,
                                                         Eigen::VectorXd mu0) {
  if (data_rows.rows() < 1) throw ValidationError("gaussian model: empty dataset");
  Eigen::VectorXd mean = data_rows.colwise().mean();
  return GaussianConjugateModel(mean, static_cast<int>(data_rows.rows()), std::move(sigma),
                                std::move(sigma0), std::move(mu0));
}

double GaussianConjugateModel::potential_impl(const Eigen::VectorXd& q) const {
  const Eigen::VectorXd d = q - data_mean_;
  const Eigen::VectorXd d0 = q - mu0_;
  return 0.5 * n_obs_ * d.dot(sigma_inv_ * d) + 0.5 * d0.dot(sigma0_inv_ * d0);
}

Eigen::VectorXd GaussianConjugateModel::force_impl(const Eigen::VectorXd& q) const {
  return -(n_obs_ * (sigma_inv_ * (q - data_mean_)) + sigma0_inv_ * (q - mu0_));
}

std::string GaussianConjugateModel::fingerprint() const {
  Eigen::MatrixXd packed(dim(), 2 * dim() + 2);
  packed << sigma_, sigma0_, data_mean_, mu0_;
  return "gaussian|n=" + std::to_string(n_obs_) + "|" + hash_values(packed);
}

// ---------------------------------------------------------------- Logistic

LogisticModel::LogisticModel(Eigen::MatrixXd x, Eigen::VectorXd y)
    : x_(std::move(x)), y_(std::move(y)) {
  if (x_.rows() != y_.size() || x_.rows() < 1)
    throw ValidationError("logistic model: design/response size mismatch");
  for (Eigen::Index i = 0; i < x_.rows(); ++i) {
    if (x_(i, 0) != 1.0)
      throw ValidationError("logistic model: first design column must be all ones");
    if (y_[i] != 0.0 && y_[i] != 1.0)
      throw ValidationError("logistic model: responses must be 0 or 1");
  }
  xty_ = x_.transpose() * y_;
}

double LogisticModel::potential_impl(const Eigen::VectorXd& q) const {
  const Eigen::VectorXd eta = x_ * q;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) sum += log1pexp(eta[i]);
  return sum - xty_.dot(q);
}

Eigen::VectorXd LogisticModel::force_impl(const Eigen::VectorXd& q) const {
  const Eigen::VectorXd eta = x_ * q;
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // stable sigmoid
    p[i] = eta[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-eta[i]))
                         : std::exp(eta[i]) / (1.0 + std::exp(eta[i]));
  }
  return x_.transpose() * (y_ - p);
}

std::string LogisticModel::fingerprint() const {
  Eigen::MatrixXd packed(x_.rows(), x_.cols() + 1);
  packed << x_, y_;
  return "logistic|n=" + std::to_string(x_.rows()) + "|" + hash_values(packed);
}

// ------------------------------------------------------------------ Banana

BananaModel::BananaModel(const Eigen::VectorXd& y, double sigma_y, double sigma_beta) {
  if (y.size() < 1) throw ValidationError("banana model: empty dataset");
  if (!(sigma_y > 0.0) || !(sigma_beta > 0.0))
    throw ValidationError("banana model: sigma_y and sigma_beta must be positive");
  sum_y_ = y.sum();
  sum_y_sq_ = y.squaredNorm();
  n_obs_ = static_cast<int>(y.size());
  sigma_y_sq_ = sigma_y * sigma_y;
  sigma_beta_sq_ = sigma_beta * sigma_beta;
  data_hash_ = hash_values(y);
}

double BananaModel::potential_impl(const Eigen::VectorXd& q) const {
  const double s = q[0] + q[1] * q[1];
  const double resid = sum_y_sq_ - 2.0 * s * sum_y_ + n_obs_ * s * s;
  return resid / (2.0 * sigma_y_sq_) + q.squaredNorm() / (2.0 * sigma_beta_sq_);
}

Eigen::VectorXd BananaModel::force_impl(const Eigen::VectorXd& q) const {
  const double s = q[0] + q[1] * q[1];
  const double pull = (sum_y_ - n_obs_ * s) / sigma_y_sq_;
  Eigen::VectorXd f(2);
  f[0] = pull;
  f[1] = pull * 2.0 * q[1];
  return f - q / sigma_beta_sq_;
}

std::string BananaModel::fingerprint() const {
  return "banana|n=" + std::to_string(n_obs_) + "|sy2=" + format_double(sigma_y_sq_) +
         "|sb2=" + format_double(sigma_beta_sq_) + "|" + data_hash_;
}

// ---------------------------------------------------------------- GP hyper

GpHyperModel::GpHyperModel(const Eigen::MatrixXd& sites, Eigen::VectorXd y)
    : y_(std::move(y)) {
  const Eigen::Index n = sites.rows();
  if (n != y_.size() || n < 2) throw ValidationError("gp model: sites/response size mismatch");
  dist_sq_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      dist_sq_(i, j) = (sites.row(i) - sites.row(j)).squaredNorm();
  Eigen::MatrixXd packed(n, sites.cols() + 1);
  packed << sites, y_;
  data_hash_ = hash_values(packed);
}

Eigen::MatrixXd GpHyperModel::covariance(const Eigen::VectorXd& q) const {
  const double eta = std::exp(q[0]);
  const double len = std::exp(q[1]);
  const double jitter = std::exp(q[2]);
  Eigen::MatrixXd cov = eta * (-len * dist_sq_).array().exp().matrix();
  cov.diagonal().array() += jitter;
  return cov;
}

double GpHyperModel::potential_impl(const Eigen::VectorXd& q) const {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance(q));
  if (llt.info() != Eigen::Success)
    throw NumericalError("gp covariance not positive definite at the requested hyperparameters");
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = y_.dot(llt.solve(y_));
  const double prior = (q.array() + 1.0).square().sum();
  return 0.5 * (log_det + quad + prior);
}

Eigen::VectorXd GpHyperModel::force_impl(const Eigen::VectorXd& q) const {
  const double eta = std::exp(q[0]);
  const double len = std::exp(q[1]);
  const double jitter = std::exp(q[2]);
  const Eigen::Index n = dist_sq_.rows();

  Eigen::MatrixXd kern = eta * (-len * dist_sq_).array().exp().matrix();
  Eigen::MatrixXd cov = kern;
  cov.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("gp covariance not positive definite at the requested hyperparameters");
  const Eigen::VectorXd alpha = llt.solve(y_);
  const Eigen::MatrixXd cov_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));

  const Eigen::MatrixXd d_len = -len * kern.cwiseProduct(dist_sq_);

  Eigen::VectorXd grad(3);
  grad[0] = 0.5 * cov_inv.cwiseProduct(kern).sum() - 0.5 * alpha.dot(kern * alpha);
  grad[1] = 0.5 * cov_inv.cwiseProduct(d_len).sum() - 0.5 * alpha.dot(d_len * alpha);
  grad[2] = 0.5 * jitter * cov_inv.trace() - 0.5 * jitter * alpha.squaredNorm();
  grad += (q.array() + 1.0).matrix();
  return -grad;
}

std::string GpHyperModel::fingerprint() const {
  return "gp|n=" + std::to_string(y_.size()) + "|" + data_hash_;
}

// --------------------------------------------------------------- Synthetic

CsvTable generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 1) throw ValidationError("synthetic spec: n must be >= 1");
  ChainRng rng(spec.seed);
  CsvTable out;

  if (spec.model == "logistic") {
    const int d = static_cast<int>(spec.true_params.size());
    if (d < 2) throw ValidationError("logistic synthetic: need beta of length >= 2");
    out.columns.push_back("x0");
    for (int k = 1; k < d; ++k) out.columns.push_back("x" + std::to_string(k));
    out.columns.push_back("y");
    out.rows.resize(spec.n, d + 1);
    for (int i = 0; i < spec.n; ++i) {
      out.rows(i, 0) = 1.0;
      double eta = spec.true_params[0];
      for (int k = 1; k < d; ++k) {
        out.rows(i, k) = rng.normal();
        eta += out.rows(i, k) * spec.true_params[k];
      }
      const double p = 1.0 / (1.0 + std::exp(-eta));
      out.rows(i, d) = rng.uniform() < p ? 1.0 : 0.0;
    }
    return out;
  }

  if (spec.model == "banana") {
    if (spec.true_params.size() != 2)
      throw ValidationError("banana synthetic: need (b1, b2)");
    const double s = spec.true_params[0] + spec.true_params[1] * spec.true_params[1];
    out.columns = {"y"};
    out.rows.resize(spec.n, 1);
    for (int i = 0; i < spec.n; ++i) out.rows(i, 0) = s + spec.sigma_y * rng.normal();
    return out;
  }

  if (spec.model == "gaussian") {
    const int d = static_cast<int>(spec.true_params.size());
    if (d < 1) throw ValidationError("gaussian synthetic: need a mean vector");
    Eigen::MatrixXd sigma =
        spec.sigma.size() > 0 ? spec.sigma : Eigen::MatrixXd::Identity(d, d);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw NumericalError("gaussian synthetic: sigma is not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();
    for (int k = 0; k < d; ++k) out.columns.push_back("y" + std::to_string(k + 1));
    out.rows.resize(spec.n, d);
    for (int i = 0; i < spec.n; ++i)
      out.rows.row(i) = (spec.true_params + chol * rng.normal_vector(d)).transpose();
    return out;
  }

  if (spec.model == "gp") {
    if (spec.true_params.size() != 3)
      throw ValidationError("gp synthetic: need (log eta, log l, log J)");
    Eigen::MatrixXd sites(spec.n, 2);
    for (int i = 0; i < spec.n; ++i) {
      sites(i, 0) = rng.uniform();
      sites(i, 1) = rng.uniform();
    }
    const double eta = std::exp(spec.true_params[0]);
    const double len = std::exp(spec.true_params[1]);
    const double jitter = std::exp(spec.true_params[2]);
    Eigen::MatrixXd cov(spec.n, spec.n);
    for (int i = 0; i < spec.n; ++i)
      for (int j = 0; j < spec.n; ++j)
        cov(i, j) = eta * std::exp(-len * (sites.row(i) - sites.row(j)).squaredNorm());
    cov.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("gp synthetic: covariance not positive definite");
    const Eigen::VectorXd y = Eigen::MatrixXd(llt.matrixL()) * rng.normal_vector(spec.n);
    out.columns = {"x1", "x2", "y"};
    out.rows.resize(spec.n, 3);
    out.rows << sites, y;
    return out;
  }

  throw ValidationError("unknown synthetic model: " + spec.model);
}

}  // namespace gridhmc

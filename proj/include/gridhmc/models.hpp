#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>

#include "gridhmc/csv.hpp"
#include "gridhmc/model.hpp"

namespace gridhmc {

// Conjugate multivariate Gaussian: Y|mu ~ N(mu, Sigma), mu ~ N(mu0, Sigma0).
// U depends on the data only through the sufficient statistic (data mean, N);
// the data-only constant term is dropped.
class GaussianConjugateModel final : public PotentialModel {
 public:
  GaussianConjugateModel(Eigen::VectorXd data_mean, int n_obs, Eigen::MatrixXd sigma,
                         Eigen::MatrixXd sigma0, Eigen::VectorXd mu0);

  static GaussianConjugateModel from_data(const Eigen::MatrixXd& data_rows,
                                          Eigen::MatrixXd sigma, Eigen::MatrixXd sigma0,
                                          Eigen::VectorXd mu0);

  int dim() const override { return static_cast<int>(data_mean_.size()); }
  std::string fingerprint() const override;

  const Eigen::VectorXd& data_mean() const { return data_mean_; }
  int n_obs() const { return n_obs_; }

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd force_impl(const Eigen::VectorXd& q) const override;

 private:
  Eigen::VectorXd data_mean_;
  int n_obs_;
  Eigen::MatrixXd sigma_, sigma0_;
  Eigen::VectorXd mu0_;
  Eigen::MatrixXd sigma_inv_, sigma0_inv_;  // cached at construction
};

// Bayesian logistic regression with design matrix X (first column all ones)
// and binary responses. U is the negative log-likelihood of the paper's model;
// the linked-sum term X^T y is cached as the sufficient statistic.
class LogisticModel final : public PotentialModel {
 public:
  LogisticModel(Eigen::MatrixXd x, Eigen::VectorXd y);

  int dim() const override { return static_cast<int>(x_.cols()); }
  std::string fingerprint() const override;

  const Eigen::MatrixXd& design() const { return x_; }
  const Eigen::VectorXd& responses() const { return y_; }

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd force_impl(const Eigen::VectorXd& q) const override;

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::VectorXd xty_;
};

// Banana-shaped posterior: y ~ N(b1 + b2^2, sigma_y^2), b ~ N(0, sigma_b^2 I).
class BananaModel final : public PotentialModel {
 public:
  BananaModel(const Eigen::VectorXd& y, double sigma_y, double sigma_beta);

  int dim() const override { return 2; }
  std::string fingerprint() const override;

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd force_impl(const Eigen::VectorXd& q) const override;

 private:
  double sum_y_, sum_y_sq_;
  int n_obs_;
  double sigma_y_sq_, sigma_beta_sq_;
  std::string data_hash_;
};

// Log hyperparameters (log eta, log l, log J) of a zero-mean GP with squared
// exponential covariance plus jitter, each with a N(-1, 1) prior. Every
// evaluation refactorizes the dense covariance; N is desk-scale.
class GpHyperModel final : public PotentialModel {
 public:
  GpHyperModel(const Eigen::MatrixXd& sites, Eigen::VectorXd y);

  int dim() const override { return 3; }
  std::string fingerprint() const override;

  const Eigen::MatrixXd& squared_distances() const { return dist_sq_; }

 protected:
  double potential_impl(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd force_impl(const Eigen::VectorXd& q) const override;

 private:
  Eigen::MatrixXd covariance(const Eigen::VectorXd& q) const;

  Eigen::MatrixXd dist_sq_;
  Eigen::VectorXd y_;
  std::string data_hash_;
};

// Synthetic dataset generation. Reproducible: the same spec yields the same
// table, written and read back through the CSV dataset format.
struct SyntheticSpec {
  std::string model;            // gaussian | logistic | banana | gp
  Eigen::VectorXd true_params;  // gaussian: mu; logistic: beta; banana: (b1,b2); gp: log hypers
  int n = 100;
  std::uint64_t seed = 0;
  double sigma_y = 2.0;         // banana observation noise
  Eigen::MatrixXd sigma;        // gaussian data covariance (empty = identity)
};

CsvTable generate_synthetic(const SyntheticSpec& spec);

}  // namespace gridhmc

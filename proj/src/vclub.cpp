#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "sevq/codebook.hpp"
#include "sevq/error.hpp"

namespace sevq {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> view(const FeatureMatrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

FeatureMatrix to_feature_matrix(const MatrixXd& m) {
  FeatureMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  }
  return out;
}

// Conditional means W x_M + b for every input row.
MatrixXd predict(const GaussianConditional& q, const FeatureMatrix& inputs) {
  const MatrixXd w = view(q.weights);
  const VectorXd b = Eigen::Map<const VectorXd>(q.bias.data(), static_cast<Eigen::Index>(q.bias.size()));
  MatrixXd mu = view(inputs) * w.transpose();
  mu.rowwise() += b.transpose();
  return mu;
}

void check_model(const GaussianConditional& q, std::size_t out, std::size_t in) {
  if (q.weights.rows() != out || q.weights.cols() != in || q.bias.size() != out ||
      q.variance.size() != out) {
    throw Error(ErrorKind::kShape, "variational model does not match sample dimensions");
  }
  for (double v : q.variance) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorKind::kValue, "degenerate variational conditional (non-positive variance)");
    }
  }
}

// Closed form of the pairwise estimate given the targets y and the means mu:
//   1/2 sum_d [mean_J y_Jd^2 - 2 ybar_d mubar_d + mean_M mu_Md^2 - mean_M (y_Md - mu_Md)^2] / var_d
double pair_value(const MatrixXd& y, const MatrixXd& mu, const std::vector<double>& variance) {
  const double n = static_cast<double>(y.rows());
  double total = 0.0;
  for (Eigen::Index d = 0; d < y.cols(); ++d) {
    const double y2 = y.col(d).squaredNorm() / n;
    const double mu2 = mu.col(d).squaredNorm() / n;
    const double cross = y.col(d).mean() * mu.col(d).mean();
    const double resid = (y.col(d) - mu.col(d)).squaredNorm() / n;
    total += 0.5 * (y2 - 2.0 * cross + mu2 - resid) / variance[d];
  }
  return total;
}

}  // namespace

double GaussianConditional::log_density(std::span<const double> target,
                                        std::span<const double> input) const {
  double ll = 0.0;
  for (std::size_t d = 0; d < target.size(); ++d) {
    const double mean = dot(weights.row(d), input) + bias[d];
    const double r = target[d] - mean;
    ll -= 0.5 * (r * r / variance[d] + std::log(2.0 * std::numbers::pi * variance[d]));
  }
  return ll;
}

GaussianConditional fit_conditional(const FeatureMatrix& targets, const FeatureMatrix& inputs,
                                    double ridge) {
  if (targets.rows() != inputs.rows()) {
    throw Error(ErrorKind::kShape, fmt::format("{} target rows vs {} input rows", targets.rows(),
                                               inputs.rows()));
  }
  if (targets.rows() < 2) throw Error(ErrorKind::kShape, "need at least two samples to fit");
  const auto n = static_cast<Eigen::Index>(inputs.rows());
  const auto in = static_cast<Eigen::Index>(inputs.cols());
  MatrixXd z(n, in + 1);
  z.leftCols(in) = view(inputs);
  z.col(in).setOnes();
  MatrixXd gram = z.transpose() * z;
  gram.diagonal().head(in).array() += ridge * static_cast<double>(n);
  const MatrixXd beta = gram.ldlt().solve(z.transpose() * view(targets));  // (in+1) x out
  const MatrixXd resid = view(targets) - z * beta;

  GaussianConditional q;
  q.weights = to_feature_matrix(beta.topRows(in).transpose());
  q.bias.resize(targets.cols());
  q.variance.resize(targets.cols());
  for (std::size_t d = 0; d < targets.cols(); ++d) {
    q.bias[d] = beta(in, static_cast<Eigen::Index>(d));
    q.variance[d] = resid.col(static_cast<Eigen::Index>(d)).squaredNorm() / static_cast<double>(n) + ridge;
    if (!std::isfinite(q.variance[d]) || !std::isfinite(q.bias[d])) {
      throw Error(ErrorKind::kValue, "variational fit produced non-finite parameters");
    }
  }
  return q;
}

double vclub_estimate(const FeatureMatrix& samples_i, const FeatureMatrix& samples_j,
                      const GaussianConditional& model) {
  if (samples_i.rows() != samples_j.rows()) {
    throw Error(ErrorKind::kShape, "vCLUB needs equal sample counts");
  }
  const std::size_t n = samples_i.rows();
  if (n < 2) throw Error(ErrorKind::kShape, "vCLUB needs at least two samples");
  check_model(model, samples_i.cols(), samples_j.cols());

  const MatrixXd mu = predict(model, samples_j);
  double positive = 0.0;
  double negative = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    double row_neg = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double ll = 0.0;
      for (std::size_t d = 0; d < samples_i.cols(); ++d) {
        const double var = model.variance[d];
        const double r = samples_i(j, d) - mu(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
        ll -= 0.5 * (r * r / var + std::log(2.0 * std::numbers::pi * var));
      }
      if (j == m) positive += ll;
      row_neg += ll;
    }
    negative += row_neg;
  }
  const double nn = static_cast<double>(n);
  // sum_M sum_J log q(e_i,M | e_j,M) = N sum_M log q(e_i,M | e_j,M).
  return (nn * positive - negative) / (nn * nn);
}

// ------------------------------------------------------- DisentangleObjective

DisentangleObjective::DisentangleObjective(const FeatureMatrix& initial_centroids,
                                           std::vector<FeatureMatrix> cluster_samples,
                                           double ridge)
    : initial_(initial_centroids), samples_(std::move(cluster_samples)), ridge_(ridge) {
  if (samples_.size() != initial_.rows()) {
    throw Error(ErrorKind::kShape, fmt::format("{} sample sets for {} centroids", samples_.size(),
                                               initial_.rows()));
  }
  for (std::size_t k = 0; k < samples_.size(); ++k) {
    if (samples_[k].rows() > 0 && samples_[k].cols() != initial_.cols()) {
      throw Error(ErrorKind::kShape, fmt::format("samples of cluster {} have wrong dimension", k));
    }
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].rows() < 2) continue;
    for (std::size_t j = i + 1; j < samples_.size(); ++j) {
      if (samples_[j].rows() < 2) continue;
      pairs_.emplace_back(static_cast<ClusterId>(i), static_cast<ClusterId>(j));
    }
  }
}

std::vector<FeatureMatrix> DisentangleObjective::representations(
    const FeatureMatrix& centroids) const {
  std::vector<FeatureMatrix> reps(samples_.size());
  for (std::size_t k = 0; k < samples_.size(); ++k) {
    const FeatureMatrix& s = samples_[k];
    FeatureMatrix r(s.rows(), s.cols());
    for (std::size_t m = 0; m < s.rows(); ++m) {
      auto out = r.row(m);
      for (std::size_t d = 0; d < s.cols(); ++d) out[d] = centroids(k, d) + s(m, d) - initial_(k, d);
      const double len = norm(out);
      if (!(len > 0.0) || !std::isfinite(len)) {
        throw Error(ErrorKind::kValue,
                    fmt::format("sample {} of cluster {} has zero or non-finite norm", m, k));
      }
      for (double& v : out) v /= len;
    }
    reps[k] = std::move(r);
  }
  return reps;
}

namespace {

FeatureMatrix head_rows(const FeatureMatrix& m, std::size_t count) {
  FeatureMatrix out(count, m.cols());
  std::copy(m.data().begin(), m.data().begin() + static_cast<std::ptrdiff_t>(count * m.cols()),
            out.data().begin());
  return out;
}

}  // namespace

VariationalModel DisentangleObjective::fit(const FeatureMatrix& centroids) const {
  const auto reps = representations(centroids);
  VariationalModel vm;
  vm.pairs = pairs_;
  for (const auto& [i, j] : pairs_) {
    const std::size_t n = std::min(reps[i].rows(), reps[j].rows());
    vm.conditionals.push_back(fit_conditional(head_rows(reps[i], n), head_rows(reps[j], n), ridge_));
  }
  return vm;
}

double DisentangleObjective::value(const FeatureMatrix& centroids,
                                   const VariationalModel& model) const {
  const auto reps = representations(centroids);
  double total = 0.0;
  for (std::size_t p = 0; p < pairs_.size(); ++p) {
    const auto [i, j] = pairs_[p];
    const std::size_t n = std::min(reps[i].rows(), reps[j].rows());
    const FeatureMatrix y = head_rows(reps[i], n);
    const FeatureMatrix x = head_rows(reps[j], n);
    check_model(model.conditionals[p], y.cols(), x.cols());
    total += pair_value(view(y), predict(model.conditionals[p], x), model.conditionals[p].variance);
  }
  return total;
}

FeatureMatrix DisentangleObjective::gradient(const FeatureMatrix& centroids,
                                             const VariationalModel& model) const {
  const auto reps = representations(centroids);
  const std::size_t h = centroids.cols();
  // Gradient with respect to each representation row.
  std::vector<MatrixXd> rep_grad(reps.size());
  for (std::size_t k = 0; k < reps.size(); ++k) {
    rep_grad[k] = MatrixXd::Zero(static_cast<Eigen::Index>(reps[k].rows()), static_cast<Eigen::Index>(h));
  }
  for (std::size_t p = 0; p < pairs_.size(); ++p) {
    const auto [i, j] = pairs_[p];
    const auto& q = model.conditionals[p];
    const auto n = static_cast<Eigen::Index>(std::min(reps[i].rows(), reps[j].rows()));
    const MatrixXd y = view(reps[i]).topRows(n);
    const MatrixXd mu = predict(q, head_rows(reps[j], static_cast<std::size_t>(n)));
    const Eigen::Map<const VectorXd> var(q.variance.data(), static_cast<Eigen::Index>(h));
    const Eigen::RowVectorXd inv_var = var.cwiseInverse().transpose();
    const Eigen::RowVectorXd y_mean = y.colwise().mean();
    const Eigen::RowVectorXd mu_mean = mu.colwise().mean();
    const double nn = static_cast<double>(n);
    // dI/dy_M = (mu_M - mubar) / (N var);  dI/dmu_M = (y_M - ybar) / (N var).
    MatrixXd d_y = (mu.rowwise() - mu_mean).array().rowwise() * inv_var.array() / nn;
    MatrixXd d_mu = (y.rowwise() - y_mean).array().rowwise() * inv_var.array() / nn;
    rep_grad[i].topRows(n) += d_y;
    rep_grad[j].topRows(n) += d_mu * view(q.weights);
  }

  FeatureMatrix grad(centroids.rows(), h);
  for (std::size_t k = 0; k < reps.size(); ++k) {
    const FeatureMatrix& s = samples_[k];
    for (std::size_t m = 0; m < s.rows(); ++m) {
      // Jacobian of normalize(v) is (I - u u^T) / |v|.
      std::vector<double> v(h);
      for (std::size_t d = 0; d < h; ++d) v[d] = centroids(k, d) + s(m, d) - initial_(k, d);
      const double len = norm(v);
      const auto u = reps[k].row(m);
      double ug = 0.0;
      for (std::size_t d = 0; d < h; ++d) ug += u[d] * rep_grad[k](static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
      for (std::size_t d = 0; d < h; ++d) {
        grad(k, d) += (rep_grad[k](static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d)) - u[d] * ug) / len;
      }
    }
  }
  return grad;
}

DisentangleResult disentangle(const Codebook& codebook,
                              std::span<const FeatureMatrix> cluster_samples,
                              const DisentangleOptions& options) {
  DisentangleResult result{codebook, {}};
  if (options.steps == 0) return result;
  if (codebook.size() < 2) {
    throw Error(ErrorKind::kConfig, "disentanglement needs at least two clusters");
  }
  const DisentangleObjective objective(
      codebook.centroids, {cluster_samples.begin(), cluster_samples.end()}, options.ridge);
  if (objective.pairs().empty()) return result;

  FeatureMatrix centroids = codebook.centroids;
  VariationalModel model = objective.fit(centroids);
  double current = objective.value(centroids, model);
  result.objective_trace.push_back(current);

  constexpr int kMaxHalvings = 60;
  for (std::size_t step = 0; step < options.steps; ++step) {
    const FeatureMatrix grad = objective.gradient(centroids, model);
    bool any = false;
    for (double g : grad.data()) {
      if (!std::isfinite(g)) {
        throw Error(ErrorKind::kValue, fmt::format("non-finite disentanglement gradient at step {}", step));
      }
      any = any || g != 0.0;
    }
    if (!any) break;

    bool accepted = false;
    double lr = options.learning_rate;
    for (int attempt = 0; attempt < kMaxHalvings && !accepted; ++attempt, lr *= 0.5) {
      FeatureMatrix trial = centroids;
      for (std::size_t i = 0; i < trial.data().size(); ++i) trial.data()[i] -= lr * grad.data()[i];
      try {
        VariationalModel trial_model = objective.fit(trial);
        const double value = objective.value(trial, trial_model);
        if (std::isfinite(value) && value <= current) {
          centroids = std::move(trial);
          model = std::move(trial_model);
          current = value;
          accepted = true;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kValue) throw;
      }
    }
    if (!accepted) break;
    result.objective_trace.push_back(current);
  }
  result.codebook.centroids = std::move(centroids);
  return result;
}

}  // namespace sevq

#include "angletl/aggregation.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "angletl/errors.hpp"

namespace angletl {

SourceBundle::SourceBundle(std::vector<SourceEstimate> list) : estimates(std::move(list)) {
  if (estimates.empty()) throw parameter_error("source bundle needs at least one estimate");
  const Eigen::Index dim = estimates.front().w_hat.size();
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].w_hat.size() != dim)
      throw shape_error("source estimate " + std::to_string(i) + " has length " +
                        std::to_string(estimates[i].w_hat.size()) + ", expected " +
                        std::to_string(dim));
    if (estimates[i].w_hat.norm() == 0.0)
      throw domain_error("source estimate " + std::to_string(i) +
                         " is the zero vector; normalization is undefined");
  }
}

AggregationResult aggregate_validation(const SourceBundle& bundle, const Dataset& validation) {
  if (validation.p() != bundle.p())
    throw shape_error("validation data has " + std::to_string(validation.p()) +
                      " covariates, sources have " + std::to_string(bundle.p()));
  const Eigen::Index k = bundle.k();
  Eigen::MatrixXd z(validation.n(), k);  // columns X*w_k
  for (Eigen::Index j = 0; j < k; ++j) z.col(j) = validation.X * bundle.estimates[j].w_hat;

  const Eigen::MatrixXd gram = z.transpose() * z;
  const Eigen::VectorXd rhs = z.transpose() * validation.Y;

  // Minimum-norm solution through the eigendecomposition of the K x K Gram
  // matrix; duplicated or collinear sources land here.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success) throw numeric_error("Gram eigendecomposition failed");
  const double tol = static_cast<double>(k) * 1e-14 * std::max(es.eigenvalues().maxCoeff(), 0.0);

  AggregationResult result;
  result.method = AggregationResult::Method::validation_ls;
  result.weights = Eigen::VectorXd::Zero(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (es.eigenvalues()[j] > tol) {
      result.weights += es.eigenvectors().col(j) *
                        (es.eigenvectors().col(j).dot(rhs) / es.eigenvalues()[j]);
    } else {
      result.rank_deficient = true;
    }
  }
  result.w_agg = Eigen::VectorXd::Zero(bundle.p());
  for (Eigen::Index j = 0; j < k; ++j)
    result.w_agg += result.weights[j] * bundle.estimates[j].w_hat;
  return result;
}

AggregationResult aggregate_spectral(const SourceBundle& bundle) {
  const Eigen::Index k = bundle.k();
  Eigen::MatrixXd normalized(k, bundle.p());
  for (Eigen::Index j = 0; j < k; ++j)
    normalized.row(j) = bundle.estimates[j].w_hat.transpose() / bundle.estimates[j].w_hat.norm();

  const Eigen::MatrixXd gram = normalized * normalized.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success) throw numeric_error("Gram eigendecomposition failed");

  const Eigen::VectorXd& eigs = es.eigenvalues();  // ascending
  const double top = eigs[k - 1];
  const double gap_tol = 1e-12 * std::max(top, 1e-300);

  AggregationResult result;
  result.method = AggregationResult::Method::spectral;
  result.degenerate_spectrum = (k > 1) && (top - eigs[k - 2] < gap_tol);

  auto largest_entry_index = [](const Eigen::VectorXd& v) {
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    return arg;
  };

  // Candidates share the top eigenvalue within tolerance; pick the one
  // whose largest-magnitude entry sits earliest.
  Eigen::Index chosen = k - 1;
  Eigen::Index chosen_entry = largest_entry_index(es.eigenvectors().col(chosen));
  for (Eigen::Index j = k - 2; j >= 0 && top - eigs[j] < gap_tol; --j) {
    const Eigen::Index entry = largest_entry_index(es.eigenvectors().col(j));
    if (entry < chosen_entry) {
      chosen = j;
      chosen_entry = entry;
    }
  }

  Eigen::VectorXd u = es.eigenvectors().col(chosen);
  if (u[chosen_entry] < 0.0) u = -u;
  result.mixed_signs = (u.minCoeff() < -1e-12) && (u.maxCoeff() > 1e-12);
  result.weights = u.cwiseAbs();
  result.w_agg = normalized.transpose() * result.weights;
  return result;
}

Eigen::VectorXd similarity_diagnostics(const SourceBundle& bundle,
                                       const Eigen::VectorXd& beta_true) {
  if (beta_true.size() != bundle.p())
    throw shape_error("reference coefficient length " + std::to_string(beta_true.size()) +
                      " does not match source length " + std::to_string(bundle.p()));
  if (beta_true.norm() == 0.0) throw domain_error("reference coefficient vector is zero");
  Eigen::VectorXd s(bundle.k());
  for (Eigen::Index j = 0; j < bundle.k(); ++j)
    s[j] = cosine_angle(bundle.estimates[j].w_hat, beta_true);
  return s;
}

std::string aggregation_result_json(const AggregationResult& result) {
  nlohmann::json j;
  j["method"] = result.method == AggregationResult::Method::spectral ? "spectral" : "validation_ls";
  j["weights"] = std::vector<double>(result.weights.begin(), result.weights.end());
  if (result.method == AggregationResult::Method::validation_ls) {
    j["rank_deficient"] = result.rank_deficient;
  } else {
    j["degenerate_spectrum"] = result.degenerate_spectrum;
    j["mixed_signs"] = result.mixed_signs;
  }
  return j.dump(2);
}

}  // namespace angletl

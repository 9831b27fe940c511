#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "angletl/types.hpp"

namespace angletl {

/// K source estimates of equal length; every estimate must have nonzero
/// norm because the spectral route normalizes them.
struct SourceBundle {
  std::vector<SourceEstimate> estimates;

  explicit SourceBundle(std::vector<SourceEstimate> list);

  Eigen::Index k() const { return static_cast<Eigen::Index>(estimates.size()); }
  Eigen::Index p() const { return estimates.front().w_hat.size(); }
};

struct AggregationResult {
  enum class Method { validation_ls, spectral };

  Eigen::VectorXd w_agg;
  Eigen::VectorXd weights;  // theta for validation_ls, s for spectral
  Method method = Method::spectral;
  bool rank_deficient = false;      // validation_ls: Gram system was singular
  bool degenerate_spectrum = false; // spectral: leading eigenvalue tied
  bool mixed_signs = false;         // spectral: leading eigenvector had both signs
};

/// Validation-set least squares: weights minimize ||Y - X sum_k theta_k w_k||^2
/// over the validation data, solved through the K x K Gram system. A
/// rank-deficient system gets the minimum-norm solution and sets the
/// rank_deficient flag. w_agg = sum_k theta_k w_k.
AggregationResult aggregate_validation(const SourceBundle& bundle, const Dataset& validation);

/// Spectral weighting without validation data: normalize each estimate,
/// take the leading unit eigenvector u1 of the K x K Gram matrix of the
/// normalized estimates, use s = |u1| as weights on the normalized
/// estimates. A leading eigenvalue tied within 1e-12 relative sets the
/// degenerate flag; the tie-break picks the candidate eigenvector whose
/// largest-magnitude entry has the smallest index, sign-normalized so
/// that entry is positive.
AggregationResult aggregate_spectral(const SourceBundle& bundle);

/// Cosines of the angles between each estimate and a reference coefficient
/// vector. Only meaningful in simulations where the truth is known.
Eigen::VectorXd similarity_diagnostics(const SourceBundle& bundle,
                                       const Eigen::VectorXd& beta_true);

/// JSON with method, weights and flags.
std::string aggregation_result_json(const AggregationResult& result);

}  // namespace angletl

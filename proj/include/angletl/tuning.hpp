#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "angletl/types.hpp"

namespace angletl {

/// Two-dimensional tuning grid. Candidate penalties are (lambda, r*lambda)
/// for every lambda and every ratio r, so the search is centered on the
/// scale where the risk-optimal eta/lambda ratio lives. Ratio 0 is the
/// plain ridge line and ratio 1 the distance-penalty diagonal; restricted
/// modes keep only those.
struct TuneGrid {
  enum class Mode { angle, dist, target_only };

  Eigen::VectorXd lambdas;     // strictly increasing, positive
  Eigen::VectorXd eta_ratios;  // eta = ratio * lambda
  Mode mode = Mode::angle;

  /// 50 log-spaced lambdas in [1e-4, 1e4]; ratios are 21 linear steps over
  /// [-1, 3] (which include 0 and 1 exactly).
  static TuneGrid defaults(Mode mode = Mode::angle);

  /// Ratios after applying the mode restriction.
  std::vector<double> active_ratios() const;

  void validate() const;
};

/// Fold layout: indices are shuffled by a fixed Fisher-Yates driven from
/// seed, then dealt round-robin, so assignments are identical across
/// platforms and runs and fold sizes differ by at most one.
struct CvPlan {
  int n_folds = 3;
  std::uint64_t seed = 0;

  std::vector<int> fold_of(int n) const;
};

struct CvPoint {
  double lambda = 0.0;
  double eta = 0.0;
  double cv_mse = 0.0;
};

struct CvResult {
  PenaltyConfig best;
  std::vector<CvPoint> surface;      // lambda-major, then ratio order
  Eigen::MatrixXd fold_sse;          // n_folds x surface.size(), held-out squared error sums
  std::vector<int> fold_assignment;  // per sample
};

/// K-fold cross-validation of the transfer fit over the grid. The score of
/// a grid point is the mean held-out squared prediction error; ties are
/// broken toward the smallest lambda, then the smallest |eta|, preferring
/// eta >= 0. Grid points are independent and are evaluated with
/// parallel_for(threads); the reduction is order-independent.
CvResult cross_validate(const Dataset& data, const SourceEstimate& source, const TuneGrid& grid,
                        const CvPlan& plan, int threads = 1);

/// Fit on all target rows at the selected configuration.
FitResult refit_best(const Dataset& data, const SourceEstimate& source, const PenaltyConfig& best);

/// Columns: lambda, eta, cv_mse.
void write_cv_surface_csv(const std::string& path, const CvResult& result);

}  // namespace angletl

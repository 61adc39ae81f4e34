#pragma once

#include "lowems/core.hpp"
#include "lowems/dynmodel.hpp"
#include "lowems/solver.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace lowems {

struct Rating {
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  double rating = 0;
  std::int64_t timestamp = 0;
};

/// Id <-> index maps. Items are matrix rows, users are matrix columns.
struct RatingIndex {
  std::vector<std::int64_t> item_ids;  // row -> item id, ascending
  std::vector<std::int64_t> user_ids;  // column -> user id, ascending
  std::unordered_map<std::int64_t, Eigen::Index> item_row;
  std::unordered_map<std::int64_t, Eigen::Index> user_col;

  static std::shared_ptr<const RatingIndex> build(const std::vector<Rating>& records);
};

/// A set of ratings sharing one index. Slices (bins, folds) keep the index of
/// the table they came from so every slice maps into the same matrix shape.
struct RatingsTable {
  std::vector<Rating> records;
  std::shared_ptr<const RatingIndex> index;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  Eigen::Index n_items() const { return static_cast<Eigen::Index>(index->item_ids.size()); }
  Eigen::Index n_users() const { return static_cast<Eigen::Index>(index->user_ids.size()); }
  Eigen::Index row_of(const Rating& r) const { return index->item_row.at(r.item_id); }
  Eigen::Index col_of(const Rating& r) const { return index->user_col.at(r.user_id); }

  /// Indexes `records` over exactly the ids they contain.
  static RatingsTable from_records(std::vector<Rating> records);
  /// Same index as this table, different records.
  RatingsTable with_records(std::vector<Rating> subset) const;
};

/// Raised when a filtering step removes every record.
class EmptyResult : public Error {
 public:
  using Error::Error;
};

/// Reads `user_id,item_id,rating,timestamp` CSV (header required). Exact
/// duplicate (user, item, timestamp) rows keep the last occurrence.
RatingsTable ingest(const std::string& path);
RatingsTable ingest_stream(std::istream& in, const std::string& source_name = "<stream>");

void write_ratings_csv(std::ostream& out, const RatingsTable& table);

/// Repeatedly drops users with fewer than min_user_ratings and items with fewer
/// than min_item_ratings until neither rule removes anything; re-indexes.
RatingsTable truncate(const RatingsTable& table, std::size_t min_user_ratings, std::size_t min_item_ratings);

struct BinnedRatings {
  std::vector<RatingsTable> bins;
  std::vector<double> boundaries;  // d + 1 edges, equal width over [min_ts, max_ts]

  std::size_t d() const { return bins.size(); }
  std::size_t total() const;
};

/// Equal-width time bins: bin k holds boundaries[k] <= ts < boundaries[k+1];
/// the last bin is closed on the right.
BinnedRatings bin_by_time(const RatingsTable& table, std::size_t d);

/// Held-out test set plus cross-validation folds on the last training bin.
struct EvalSplit {
  RatingsTable test;                                   // globally latest test_frac of the ratings
  BinnedRatings train_bins;                            // the rest, re-binned into the same d
  std::vector<std::vector<std::size_t>> validation;    // per fold: indices into the last train bin

  std::size_t folds() const { return validation.size(); }
  /// Bins 1..d-1 whole plus the last bin minus fold k's validation share.
  BinnedRatings fold_train(std::size_t k) const;
  RatingsTable fold_validation(std::size_t k) const;
};

EvalSplit make_split(const BinnedRatings& binned, double test_frac, std::size_t folds, RandomStream& rng);

struct RatingsSolverConfig {
  Eigen::Index rank = 10;
  double gamma = 1.0;
  int max_sweeps = 500;
  double tol = 1e-8;
  InitMode init = InitMode::Random;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Sampling-ensemble LOWEMS problem over the bins; empty bins are dropped
/// and the remaining weights renormalized.
LowemsProblem ratings_problem(const BinnedRatings& bins, const WeightVector& w, const RatingsSolverConfig& cfg);

struct PredictionScore {
  double rmse = std::numeric_limits<double>::quiet_NaN();
  std::size_t scored = 0;
  std::size_t excluded = 0;  // user or item without weighted training data
};

/// Fits LOWEMS on `train` and scores `target` (predictions read from X_hat).
PredictionScore fit_and_score(const BinnedRatings& train, const RatingsTable& target, const WeightVector& w,
                              const RatingsSolverConfig& cfg, RandomStream init_rng);

double rmse(const std::vector<double>& predictions, const std::vector<double>& truth);

struct KappaRow {
  double kappa = 0;
  double mean_val_rmse = 0;
  double stddev = 0;
  int folds_ok = 0;
};

struct CrossValidation {
  double best_kappa = 0;
  std::vector<KappaRow> table;  // grid order; kappas whose folds all failed are omitted
  std::vector<std::string> warnings;
};

/// Mean validation RMSE over folds for each kappa; argmin with ties going to
/// the smaller kappa.
CrossValidation cross_validate_kappa(const EvalSplit& split, const std::vector<double>& kappa_grid,
                                     const RatingsSolverConfig& cfg);

struct TestEvaluation {
  std::vector<double> rmse;  // one per restart
  std::size_t excluded = 0;  // test records skipped (unseen user or item)
};

/// Trains on every non-test rating with `restarts` random initializations.
TestEvaluation evaluate_test(const EvalSplit& split, double kappa, const RatingsSolverConfig& cfg, int restarts = 10);

/// {0} plus log-spaced decades 1e-3 .. 1e3.
std::vector<double> default_kappa_grid();

/// Ratings drawn from a drifting factor model: d training periods of equal
/// length, each sampled from its own X^t, followed by a test period sampled
/// from X^d sized so that it is the latest test_frac of all ratings.
struct PlantedRatingsConfig {
  Eigen::Index n_items = 200;
  Eigen::Index n_users = 300;
  Eigen::Index r = 5;
  std::size_t d = 3;
  double sigma1 = 0.5;           // rating noise std. dev.
  double sigma2 = 0.5;           // per-entry drift std. dev. of the user factors
  std::size_t ratings_per_bin = 20000;
  double test_frac = 0.10;
  std::int64_t period_seconds = 1'000'000;
};

struct PlantedRatings {
  RatingsTable table;
  std::shared_ptr<const DynamicGroundTruth> truth;
};

PlantedRatings generate_planted_ratings(const PlantedRatingsConfig& cfg, RandomStream& rng);

}  // namespace lowems

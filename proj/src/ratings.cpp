#include "lowems/ratings.hpp"

#include "lowems/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace lowems {

std::shared_ptr<const RatingIndex> RatingIndex::build(const std::vector<Rating>& records) {
  auto index = std::make_shared<RatingIndex>();
  std::set<std::int64_t> items;
  std::set<std::int64_t> users;
  for (const Rating& r : records) {
    items.insert(r.item_id);
    users.insert(r.user_id);
  }
  index->item_ids.assign(items.begin(), items.end());
  index->user_ids.assign(users.begin(), users.end());
  for (std::size_t i = 0; i < index->item_ids.size(); ++i)
    index->item_row.emplace(index->item_ids[i], static_cast<Eigen::Index>(i));
  for (std::size_t j = 0; j < index->user_ids.size(); ++j)
    index->user_col.emplace(index->user_ids[j], static_cast<Eigen::Index>(j));
  return index;
}

RatingsTable RatingsTable::from_records(std::vector<Rating> records) {
  RatingsTable table;
  table.index = RatingIndex::build(records);
  table.records = std::move(records);
  return table;
}

RatingsTable RatingsTable::with_records(std::vector<Rating> subset) const {
  RatingsTable table;
  table.index = index;
  table.records = std::move(subset);
  return table;
}

namespace {

template <typename T>
bool parse_number(const std::string& field, T& out) {
  const char* begin = field.data();
  const char* end = field.data() + field.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  if (begin == end) return false;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && (s[start] == ' ' || s[start] == '\t')) ++start;
  return s.substr(start);
}

bool later(const Rating& a, const Rating& b) {
  return std::tie(a.timestamp, a.user_id, a.item_id) > std::tie(b.timestamp, b.user_id, b.item_id);
}

}  // namespace

RatingsTable ingest_stream(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    have_header = true;
    break;
  }
  if (!have_header) throw InvalidInput(source_name + ": empty ratings file");
  {
    const auto header = split_csv_line(line);
    const std::vector<std::string> expected{"user_id", "item_id", "rating", "timestamp"};
    bool ok = header.size() == expected.size();
    for (std::size_t i = 0; ok && i < header.size(); ++i) ok = trim(header[i]) == expected[i];
    if (!ok) {
      throw InvalidInput(source_name + ":" + std::to_string(line_no) +
                         ": expected header 'user_id,item_id,rating,timestamp'");
    }
  }

  std::vector<Rating> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = source_name + ":" + std::to_string(line_no);
    if (fields.size() != 4) throw InvalidInput(where + ": expected 4 fields, got " + std::to_string(fields.size()));
    Rating r;
    if (!parse_number(fields[0], r.user_id)) throw InvalidInput(where + ": malformed user_id '" + fields[0] + "'");
    if (!parse_number(fields[1], r.item_id)) throw InvalidInput(where + ": malformed item_id '" + fields[1] + "'");
    if (!parse_number(fields[2], r.rating) || !std::isfinite(r.rating))
      throw InvalidInput(where + ": malformed rating '" + fields[2] + "'");
    if (!parse_number(fields[3], r.timestamp)) throw InvalidInput(where + ": malformed timestamp '" + fields[3] + "'");
    rows.push_back(r);
  }
  if (rows.empty()) throw InvalidInput(source_name + ": no ratings after the header");

  // Exact duplicates of (user, item, timestamp): the last row in file order wins.
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::size_t> last_seen;
  for (std::size_t i = 0; i < rows.size(); ++i) last_seen[{rows[i].user_id, rows[i].item_id, rows[i].timestamp}] = i;
  std::vector<Rating> kept;
  kept.reserve(last_seen.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (last_seen.at({rows[i].user_id, rows[i].item_id, rows[i].timestamp}) == i) kept.push_back(rows[i]);
  }
  return RatingsTable::from_records(std::move(kept));
}

RatingsTable ingest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(path + ": cannot open ratings file");
  return ingest_stream(in, path);
}

void write_ratings_csv(std::ostream& out, const RatingsTable& table) {
  out << "user_id,item_id,rating,timestamp\n";
  for (const Rating& r : table.records) {
    out << r.user_id << ',' << r.item_id << ',' << format_double(r.rating) << ',' << r.timestamp << '\n';
  }
}

RatingsTable truncate(const RatingsTable& table, std::size_t min_user_ratings, std::size_t min_item_ratings) {
  std::vector<Rating> current = table.records;
  while (true) {
    std::unordered_map<std::int64_t, std::size_t> per_user;
    std::unordered_map<std::int64_t, std::size_t> per_item;
    for (const Rating& r : current) {
      ++per_user[r.user_id];
      ++per_item[r.item_id];
    }
    std::vector<Rating> next;
    next.reserve(current.size());
    for (const Rating& r : current) {
      if (per_user[r.user_id] >= min_user_ratings && per_item[r.item_id] >= min_item_ratings) next.push_back(r);
    }
    if (next.size() == current.size()) break;
    current = std::move(next);
  }
  if (current.empty()) throw EmptyResult("truncate: every rating was removed");
  return RatingsTable::from_records(std::move(current));
}

std::size_t BinnedRatings::total() const {
  std::size_t n = 0;
  for (const auto& b : bins) n += b.size();
  return n;
}

BinnedRatings bin_by_time(const RatingsTable& table, std::size_t d) {
  require(d >= 1, "bin_by_time: d must be at least 1");
  if (table.empty()) throw InvalidInput("bin_by_time: table is empty");
  const auto [lo_it, hi_it] = std::minmax_element(
      table.records.begin(), table.records.end(),
      [](const Rating& a, const Rating& b) { return a.timestamp < b.timestamp; });
  const double lo = static_cast<double>(lo_it->timestamp);
  const double hi = static_cast<double>(hi_it->timestamp);

  BinnedRatings out;
  out.boundaries.resize(d + 1);
  for (std::size_t k = 0; k <= d; ++k) out.boundaries[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(d);
  out.boundaries.back() = hi;

  std::vector<std::vector<Rating>> parts(d);
  for (const Rating& r : table.records) {
    const double ts = static_cast<double>(r.timestamp);
    // Number of interior edges at or below ts.
    const auto it = std::upper_bound(out.boundaries.begin() + 1, out.boundaries.end() - 1, ts);
    const std::size_t k = static_cast<std::size_t>(it - (out.boundaries.begin() + 1));
    parts[std::min(k, d - 1)].push_back(r);
  }
  for (auto& part : parts) out.bins.push_back(table.with_records(std::move(part)));
  return out;
}

BinnedRatings EvalSplit::fold_train(std::size_t k) const {
  require(k < folds(), "fold_train: fold index out of range");
  BinnedRatings out = train_bins;
  const auto& last = train_bins.bins.back().records;
  std::vector<bool> held(last.size(), false);
  for (std::size_t i : validation[k]) held[i] = true;
  std::vector<Rating> kept;
  kept.reserve(last.size());
  for (std::size_t i = 0; i < last.size(); ++i)
    if (!held[i]) kept.push_back(last[i]);
  out.bins.back() = train_bins.bins.back().with_records(std::move(kept));
  return out;
}

RatingsTable EvalSplit::fold_validation(std::size_t k) const {
  require(k < folds(), "fold_validation: fold index out of range");
  const auto& last = train_bins.bins.back().records;
  std::vector<Rating> picked;
  picked.reserve(validation[k].size());
  for (std::size_t i : validation[k]) picked.push_back(last[i]);
  return train_bins.bins.back().with_records(std::move(picked));
}

EvalSplit make_split(const BinnedRatings& binned, double test_frac, std::size_t folds, RandomStream& rng) {
  require(binned.d() >= 1, "make_split: need at least one bin");
  require(test_frac >= 0 && test_frac < 1, "make_split: test_frac must lie in [0, 1)");
  require(folds >= 2, "make_split: need at least two folds");

  std::vector<Rating> all;
  all.reserve(binned.total());
  for (const auto& bin : binned.bins) all.insert(all.end(), bin.records.begin(), bin.records.end());
  if (all.empty()) throw InvalidInput("make_split: no ratings");
  const auto& index = binned.bins.front().index;

  // Latest first, ties broken by (user, item) so the cut is deterministic.
  std::vector<Rating> by_time = all;
  std::stable_sort(by_time.begin(), by_time.end(), later);
  const auto n_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(by_time.size())));
  if (n_test >= by_time.size()) throw InvalidInput("make_split: test fraction leaves no training data");

  EvalSplit split;
  split.test.index = index;
  split.test.records.assign(by_time.begin(), by_time.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<Rating> rest(by_time.begin() + static_cast<std::ptrdiff_t>(n_test), by_time.end());
  std::reverse(rest.begin(), rest.end());

  RatingsTable remaining;
  remaining.index = index;
  remaining.records = std::move(rest);
  split.train_bins = bin_by_time(remaining, binned.d());

  const std::size_t n_last = split.train_bins.bins.back().size();
  if (n_last < folds) throw InvalidInput("make_split: last bin has fewer ratings than folds");

  std::vector<std::size_t> perm(n_last);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n_last; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  split.validation.resize(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t begin = f * n_last / folds;
    const std::size_t end = (f + 1) * n_last / folds;
    split.validation[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                               perm.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(split.validation[f].begin(), split.validation[f].end());
  }
  return split;
}

LowemsProblem ratings_problem(const BinnedRatings& bins, const WeightVector& w, const RatingsSolverConfig& cfg) {
  require(w.size() == bins.d(), "ratings_problem: one weight per bin required");
  auto obs = std::make_shared<ObservationSet>();
  std::vector<double> kept_weights;
  for (std::size_t t = 0; t < bins.d(); ++t) {
    const RatingsTable& bin = bins.bins[t];
    if (bin.empty()) continue;
    std::vector<EntryIndex> indices;
    Vector y(static_cast<Eigen::Index>(bin.size()));
    indices.reserve(bin.size());
    for (std::size_t i = 0; i < bin.size(); ++i) {
      indices.push_back({bin.row_of(bin.records[i]), bin.col_of(bin.records[i])});
      y(static_cast<Eigen::Index>(i)) = bin.records[i].rating;
    }
    obs->ops.push_back(LinearOperator::sampling(bin.n_items(), bin.n_users(), std::move(indices)));
    obs->y.push_back(std::move(y));
    kept_weights.push_back(w[t]);
  }
  if (obs->ops.empty()) throw InvalidInput("ratings_problem: every bin is empty");

  LowemsProblem p;
  p.obs = obs;
  p.w = explicit_weights(std::move(kept_weights));
  p.w.kappa = w.kappa;
  p.r = std::min<Eigen::Index>(cfg.rank, std::min(obs->rows(), obs->cols()));
  p.gamma = cfg.gamma;
  return p;
}

double rmse(const std::vector<double>& predictions, const std::vector<double>& truth) {
  require(predictions.size() == truth.size(), "rmse: length mismatch");
  require(!truth.empty(), "rmse: no values");
  double ss = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) ss += (predictions[i] - truth[i]) * (predictions[i] - truth[i]);
  return std::sqrt(ss / static_cast<double>(truth.size()));
}

PredictionScore fit_and_score(const BinnedRatings& train, const RatingsTable& target, const WeightVector& w,
                              const RatingsSolverConfig& cfg, RandomStream init_rng) {
  const LowemsProblem problem = ratings_problem(train, w, cfg);
  SolveOptions opts;
  opts.max_sweeps = cfg.max_sweeps;
  opts.tol = cfg.tol;
  opts.init = cfg.init;
  opts.rng = init_rng;
  const Solution sol = solve(problem, opts);

  // Rows/columns that carry weighted training data; others have no factor.
  std::vector<bool> seen_row(static_cast<std::size_t>(problem.rows()), false);
  std::vector<bool> seen_col(static_cast<std::size_t>(problem.cols()), false);
  for (std::size_t t = 0; t < problem.obs->d(); ++t) {
    if (problem.w[t] == 0) continue;
    for (const EntryIndex& e : problem.obs->ops[t].indices()) {
      seen_row[static_cast<std::size_t>(e.row)] = true;
      seen_col[static_cast<std::size_t>(e.col)] = true;
    }
  }

  std::vector<double> predictions;
  std::vector<double> truth;
  PredictionScore score;
  for (const Rating& r : target.records) {
    const auto item = target.index->item_row.find(r.item_id);
    const auto user = target.index->user_col.find(r.user_id);
    if (item == target.index->item_row.end() || user == target.index->user_col.end() ||
        item->second >= problem.rows() || user->second >= problem.cols() ||
        !seen_row[static_cast<std::size_t>(item->second)] || !seen_col[static_cast<std::size_t>(user->second)]) {
      ++score.excluded;
      continue;
    }
    predictions.push_back(sol.X_hat(item->second, user->second));
    truth.push_back(r.rating);
  }
  score.scored = truth.size();
  if (!truth.empty()) score.rmse = rmse(predictions, truth);
  return score;
}

CrossValidation cross_validate_kappa(const EvalSplit& split, const std::vector<double>& kappa_grid,
                                     const RatingsSolverConfig& cfg) {
  require(!kappa_grid.empty(), "cross_validate_kappa: kappa grid must be nonempty");
  for (double k : kappa_grid) require(k >= 0, "cross_validate_kappa: kappa values must be nonnegative");
  const std::size_t d = split.train_bins.d();
  const std::size_t folds = split.folds();

  std::vector<BinnedRatings> trains;
  std::vector<RatingsTable> validations;
  for (std::size_t f = 0; f < folds; ++f) {
    trains.push_back(split.fold_train(f));
    validations.push_back(split.fold_validation(f));
  }

  struct Cell {
    bool ok = false;
    double rmse = 0;
    std::string warning;
  };
  std::vector<Cell> cells(kappa_grid.size() * folds);
  parallel_for(cells.size(), cfg.threads, [&](std::size_t c) {
    const std::size_t g = c / folds;
    const std::size_t f = c % folds;
    // Common initialization across kappa for a given fold.
    const RandomStream init_rng(cfg.seed, hash_ids({2, f}));
    try {
      const PredictionScore s = fit_and_score(trains[f], validations[f], optimal_weights(d, kappa_grid[g]), cfg, init_rng);
      if (s.scored == 0) {
        cells[c].warning = "kappa " + format_double(kappa_grid[g]) + " fold " + std::to_string(f) + ": nothing scored";
        return;
      }
      cells[c].ok = true;
      cells[c].rmse = s.rmse;
    } catch (const Error& e) {
      cells[c].warning = "kappa " + format_double(kappa_grid[g]) + " fold " + std::to_string(f) + ": " + e.what();
    }
  });

  CrossValidation cv;
  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < kappa_grid.size(); ++g) {
    KappaRow row;
    row.kappa = kappa_grid[g];
    double sum = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      const Cell& cell = cells[g * folds + f];
      if (!cell.warning.empty()) cv.warnings.push_back(cell.warning);
      if (!cell.ok) continue;
      ++row.folds_ok;
      sum += cell.rmse;
    }
    if (row.folds_ok == 0) continue;
    row.mean_val_rmse = sum / row.folds_ok;
    double ss = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      const Cell& cell = cells[g * folds + f];
      if (cell.ok) ss += (cell.rmse - row.mean_val_rmse) * (cell.rmse - row.mean_val_rmse);
    }
    row.stddev = row.folds_ok > 1 ? std::sqrt(ss / (row.folds_ok - 1)) : 0.0;
    cv.table.push_back(row);
    const KappaRow& candidate = cv.table.back();
    if (!best || candidate.mean_val_rmse < cv.table[*best].mean_val_rmse ||
        (candidate.mean_val_rmse == cv.table[*best].mean_val_rmse && candidate.kappa < cv.table[*best].kappa)) {
      best = cv.table.size() - 1;
    }
  }
  if (!best) throw Error("cross_validate_kappa: every fold failed for every kappa");
  cv.best_kappa = cv.table[*best].kappa;
  return cv;
}

TestEvaluation evaluate_test(const EvalSplit& split, double kappa, const RatingsSolverConfig& cfg, int restarts) {
  require(kappa >= 0, "evaluate_test: kappa must be nonnegative");
  require(restarts >= 1, "evaluate_test: restarts must be positive");
  const WeightVector w = optimal_weights(split.train_bins.d(), kappa);
  TestEvaluation eval;
  eval.rmse.resize(static_cast<std::size_t>(restarts));
  std::vector<std::size_t> excluded(eval.rmse.size());
  parallel_for(eval.rmse.size(), cfg.threads, [&](std::size_t k) {
    const RandomStream init_rng(cfg.seed, hash_ids({3, k}));
    const PredictionScore s = fit_and_score(split.train_bins, split.test, w, cfg, init_rng);
    eval.rmse[k] = s.rmse;
    excluded[k] = s.excluded;
  });
  eval.excluded = excluded.front();
  return eval;
}

std::vector<double> default_kappa_grid() { return {0.0, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}; }

PlantedRatings generate_planted_ratings(const PlantedRatingsConfig& cfg, RandomStream& rng) {
  require(cfg.ratings_per_bin >= 1, "planted ratings: ratings_per_bin must be positive");
  require(cfg.test_frac >= 0 && cfg.test_frac < 1, "planted ratings: test_frac must lie in [0, 1)");
  require(cfg.period_seconds >= 2, "planted ratings: period too short");
  require(cfg.sigma1 >= 0 && cfg.sigma2 >= 0, "planted ratings: noise levels must be nonnegative");

  RandomStream truth_rng = rng.derive(1);
  RandomStream sample_rng = rng.derive(2);
  auto truth = std::make_shared<const DynamicGroundTruth>(
      generate_truth(cfg.n_items, cfg.n_users, cfg.r, cfg.d, cfg.sigma2, truth_rng));

  std::vector<Rating> records;
  const std::size_t n_train = cfg.ratings_per_bin * cfg.d;
  const auto n_test =
      static_cast<std::size_t>(std::llround(cfg.test_frac / (1.0 - cfg.test_frac) * static_cast<double>(n_train)));
  records.reserve(n_train + n_test);

  auto draw = [&](const Matrix& X, std::int64_t start, std::int64_t length) {
    Rating r;
    const auto item = static_cast<Eigen::Index>(sample_rng.uniform_index(static_cast<std::uint64_t>(cfg.n_items)));
    const auto user = static_cast<Eigen::Index>(sample_rng.uniform_index(static_cast<std::uint64_t>(cfg.n_users)));
    r.item_id = item;
    r.user_id = user;
    r.timestamp = start + static_cast<std::int64_t>(sample_rng.uniform_index(static_cast<std::uint64_t>(length)));
    r.rating = X(item, user) + cfg.sigma1 * sample_rng.gaussian();
    return r;
  };

  const std::int64_t period = cfg.period_seconds;
  for (std::size_t t = 0; t < cfg.d; ++t) {
    const std::int64_t start = static_cast<std::int64_t>(t) * period;
    for (std::size_t i = 0; i < cfg.ratings_per_bin; ++i) {
      Rating r = draw(truth->X_seq[t], start, period);
      // Pin the first and last training ratings to the period edges so
      // equal-width re-binning of the training span matches the periods.
      if (t == 0 && i == 0) r.timestamp = 0;
      if (t + 1 == cfg.d && i == 0) r.timestamp = static_cast<std::int64_t>(cfg.d) * period - 1;
      records.push_back(r);
    }
  }
  const std::int64_t test_start = static_cast<std::int64_t>(cfg.d) * period;
  for (std::size_t i = 0; i < n_test; ++i) records.push_back(draw(truth->last(), test_start, period));

  // Drop accidental (user, item, timestamp) collisions the same way ingest would.
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::size_t> last_seen;
  for (std::size_t i = 0; i < records.size(); ++i)
    last_seen[{records[i].user_id, records[i].item_id, records[i].timestamp}] = i;
  std::vector<Rating> kept;
  kept.reserve(last_seen.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    if (last_seen.at({records[i].user_id, records[i].item_id, records[i].timestamp}) == i) kept.push_back(records[i]);

  PlantedRatings out;
  out.table = RatingsTable::from_records(std::move(kept));
  out.truth = std::move(truth);
  return out;
}

}  // namespace lowems

#include "lowems/cli.hpp"

#include "lowems/bundle.hpp"
#include "lowems/dynmodel.hpp"
#include "lowems/ratings.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace lowems::cli {

using nlohmann::json;

namespace {

template <typename T>
T get_key(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path + ": cannot open config file");
  try {
    json j;
    in >> j;
    if (!j.is_object()) throw UsageError(path + ": config must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot open for writing");
  return out;
}

void log_config(const std::string& command, const json& resolved) {
  std::cerr << "# " << command << " resolved config: " << resolved.dump() << '\n';
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("cannot parse number '" + item + "'");
    }
  }
  if (values.empty()) throw UsageError("empty number list");
  return values;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  Eigen::Index n1 = 100, n2 = 50, r = 5;
  std::size_t d = 4;
  double sigma2 = 0.0;
  double sigma1 = 0.05;
  Eigen::Index m0 = 0;
  std::string variant = "sampling";
  std::uint64_t seed = 0;
  std::string out;
  std::string bundle;
};

void run_generate(const GenerateArgs& a) {
  json resolved = {{"n1", a.n1}, {"n2", a.n2}, {"r", a.r}, {"d", a.d}, {"sigma2", a.sigma2}, {"seed", a.seed},
                   {"out", a.out}, {"bundle", a.bundle}, {"sigma1", a.sigma1}, {"m0", a.m0}, {"variant", a.variant}};
  log_config("generate", resolved);
  RandomStream root(a.seed, 0);
  RandomStream truth_rng = root.derive(1);
  auto truth = std::make_shared<const DynamicGroundTruth>(generate_truth(a.n1, a.n2, a.r, a.d, a.sigma2, truth_rng));
  if (!a.out.empty()) {
    auto out = open_output(a.out);
    out << "t,row,col,value\n";
    for (std::size_t t = 0; t < truth->d(); ++t) {
      const Matrix& X = truth->X_seq[t];
      for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j) out << t << ',' << i << ',' << j << ',' << format_double(X(i, j)) << '\n';
    }
  }
  if (!a.bundle.empty()) {
    if (a.m0 < 1) throw UsageError("--bundle requires --m0 >= 1");
    const OperatorKind kind = parse_operator_kind(a.variant);
    RandomStream op_rng = root.derive(2);
    RandomStream noise_rng = root.derive(3);
    std::vector<LinearOperator> ops;
    for (std::size_t t = 0; t < a.d; ++t) {
      ops.push_back(kind == OperatorKind::Gaussian
                        ? LinearOperator::gaussian(a.n1, a.n2, a.m0, op_rng, GaussianStorage::Replay)
                        : LinearOperator::random_sampling(a.n1, a.n2, a.m0, op_rng));
    }
    save_bundle(a.bundle, observe(std::move(ops), truth, a.sigma1, noise_rng));
  }
}

// ------------------------------------------------------------------- solve

struct SolveArgs {
  std::string bundle;
  Eigen::Index rank = 1;
  std::string weights = "optimal";
  double kappa = 0.0;
  double gamma = 0.0;
  int max_sweeps = 500;
  double tol = 1e-8;
  std::string init = "spectral";
  std::optional<std::uint64_t> seed;
  std::optional<double> spikiness;
  std::string out;
  std::string trace;
};

void run_solve(const SolveArgs& a) {
  const InitMode init = parse_init_mode(a.init);
  if (init == InitMode::Random && !a.seed) throw UsageError("--init random requires --seed");
  json resolved = {{"bundle", a.bundle}, {"rank", a.rank},     {"weights", a.weights},       {"kappa", a.kappa},
                   {"gamma", a.gamma},   {"max_sweeps", a.max_sweeps}, {"tol", a.tol}, {"init", a.init},
                   {"out", a.out},       {"trace", a.trace}};
  resolved["seed"] = a.seed ? json(*a.seed) : json(nullptr);
  resolved["spikiness"] = a.spikiness ? json(*a.spikiness) : json(nullptr);
  log_config("solve", resolved);

  auto obs = std::make_shared<const ObservationSet>(load_bundle(a.bundle));
  LowemsProblem p;
  p.obs = obs;
  p.w = weights_from_spec(a.weights, obs->d(), a.kappa);
  p.r = a.rank;
  p.gamma = a.gamma;
  p.spikiness = a.spikiness;

  SolveOptions opts;
  opts.max_sweeps = a.max_sweeps;
  opts.tol = a.tol;
  opts.init = init;
  opts.rng = RandomStream(a.seed.value_or(0), 0);
  const Solution sol = solve(p, opts);

  {
    auto out = open_output(a.out);
    write_matrix_csv(out, sol.X_hat);
  }
  if (!a.trace.empty()) {
    auto out = open_output(a.trace);
    write_trace_csv(out, sol.objective_trace);
  }
  json summary = {{"iterations", sol.iterations},
                  {"converged", sol.converged},
                  {"clip_applied", sol.clip_applied},
                  {"final_objective", sol.objective_trace.back()}};
  if (obs->truth) {
    summary["relative_error"] = relative_error(sol.X_hat, obs->truth->last());
    const BasicInequalityReport report = check_basic_inequality(sol, obs->truth.get(), p);
    summary["basic_inequality"] = {{"lhs", report.lhs},
                                   {"rhs", report.rhs},
                                   {"premise_holds", report.premise_holds},
                                   {"inequality_holds", report.inequality_holds}};
  }
  std::cout << summary.dump() << '\n';
}

// ------------------------------------------------------------------ sweeps

struct SweepArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::optional<int> threads;
  std::optional<int> trials;
  std::string diagnostics;
};

SweepConfig resolve_sweep(const SweepArgs& a, bool samples) {
  json j = read_json_file(a.config);
  // Flags override file values.
  j["seed"] = a.seed;
  if (a.threads) j["threads"] = *a.threads;
  if (a.trials) j["trials"] = *a.trials;
  SweepConfig cfg = sweep_config_from_json(j);
  if (samples && cfg.p_grid.empty()) cfg.p_grid = default_p_grid();
  try {
    cfg.validate(samples);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void run_sweep_error(const SweepArgs& a) {
  const SweepConfig cfg = resolve_sweep(a, false);
  log_config("sweep-error", sweep_config_to_json(cfg));
  const SweepResult result = run_error_sweep(cfg);
  {
    auto out = open_output(a.out);
    write_error_csv(out, result);
  }
  if (!a.diagnostics.empty()) {
    auto out = open_output(a.diagnostics);
    write_diagnostics_csv(out, theorem_diagnostics(cfg, result));
  }
  for (const ErrorRow& row : result.error_rows)
    if (row.failed > 0) std::cerr << "warning: sigma2=" << row.sigma2 << " " << row.strategy << ": " << row.failed << " failed trials\n";
}

void run_sweep_samples(const SweepArgs& a) {
  const SweepConfig cfg = resolve_sweep(a, true);
  log_config("sweep-samples", sweep_config_to_json(cfg));
  const SweepResult result = run_sample_sweep(cfg);
  {
    auto out = open_output(a.out);
    write_sample_csv(out, result);
  }
  if (!a.diagnostics.empty()) {
    auto out = open_output(a.diagnostics);
    write_diagnostics_csv(out, theorem_diagnostics(cfg, result));
  }
}

// --------------------------------------------------------------- rip-probe

struct RipArgs {
  Eigen::Index n1 = 30, n2 = 30, rank = 2, m0 = 600;
  std::size_t d = 2;
  int trials = 100;
  std::string weights = "equal";
  double kappa = 0.0;
  std::string variant = "gaussian";
  std::uint64_t seed = 0;
  int repeats = 1;
  std::string out;
};

void run_rip(const RipArgs& a) {
  json resolved = {{"n1", a.n1}, {"n2", a.n2}, {"rank", a.rank}, {"m0", a.m0}, {"d", a.d}, {"trials", a.trials},
                   {"weights", a.weights}, {"kappa", a.kappa}, {"variant", a.variant}, {"seed", a.seed},
                   {"repeats", a.repeats}, {"out", a.out}};
  log_config("rip-probe", resolved);
  const OperatorKind kind = parse_operator_kind(a.variant);
  const WeightVector w = weights_from_spec(a.weights, a.d, a.kappa);
  std::ostringstream csv;
  csv << "repeat,estimate\n";
  for (int k = 0; k < a.repeats; ++k) {
    RandomStream rng(a.seed, static_cast<std::uint64_t>(k));
    RandomStream op_rng = rng.derive(1);
    RandomStream probe_rng = rng.derive(2);
    std::vector<LinearOperator> ops;
    for (std::size_t t = 0; t < a.d; ++t) ops.push_back(make_operator(kind, a.n1, a.n2, a.m0, op_rng));
    csv << k << ',' << format_double(estimate_rip(ops, w, a.rank, a.trials, probe_rng)) << '\n';
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    auto out = open_output(a.out);
    out << csv.str();
  }
}

// ----------------------------------------------------------------- ratings

struct RatingsArgs {
  std::string input;
  std::size_t min_user = 0;
  std::size_t min_item = 0;
  std::size_t d = 3;
  Eigen::Index rank = 10;
  double gamma = 1.0;
  std::string kappa_grid;
  double kappa = 1.0;
  std::optional<std::uint64_t> seed;
  double test_frac = 0.10;
  std::size_t folds = 5;
  int restarts = 10;
  int max_sweeps = 500;
  double tol = 1e-8;
  int threads = 1;
  std::string out;
};

json ratings_json(const RatingsArgs& a) {
  return {{"input", a.input}, {"min_user", a.min_user}, {"min_item", a.min_item}, {"d", a.d}, {"rank", a.rank},
          {"gamma", a.gamma}, {"kappa_grid", a.kappa_grid}, {"kappa", a.kappa}, {"seed", a.seed.value_or(0)},
          {"test_frac", a.test_frac}, {"folds", a.folds}, {"restarts", a.restarts}, {"max_sweeps", a.max_sweeps},
          {"tol", a.tol}, {"threads", a.threads}, {"out", a.out}};
}

RatingsTable load_ratings(const RatingsArgs& a) {
  RatingsTable table = ingest(a.input);
  if (a.min_user > 0 || a.min_item > 0) table = truncate(table, a.min_user, a.min_item);
  return table;
}

RatingsSolverConfig solver_config(const RatingsArgs& a) {
  RatingsSolverConfig cfg;
  cfg.rank = a.rank;
  cfg.gamma = a.gamma;
  cfg.max_sweeps = a.max_sweeps;
  cfg.tol = a.tol;
  cfg.seed = *a.seed;
  cfg.threads = a.threads;
  return cfg;
}

EvalSplit split_ratings(const RatingsArgs& a, const RatingsTable& table) {
  const BinnedRatings binned = bin_by_time(table, a.d);
  RandomStream split_rng(*a.seed, hash_ids({4}));
  return make_split(binned, a.test_frac, a.folds, split_rng);
}

void run_ratings_ingest(const RatingsArgs& a) {
  log_config("ratings ingest", ratings_json(a));
  const RatingsTable table = load_ratings(a);
  json summary = {{"ratings", table.size()}, {"items", table.n_items()}, {"users", table.n_users()}};
  const double cells = static_cast<double>(table.n_items()) * static_cast<double>(table.n_users());
  summary["density"] = cells > 0 ? static_cast<double>(table.size()) / cells : 0.0;
  std::cout << summary.dump() << '\n';
  if (!a.out.empty()) {
    auto out = open_output(a.out);
    write_ratings_csv(out, table);
  }
}

void run_ratings_cv(const RatingsArgs& a) {
  if (!a.seed) throw UsageError("ratings cv requires --seed");
  log_config("ratings cv", ratings_json(a));
  const RatingsTable table = load_ratings(a);
  const EvalSplit split = split_ratings(a, table);
  const std::vector<double> grid = a.kappa_grid.empty() ? default_kappa_grid() : parse_double_list(a.kappa_grid);
  const CrossValidation cv = cross_validate_kappa(split, grid, solver_config(a));
  for (const auto& w : cv.warnings) std::cerr << "warning: " << w << '\n';
  auto out = open_output(a.out);
  out << "kappa,mean_val_rmse,std\n";
  for (const KappaRow& row : cv.table)
    out << format_double(row.kappa) << ',' << format_double(row.mean_val_rmse) << ',' << format_double(row.stddev) << '\n';
  std::cerr << "# best kappa: " << format_double(cv.best_kappa) << '\n';
}

void run_ratings_eval(const RatingsArgs& a) {
  if (!a.seed) throw UsageError("ratings eval requires --seed");
  log_config("ratings eval", ratings_json(a));
  const RatingsTable table = load_ratings(a);
  const EvalSplit split = split_ratings(a, table);
  const TestEvaluation eval = evaluate_test(split, a.kappa, solver_config(a), a.restarts);
  if (eval.excluded > 0) std::cerr << "# excluded test ratings (unseen user or item): " << eval.excluded << '\n';
  auto out = open_output(a.out);
  out << "restart,test_rmse\n";
  for (std::size_t k = 0; k < eval.rmse.size(); ++k) out << k << ',' << format_double(eval.rmse[k]) << '\n';
}

}  // namespace

SweepConfig sweep_config_from_json(const json& j) {
  static const std::set<std::string> known{"n1",     "n2",         "r",     "d",          "m0",   "p_grid",
                                           "sigma1", "sigma2_grid", "strategies", "trials", "seed", "variant",
                                           "gamma",  "max_sweeps", "tol",   "init",       "success_threshold",
                                           "threads"};
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw UsageError("unknown config key '" + key + "'");
  }
  SweepConfig cfg;
  if (j.contains("n1")) cfg.n1 = get_key<Eigen::Index>(j, "n1");
  if (j.contains("n2")) cfg.n2 = get_key<Eigen::Index>(j, "n2");
  if (j.contains("r")) cfg.r = get_key<Eigen::Index>(j, "r");
  if (j.contains("d")) cfg.d = get_key<std::size_t>(j, "d");
  if (j.contains("m0")) cfg.m0 = get_key<Eigen::Index>(j, "m0");
  if (j.contains("p_grid")) cfg.p_grid = get_key<std::vector<double>>(j, "p_grid");
  if (j.contains("sigma1")) cfg.sigma1 = get_key<double>(j, "sigma1");
  if (j.contains("sigma2_grid")) cfg.sigma2_grid = get_key<std::vector<double>>(j, "sigma2_grid");
  if (j.contains("strategies")) cfg.strategies = get_key<std::vector<std::string>>(j, "strategies");
  if (j.contains("trials")) cfg.trials = get_key<int>(j, "trials");
  if (j.contains("seed")) cfg.seed = get_key<std::uint64_t>(j, "seed");
  if (j.contains("gamma")) cfg.gamma = get_key<double>(j, "gamma");
  if (j.contains("max_sweeps")) cfg.max_sweeps = get_key<int>(j, "max_sweeps");
  if (j.contains("tol")) cfg.tol = get_key<double>(j, "tol");
  if (j.contains("success_threshold")) cfg.success_threshold = get_key<double>(j, "success_threshold");
  if (j.contains("threads")) cfg.threads = get_key<int>(j, "threads");
  try {
    if (j.contains("variant")) cfg.variant = parse_operator_kind(get_key<std::string>(j, "variant"));
    if (j.contains("init")) cfg.init = parse_init_mode(get_key<std::string>(j, "init"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

json sweep_config_to_json(const SweepConfig& cfg) {
  return {{"n1", cfg.n1},
          {"n2", cfg.n2},
          {"r", cfg.r},
          {"d", cfg.d},
          {"m0", cfg.m0},
          {"p_grid", cfg.p_grid},
          {"sigma1", cfg.sigma1},
          {"sigma2_grid", cfg.sigma2_grid},
          {"strategies", cfg.strategies},
          {"trials", cfg.trials},
          {"seed", cfg.seed},
          {"variant", to_string(cfg.variant)},
          {"gamma", cfg.gamma},
          {"max_sweeps", cfg.max_sweeps},
          {"tol", cfg.tol},
          {"init", cfg.init == InitMode::Spectral ? "spectral" : "random"},
          {"success_threshold", cfg.success_threshold},
          {"threads", cfg.threads}};
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Locally weighted matrix smoothing: simulation, solving, and ratings experiments", "lowems"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate planted dynamic low-rank matrices (and optionally observations)");
  generate->add_option("--n1", gen.n1, "Rows")->capture_default_str();
  generate->add_option("--n2", gen.n2, "Columns")->capture_default_str();
  generate->add_option("--r", gen.r, "Rank")->capture_default_str();
  generate->add_option("--d", gen.d, "Time bins")->capture_default_str();
  generate->add_option("--sigma2", gen.sigma2, "Drift std. dev. of V")->capture_default_str();
  generate->add_option("--sigma1", gen.sigma1, "Measurement noise std. dev. (bundle only)")->capture_default_str();
  generate->add_option("--m0", gen.m0, "Measurements per bin (bundle only)");
  generate->add_option("--variant", gen.variant, "sampling | gaussian (bundle only)")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Master seed")->required();
  generate->add_option("--out", gen.out, "CSV dump of X^t as t,row,col,value");
  generate->add_option("--bundle", gen.bundle, "Write an observation bundle (JSON)");

  SolveArgs sol;
  auto* solve_cmd = app.add_subcommand("solve", "Fit LOWEMS to an observation bundle");
  solve_cmd->add_option("--bundle", sol.bundle, "Observation bundle (JSON)")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--rank", sol.rank, "Target rank")->required();
  solve_cmd->add_option("--weights", sol.weights, "last | equal | optimal | explicit:w1,...,wd")->capture_default_str();
  solve_cmd->add_option("--kappa", sol.kappa, "Noise ratio sigma2^2/sigma1^2 for optimal weights")->capture_default_str();
  solve_cmd->add_option("--gamma", sol.gamma, "Ridge coefficient")->capture_default_str();
  solve_cmd->add_option("--max-sweeps", sol.max_sweeps, "Maximum ALS sweeps")->capture_default_str();
  solve_cmd->add_option("--tol", sol.tol, "Relative objective decrease tolerance")->capture_default_str();
  solve_cmd->add_option("--init", sol.init, "spectral | random")->capture_default_str();
  solve_cmd->add_option("--seed", sol.seed, "Seed (required for random init)");
  solve_cmd->add_option("--spikiness", sol.spikiness, "Clip entries of the estimate to [-a, a]");
  solve_cmd->add_option("--out", sol.out, "Estimate CSV")->required();
  solve_cmd->add_option("--trace", sol.trace, "Objective trace CSV");

  SweepArgs err_args;
  auto* sweep_error = app.add_subcommand("sweep-error", "Recovery error vs drift level");
  SweepArgs smp_args;
  auto* sweep_samples = app.add_subcommand("sweep-samples", "Minimal sampling fraction vs drift level");
  for (auto [cmd, a] : {std::pair{sweep_error, &err_args}, std::pair{sweep_samples, &smp_args}}) {
    cmd->add_option("--config", a->config, "JSON config (flat keys)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", a->out, "Result CSV")->required();
    cmd->add_option("--seed", a->seed, "Master seed")->required();
    cmd->add_option("--threads", a->threads, "Worker threads");
    cmd->add_option("--trials", a->trials, "Trials per cell (overrides config)");
    cmd->add_option("--diagnostics", a->diagnostics, "Bound-shape diagnostics CSV");
  }

  RipArgs rip;
  auto* rip_cmd = app.add_subcommand("rip-probe", "Empirical isometry constant of a composite operator");
  rip_cmd->add_option("--n1", rip.n1)->capture_default_str();
  rip_cmd->add_option("--n2", rip.n2)->capture_default_str();
  rip_cmd->add_option("--rank", rip.rank)->capture_default_str();
  rip_cmd->add_option("--m0", rip.m0)->capture_default_str();
  rip_cmd->add_option("--d", rip.d)->capture_default_str();
  rip_cmd->add_option("--trials", rip.trials)->capture_default_str();
  rip_cmd->add_option("--weights", rip.weights)->capture_default_str();
  rip_cmd->add_option("--kappa", rip.kappa)->capture_default_str();
  rip_cmd->add_option("--variant", rip.variant)->capture_default_str();
  rip_cmd->add_option("--repeats", rip.repeats, "Independent operator draws")->capture_default_str();
  rip_cmd->add_option("--seed", rip.seed)->required();
  rip_cmd->add_option("--out", rip.out, "CSV output (default stdout)");

  RatingsArgs rat;
  auto* ratings = app.add_subcommand("ratings", "Timestamped ratings pipeline");
  ratings->require_subcommand(1);
  auto* ingest_cmd = ratings->add_subcommand("ingest", "Parse, deduplicate and optionally truncate a ratings CSV");
  auto* cv_cmd = ratings->add_subcommand("cv", "Cross-validate kappa");
  auto* eval_cmd = ratings->add_subcommand("eval", "Test RMSE over random restarts");
  for (auto* cmd : {ingest_cmd, cv_cmd, eval_cmd}) {
    cmd->add_option("--input", rat.input, "Ratings CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--min-user-ratings", rat.min_user)->capture_default_str();
    cmd->add_option("--min-item-ratings", rat.min_item)->capture_default_str();
    cmd->add_option("--out", rat.out, "Output CSV")->required(cmd != ingest_cmd);
  }
  for (auto* cmd : {cv_cmd, eval_cmd}) {
    cmd->add_option("--d", rat.d, "Time bins")->capture_default_str();
    cmd->add_option("--rank", rat.rank)->capture_default_str();
    cmd->add_option("--gamma", rat.gamma)->capture_default_str();
    cmd->add_option("--seed", rat.seed)->required();
    cmd->add_option("--test-frac", rat.test_frac)->capture_default_str();
    cmd->add_option("--folds", rat.folds)->capture_default_str();
    cmd->add_option("--max-sweeps", rat.max_sweeps)->capture_default_str();
    cmd->add_option("--tol", rat.tol)->capture_default_str();
    cmd->add_option("--threads", rat.threads)->capture_default_str();
  }
  cv_cmd->add_option("--kappa-grid", rat.kappa_grid, "Comma-separated kappa values");
  eval_cmd->add_option("--kappa", rat.kappa)->capture_default_str();
  eval_cmd->add_option("--restarts", rat.restarts)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (generate->parsed()) run_generate(gen);
    else if (solve_cmd->parsed()) run_solve(sol);
    else if (sweep_error->parsed()) run_sweep_error(err_args);
    else if (sweep_samples->parsed()) run_sweep_samples(smp_args);
    else if (rip_cmd->parsed()) run_rip(rip);
    else if (ingest_cmd->parsed()) run_ratings_ingest(rat);
    else if (cv_cmd->parsed()) run_ratings_cv(rat);
    else if (eval_cmd->parsed()) run_ratings_eval(rat);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n' << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace lowems::cli

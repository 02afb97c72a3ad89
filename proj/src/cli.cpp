#include "fairreg/cli.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fairreg/error.hpp"
#include "fairreg/rng.hpp"

namespace fairreg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename T>
T get_as(const json& doc, const std::string& key, const char* expected) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(fmt::format("config key '{}' must be {}", key, expected));
  }
}

std::vector<double> parse_grid(const json& value, const std::string& key) {
  if (value.is_array()) {
    std::vector<double> out;
    for (const auto& v : value) {
      if (!v.is_number()) throw ValidationError(fmt::format("config key '{}' must list numbers", key));
      out.push_back(v.get<double>());
    }
    return out;
  }
  if (!value.is_object())
    throw ValidationError(fmt::format("config key '{}' must be a list or {{min, max, count}}", key));
  for (const auto& [k, v] : value.items())
    if (k != "min" && k != "max" && k != "count" && k != "include_zero")
      throw ValidationError(fmt::format("unknown key '{}' in grid '{}'", k, key));
  const double lo = get_as<double>(value, "min", "a number");
  const double hi = get_as<double>(value, "max", "a number");
  const auto count = get_as<std::size_t>(value, "count", "a non-negative integer");
  std::vector<double> out;
  if (value.contains("include_zero") && get_as<bool>(value, "include_zero", "a boolean")) out.push_back(0.0);
  for (double v : log_spaced(lo, hi, count)) out.push_back(v);
  return out;
}

std::vector<PenaltyKind> parse_penalties(const std::string& text) {
  if (text == "all") return {};
  return {parse_penalty(text)};
}

std::vector<ModelMode> parse_modes(const std::string& text) {
  if (text == "both") return {ModelMode::SingleModel, ModelMode::SeparateModels};
  return {parse_mode(text)};
}

template <typename T, typename Parse>
std::vector<T> parse_choice_list(const json& value, const std::string& key, Parse parse_one) {
  if (value.is_string()) return parse_one(value.get<std::string>());
  if (!value.is_array()) throw ValidationError(fmt::format("config key '{}' must be a string or a list", key));
  std::vector<T> out;
  for (const auto& v : value) {
    if (!v.is_string()) throw ValidationError(fmt::format("config key '{}' must list strings", key));
    for (T item : parse_one(v.get<std::string>()))
      if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
  }
  return out;
}

std::string resolve_path(const std::string& path, const fs::path& base_dir) {
  if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
  return (base_dir / path).lexically_normal().string();
}

void check_grid_values(const std::vector<double>& values, const char* name) {
  for (double v : values)
    if (!std::isfinite(v)) throw ValidationError(fmt::format("{} grid contains a non-finite value", name));
}

}  // namespace

RunConfig parse_run_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> known{
      "dataset", "schema",  "penalty", "mode",     "weight",  "weight_constant",    "lambdas",
      "gammas",  "alphas",  "lambda",  "gamma",    "folds",   "pairs",              "seed",
      "out",     "jobs",    "repeats", "normalize", "tolerance", "subsample_fraction", "hybrid_weights",
      "max_iterations"};
  for (const auto& [key, value] : doc.items())
    if (!known.contains(key)) throw ValidationError(fmt::format("unknown config key '{}'", key));

  RunConfig cfg;
  if (doc.contains("dataset")) cfg.dataset = resolve_path(get_as<std::string>(doc, "dataset", "a path"), base_dir);
  if (doc.contains("schema")) cfg.schema = resolve_path(get_as<std::string>(doc, "schema", "a path"), base_dir);
  if (doc.contains("penalty"))
    cfg.penalties = parse_choice_list<PenaltyKind>(doc.at("penalty"), "penalty", parse_penalties);
  if (doc.contains("mode")) cfg.modes = parse_choice_list<ModelMode>(doc.at("mode"), "mode", parse_modes);
  if (doc.contains("weight")) cfg.weight = parse_weight_kind(get_as<std::string>(doc, "weight", "a string"));
  if (doc.contains("weight_constant")) cfg.weight_constant = get_as<double>(doc, "weight_constant", "a number");
  if (doc.contains("lambdas")) cfg.lambdas = parse_grid(doc.at("lambdas"), "lambdas");
  if (doc.contains("gammas")) cfg.gammas = parse_grid(doc.at("gammas"), "gammas");
  if (doc.contains("alphas")) cfg.alphas = parse_grid(doc.at("alphas"), "alphas");
  if (doc.contains("lambda")) cfg.lambda = get_as<double>(doc, "lambda", "a number");
  if (doc.contains("gamma") && !doc.at("gamma").is_null()) cfg.gamma = get_as<double>(doc, "gamma", "a number");
  if (doc.contains("folds")) cfg.folds = get_as<std::size_t>(doc, "folds", "a positive integer");
  if (doc.contains("pairs") && !doc.at("pairs").is_null())
    cfg.pairs = get_as<std::size_t>(doc, "pairs", "a positive integer");
  if (doc.contains("seed")) cfg.seed = get_as<std::uint64_t>(doc, "seed", "a non-negative integer");
  if (doc.contains("out")) cfg.out = get_as<std::string>(doc, "out", "a path");
  if (doc.contains("jobs")) cfg.jobs = get_as<std::size_t>(doc, "jobs", "a positive integer");
  if (doc.contains("subsample_fraction") && !doc.at("subsample_fraction").is_null())
    cfg.subsample_fraction = get_as<double>(doc, "subsample_fraction", "a number");
  if (doc.contains("repeats")) cfg.repeats = get_as<std::size_t>(doc, "repeats", "a positive integer");
  if (doc.contains("normalize")) cfg.normalize = get_as<bool>(doc, "normalize", "a boolean");
  if (doc.contains("max_iterations")) cfg.max_iterations = get_as<int>(doc, "max_iterations", "an integer");
  if (doc.contains("tolerance")) cfg.tolerance = get_as<double>(doc, "tolerance", "a number");
  if (doc.contains("hybrid_weights")) {
    const json& hw = doc.at("hybrid_weights");
    if (!hw.is_object()) throw ValidationError("config key 'hybrid_weights' must be {positive, negative}");
    for (const auto& [k, v] : hw.items())
      if (k != "positive" && k != "negative") throw ValidationError(fmt::format("unknown key '{}' in hybrid_weights", k));
    if (hw.contains("positive")) cfg.hybrid.positive = get_as<double>(hw, "positive", "a number");
    if (hw.contains("negative")) cfg.hybrid.negative = get_as<double>(hw, "negative", "a number");
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open config file '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("config file '{}' is not valid JSON: {}", path.string(), e.what()));
  }
  return parse_run_config(doc, path.parent_path());
}

void RunConfig::validate() const {
  if (dataset.empty()) throw ValidationError("config needs a 'dataset' path");
  if (schema.empty()) throw ValidationError("config needs a 'schema' path");
  if (modes.empty()) throw ValidationError("config lists no model mode");
  if (folds < 2) throw ValidationError(fmt::format("folds must be at least 2, got {}", folds));
  if (pairs && *pairs == 0) throw ValidationError("pairs must be positive");
  if (jobs == 0) throw ValidationError("jobs must be positive");
  if (repeats == 0) throw ValidationError("repeats must be positive");
  if (subsample_fraction && (!(*subsample_fraction > 0.0) || *subsample_fraction > 1.0))
    throw ValidationError("subsample_fraction must lie in (0, 1]");
  if (!subsample_fraction && repeats != 1) throw ValidationError("repeats needs subsample_fraction");
  if (max_iterations < 1) throw ValidationError("max_iterations must be positive");
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be finite and >= 0");
  if (gamma && (!(*gamma >= 0.0) || !std::isfinite(*gamma))) throw ValidationError("gamma must be finite and >= 0");
  if (!(hybrid.positive >= 0.0) || !(hybrid.negative >= 0.0)) throw ValidationError("hybrid weights must be >= 0");
  check_grid_values(lambdas, "lambda");
  check_grid_values(alphas, "alpha");
  GammaGrid{gammas}.validate();
  if (lambdas.empty() || lambdas.front() != 0.0) throw ValidationError("lambda grid must start at 0");
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] > lambdas[i - 1])) throw ValidationError("lambda grid must be strictly ascending");
  if (alphas.empty()) throw ValidationError("alpha grid is empty");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] > 0.0) || alphas[i] > 1.0) throw ValidationError("alphas must lie in (0, 1]");
    if (i > 0 && !(alphas[i] < alphas[i - 1])) throw ValidationError("alpha grid must be strictly descending");
  }
  if (weight == DistanceWeight::Kind::Constant) DistanceWeight::constant(weight_constant);
}

DistanceWeight RunConfig::resolved_weight(Task task) const {
  const auto kind = weight.value_or(task == Task::Linear ? DistanceWeight::Kind::Gaussian
                                                         : DistanceWeight::Kind::Indicator);
  switch (kind) {
    case DistanceWeight::Kind::Gaussian: return DistanceWeight::gaussian();
    case DistanceWeight::Kind::Indicator: return DistanceWeight::indicator();
    case DistanceWeight::Kind::Constant: return DistanceWeight::constant(weight_constant);
  }
  return DistanceWeight::gaussian();
}

std::vector<PenaltyKind> RunConfig::resolved_penalties(Task task) const {
  if (!penalties.empty()) return penalties;
  if (task == Task::Logistic) return {PenaltyKind::Individual, PenaltyKind::Group, PenaltyKind::Hybrid};
  return {PenaltyKind::Individual, PenaltyKind::Group};
}

ExperimentOptions RunConfig::experiment_options(Task task) const {
  ExperimentOptions opt;
  opt.folds = folds;
  opt.seed = seed;
  opt.weight = resolved_weight(task);
  opt.pair_count = pairs;
  opt.hybrid = hybrid;
  opt.normalize = normalize;
  opt.jobs = jobs;
  opt.solver.max_iterations = max_iterations;
  opt.solver.tolerance = tolerance;
  return opt;
}

json to_json(const RunConfig& cfg) {
  json doc;
  doc["dataset"] = cfg.dataset;
  doc["schema"] = cfg.schema;
  json penalties = json::array();
  for (auto k : cfg.penalties) penalties.push_back(to_string(k));
  doc["penalty"] = cfg.penalties.empty() ? json("all") : penalties;
  json modes = json::array();
  for (auto m : cfg.modes) modes.push_back(to_string(m));
  doc["mode"] = modes;
  if (cfg.weight) doc["weight"] = to_string(*cfg.weight);
  doc["weight_constant"] = cfg.weight_constant;
  doc["lambdas"] = cfg.lambdas;
  doc["gammas"] = cfg.gammas;
  doc["alphas"] = cfg.alphas;
  doc["lambda"] = cfg.lambda;
  doc["gamma"] = cfg.gamma ? json(*cfg.gamma) : json(nullptr);
  doc["folds"] = cfg.folds;
  doc["pairs"] = cfg.pairs ? json(*cfg.pairs) : json(nullptr);
  doc["seed"] = cfg.seed;
  doc["subsample_fraction"] = cfg.subsample_fraction ? json(*cfg.subsample_fraction) : json(nullptr);
  doc["repeats"] = cfg.repeats;
  doc["hybrid_weights"] = {{"positive", cfg.hybrid.positive}, {"negative", cfg.hybrid.negative}};
  doc["normalize"] = cfg.normalize;
  doc["max_iterations"] = cfg.max_iterations;
  doc["tolerance"] = cfg.tolerance;
  return doc;
}

// ---------------------------------------------------------------------------

ModelParams parse_model(const json& doc) {
  if (!doc.is_object()) throw ValidationError("model file must be a JSON object");
  for (const auto& [k, v] : doc.items())
    if (k != "mode" && k != "weights" && k != "intercepts")
      throw ValidationError(fmt::format("unknown key '{}' in model file", k));
  const ModelMode mode = parse_mode(get_as<std::string>(doc, "mode", "\"single\" or \"separate\""));
  auto weights = get_as<std::vector<std::vector<double>>>(doc, "weights", "a list of weight vectors");
  auto intercepts = get_as<std::vector<double>>(doc, "intercepts", "a list of numbers");
  const std::size_t groups = mode == ModelMode::SingleModel ? 1 : 2;
  if (weights.size() != groups || intercepts.size() != groups)
    throw ValidationError(fmt::format("{} model needs {} weight vector(s) and {} intercept(s)", to_string(mode),
                                      groups, groups));
  if (groups == 2 && weights[0].size() != weights[1].size())
    throw ValidationError("separate model weight vectors differ in length");
  auto to_vec = [](const std::vector<double>& v) {
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  if (mode == ModelMode::SingleModel) return ModelParams::single(to_vec(weights[0]), intercepts[0]);
  return ModelParams::separate(to_vec(weights[0]), intercepts[0], to_vec(weights[1]), intercepts[1]);
}

ModelParams load_model(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open model file '{}'", path.string()));
  try {
    return parse_model(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("model file '{}' is not valid JSON: {}", path.string(), e.what()));
  }
}

json to_json(const ModelParams& params) {
  const int groups = params.mode() == ModelMode::SingleModel ? 1 : 2;
  json weights = json::array(), intercepts = json::array();
  for (int g = 1; g <= groups; ++g) {
    const Eigen::VectorXd w = params.weights(g);
    weights.push_back(std::vector<double>(w.data(), w.data() + w.size()));
    intercepts.push_back(params.intercept(g));
  }
  return {{"mode", to_string(params.mode())}, {"weights", weights}, {"intercepts", intercepts}};
}

// ---------------------------------------------------------------------------

std::string frontier_csv(const std::vector<FrontierPoint>& points) {
  std::string s =
      "lambda,gamma,cv_loss,train_acc_loss,test_acc_loss,train_fair,test_fair,weight_norm,intercept_1,intercept_2,"
      "converged\n";
  for (const auto& p : points)
    s += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", p.lambda, p.gamma, p.cv_loss, p.train_acc_loss,
                     p.test_acc_loss, p.train_fair, p.test_fair, p.weight_norm, p.intercept_1, p.intercept_2,
                     p.converged ? 1 : 0);
  return s;
}

std::string pof_csv(const PoFCurve& curve) {
  std::string s = "alpha,pof,achieved_ratio,lambda,gamma,warning\n";
  for (const auto& p : curve.points)
    s += fmt::format("{},{},{},{},{},{}\n", p.alpha, p.pof, p.achieved_ratio, p.lambda, curve.gamma, p.warning);
  return s;
}

std::string cv_csv(const CVReport& report) {
  std::string s = "gamma,total_loss\n";
  for (std::size_t j = 0; j < report.gammas.size(); ++j)
    s += fmt::format("{},{}\n", report.gammas[j], report.total_loss[j]);
  s += fmt::format("selected_gamma,{}\n", report.selected_gamma());
  return s;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  out << content;
  if (!out) throw ValidationError(fmt::format("failed writing '{}'", path.string()));
}

struct Replica {
  Dataset data;
  std::string suffix;
};

// The dataset once, or one subsample per repeat.
std::vector<Replica> load_replicas(const RunConfig& cfg) {
  cfg.validate();
  const CsvSchema schema = load_schema(cfg.schema);
  Dataset raw = load_csv(cfg.dataset, schema);
  std::vector<Replica> out;
  if (!cfg.subsample_fraction) {
    out.push_back({std::move(raw), ""});
    return out;
  }
  for (std::size_t r = 0; r < cfg.repeats; ++r)
    out.push_back({subsample_rows(raw, *cfg.subsample_fraction, derive_seed(cfg.seed, {5, r})),
                   fmt::format("_r{}", r)});
  return out;
}

json seeds_json(const RunConfig& cfg) {
  return {{"seed", cfg.seed},
          {"folds", derive_seed(cfg.seed, {1})},
          {"full_pairs", derive_seed(cfg.seed, {4})}};
}

std::string stem(const char* what, PenaltyKind kind, ModelMode mode, const std::string& suffix) {
  return fmt::format("{}_{}_{}{}", what, to_string(kind), to_string(mode), suffix);
}

json run_header(const RunConfig& cfg, const Replica& rep, PenaltyKind kind, ModelMode mode) {
  return {{"config", to_json(cfg)},
          {"seeds", seeds_json(cfg)},
          {"task", to_string(rep.data.task())},
          {"rows", rep.data.size()},
          {"features", rep.data.dim()},
          {"penalty", to_string(kind)},
          {"mode", to_string(mode)}};
}

}  // namespace

void cmd_frontier(const RunConfig& cfg, std::ostream& log) {
  const fs::path out_dir(cfg.out);
  for (const auto& rep : load_replicas(cfg)) {
    const ExperimentContext ctx(rep.data, cfg.experiment_options(rep.data.task()));
    const GammaGrid grid{cfg.gammas};
    for (PenaltyKind kind : cfg.resolved_penalties(rep.data.task())) {
      for (ModelMode mode : cfg.modes) {
        const std::string name = stem("frontier", kind, mode, rep.suffix);
        auto progress = [&](const FrontierPoint& p) {
          log << fmt::format("{}: lambda={} gamma={} test_acc_loss={} test_fair={}\n", name, p.lambda, p.gamma,
                             p.test_acc_loss, p.test_fair)
              << std::flush;
        };
        const auto points = sweep_lambda_frontier(ctx, cfg.lambdas, kind, mode, grid, progress);
        json doc = run_header(cfg, rep, kind, mode);
        doc["points"] = json::array();
        for (const auto& p : points)
          doc["points"].push_back({{"lambda", p.lambda},
                                   {"gamma", p.gamma},
                                   {"cv_loss", p.cv_loss},
                                   {"train_acc_loss", p.train_acc_loss},
                                   {"test_acc_loss", p.test_acc_loss},
                                   {"train_fair", p.train_fair},
                                   {"test_fair", p.test_fair},
                                   {"weight_norm", p.weight_norm},
                                   {"intercept_1", p.intercept_1},
                                   {"intercept_2", p.intercept_2},
                                   {"converged", p.converged}});
        write_file(out_dir / (name + ".csv"), frontier_csv(points));
        write_file(out_dir / (name + ".json"), doc.dump(2) + "\n");
      }
    }
  }
}

void emit_pof(const PoFCurve& curve, const fs::path& csv_path) {
  validate_pof_curve(curve);
  write_file(csv_path, pof_csv(curve));
}

void cmd_pof(const RunConfig& cfg, std::ostream& log) {
  const fs::path out_dir(cfg.out);
  for (const auto& rep : load_replicas(cfg)) {
    const ExperimentContext ctx(rep.data, cfg.experiment_options(rep.data.task()));
    for (PenaltyKind kind : cfg.resolved_penalties(rep.data.task())) {
      for (ModelMode mode : cfg.modes) {
        const std::string name = stem("pof", kind, mode, rep.suffix);
        const double gamma = cfg.gamma ? *cfg.gamma : select_gamma_cv(ctx, 0.0, kind, mode, {cfg.gammas}).selected_gamma();
        const PoFCurve curve = compute_pof(ctx, cfg.alphas, kind, mode, gamma);
        for (const auto& p : curve.points)
          log << fmt::format("{}: alpha={} pof={} lambda={}{}\n", name, p.alpha, p.pof, p.lambda,
                             p.warning.empty() ? "" : " warning: " + p.warning)
              << std::flush;
        emit_pof(curve, out_dir / (name + ".csv"));
        json doc = run_header(cfg, rep, kind, mode);
        doc["gamma"] = curve.gamma;
        doc["base_accuracy"] = curve.base_accuracy;
        doc["base_fairness"] = curve.base_fairness;
        doc["degenerate"] = curve.degenerate;
        doc["points"] = json::array();
        for (const auto& p : curve.points)
          doc["points"].push_back({{"alpha", p.alpha},
                                   {"pof", p.pof},
                                   {"achieved_ratio", p.achieved_ratio},
                                   {"lambda", p.lambda},
                                   {"warning", p.warning}});
        write_file(out_dir / (name + ".json"), doc.dump(2) + "\n");
      }
    }
  }
}

void cmd_cv_gamma(const RunConfig& cfg, std::ostream& log) {
  const fs::path out_dir(cfg.out);
  for (const auto& rep : load_replicas(cfg)) {
    const ExperimentContext ctx(rep.data, cfg.experiment_options(rep.data.task()));
    for (PenaltyKind kind : cfg.resolved_penalties(rep.data.task())) {
      for (ModelMode mode : cfg.modes) {
        const std::string name = stem("cv", kind, mode, rep.suffix);
        const CVReport report = select_gamma_cv(ctx, cfg.lambda, kind, mode, {cfg.gammas});
        log << fmt::format("{}: lambda={} selected gamma={}\n", name, cfg.lambda, report.selected_gamma())
            << std::flush;
        write_file(out_dir / (name + ".csv"), cv_csv(report));
      }
    }
  }
}

void cmd_penalty_eval(const RunConfig& cfg, const fs::path& model_path, std::ostream& out) {
  cfg.validate();
  const ModelParams params = load_model(model_path);
  const Dataset raw = load_csv(cfg.dataset, load_schema(cfg.schema));
  if (params.feature_dim() != raw.dim())
    throw ValidationError(fmt::format("model has {} features but the dataset has {}", params.feature_dim(),
                                      raw.dim()));
  const IndexList all = raw.all_indices();
  const Dataset data = cfg.normalize ? apply_normalization(raw, fit_normalization(raw, all)) : raw;
  const CrossPairSet pairs =
      sample_cross_pairs(data, all, cfg.pairs, cfg.resolved_weight(data.task()), derive_seed(cfg.seed, {4}));
  for (PenaltyKind kind : cfg.resolved_penalties(data.task())) {
    const PenaltyForm form = build_penalty_form(pairs, data, kind, params.mode(), cfg.hybrid);
    out << fmt::format("{} {}\n", to_string(kind), eval_penalty(form, params));
  }
  out << fmt::format("accuracy_loss {}\n", accuracy_loss(params, data, all, loss_kind_for(data.task())));
  out << fmt::format("prediction_mse {}\n", prediction_mse(params, data, all));
}

// ---------------------------------------------------------------------------

int run_guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << "\n";
    return 2;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Convex fairness-regularized regression experiments"};
  app.require_subcommand(1);

  std::string config_path, mode_flag, penalty_flag, out_flag, model_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::size_t> jobs_flag;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--seed", seed_flag, "Base random seed");
    sub->add_option("--out", out_flag, "Output directory");
    sub->add_option("--jobs", jobs_flag, "Worker thread cap")->check(CLI::PositiveNumber);
    sub->add_option("--mode", mode_flag, "Model mode")->check(CLI::IsMember({"single", "separate", "both"}));
    sub->add_option("--penalty", penalty_flag, "Penalty kind")
        ->check(CLI::IsMember({"individual", "group", "hybrid", "all"}));
  };
  auto* frontier = app.add_subcommand("frontier", "Sweep lambda and write accuracy/fairness frontiers");
  auto* pof = app.add_subcommand("pof", "Price-of-fairness curves");
  auto* cv = app.add_subcommand("cv-gamma", "Cross-validated ridge weight at a fixed lambda");
  auto* eval = app.add_subcommand("penalty-eval", "Evaluate a saved model's penalties and losses");
  for (auto* sub : {frontier, pof, cv, eval}) add_common(sub);
  eval->add_option("--model", model_path, "Model file (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  return run_guarded(
      [&] {
        RunConfig cfg = load_run_config(config_path);
        if (seed_flag) cfg.seed = *seed_flag;
        if (!out_flag.empty()) cfg.out = out_flag;
        if (jobs_flag) cfg.jobs = *jobs_flag;
        if (!mode_flag.empty()) cfg.modes = parse_modes(mode_flag);
        if (!penalty_flag.empty()) cfg.penalties = parse_penalties(penalty_flag);
        if (frontier->parsed()) cmd_frontier(cfg, err);
        if (pof->parsed()) cmd_pof(cfg, err);
        if (cv->parsed()) cmd_cv_gamma(cfg, err);
        if (eval->parsed()) cmd_penalty_eval(cfg, model_path, out);
      },
      err);
}

}  // namespace fairreg

#include "harsanyi/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "harsanyi/errors.hpp"
#include "harsanyi/model_io.hpp"
#include "harsanyi/rng.hpp"

namespace harsanyi {

using json = nlohmann::ordered_json;

constexpr int kOracleLimit = 16;
constexpr int kMaxRankRedraws = 64;

void ExperimentSpec::validate() const {
  if (trials < 1) throw ContractError("trials must be positive");
  if (samples < 1) throw ContractError("samples must be positive");
  for (auto b : budgets) {
    if (b == 0) throw ContractError("budgets must be positive");
  }
}

std::string to_json(const ExperimentSpec& spec) {
  json j;
  j["dataset"] = spec.dataset;
  j["model"] = spec.model;
  j["label_column"] = spec.label_column;
  j["categorical_columns"] = spec.categorical_columns;
  json names = json::array();
  for (auto k : spec.estimators) names.push_back(std::string(estimator_name(k)));
  j["estimators"] = names;
  j["budgets"] = spec.budgets;
  j["trials"] = spec.trials;
  j["samples"] = spec.samples;
  j["seed"] = spec.seed;
  j["mode"] = spec.mode ? std::string(and_mode_name(*spec.mode)) : std::string("model");
  if (spec.class_index) {
    j["class"] = *spec.class_index;
  } else {
    j["class"] = "auto";
  }
  j["csv"] = spec.csv_out;
  j["summary"] = spec.summary_out;
  return j.dump(2) + "\n";
}

ExperimentSpec parse_experiment_spec(const std::string& text) {
  ExperimentSpec spec;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw FormatError("experiment spec must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "dataset") {
        spec.dataset = value.get<std::string>();
      } else if (key == "model") {
        spec.model = value.get<std::string>();
      } else if (key == "label_column") {
        spec.label_column = value.get<std::string>();
      } else if (key == "categorical_columns") {
        spec.categorical_columns = value.get<std::vector<std::string>>();
      } else if (key == "estimators") {
        spec.estimators.clear();
        for (const auto& name : value) spec.estimators.push_back(parse_estimator(name.get<std::string>()));
      } else if (key == "budgets") {
        spec.budgets = value.get<std::vector<std::uint64_t>>();
      } else if (key == "trials") {
        spec.trials = value.get<int>();
      } else if (key == "samples") {
        spec.samples = value.get<int>();
      } else if (key == "seed") {
        spec.seed = value.get<std::uint64_t>();
      } else if (key == "mode") {
        const auto m = value.get<std::string>();
        if (m == "model") {
          spec.mode.reset();
        } else {
          spec.mode = parse_and_mode(m);
        }
      } else if (key == "class") {
        if (value.is_string() && value.get<std::string>() == "auto") {
          spec.class_index.reset();
        } else {
          spec.class_index = value.get<int>();
        }
      } else if (key == "csv") {
        spec.csv_out = value.get<std::string>();
      } else if (key == "summary") {
        spec.summary_out = value.get<std::string>();
      } else {
        throw FormatError("unknown experiment spec key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad experiment spec: ") + e.what());
  } catch (const ContractError& e) {
    throw FormatError(std::string("bad experiment spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open experiment spec " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_spec(ss.str());
}

std::uint64_t estimator_seed(std::uint64_t master, EstimatorKind kind, int trial, int sample) {
  const std::uint64_t stream = derive_seed(master, Stream::kEstimator,
                                           stable_hash(estimator_name(kind)));
  return derive_seed(stream, Stream::kEstimator,
                     (static_cast<std::uint64_t>(trial) << 32) | static_cast<std::uint32_t>(sample));
}

ConvergenceResult run_convergence(const AnyModel& model, const Dataset& data,
                                  const ExperimentSpec& spec) {
  spec.validate();
  const int n = player_count(model);
  if (n > kOracleLimit) {
    throw CapacityError("convergence experiment needs n <= " + std::to_string(kOracleLimit) +
                        ", model has " + std::to_string(n) + " players");
  }
  if (data.cols != input_size(model)) {
    throw ContractError("dataset has " + std::to_string(data.cols) + " columns, model expects " +
                        std::to_string(input_size(model)));
  }
  const int samples = std::min(spec.samples, data.rows);
  if (samples == 0) throw ContractError("dataset has no rows to explain");
  const AndMode mode = spec.mode.value_or(default_mode(model));

  ConvergenceResult result;
  result.samples = samples;
  result.players = n;

  std::vector<ValueOracle> games;
  std::vector<AttributionVector> truth;
  double exact_rmse = 0.0;
  for (int s = 0; s < samples; ++s) {
    const auto x = data.row(s);
    const int cls = resolve_class(model, x, data.labels[s], spec.class_index, mode);
    games.push_back(sample_game(model, x, cls, mode));
    CountingOracle counted(games.back());
    truth.push_back(brute_force_shapley(std::ref(counted), n));
    result.oracle_inferences += counted.calls();
    exact_rmse += rmse(exact_attribution(model, x, cls, mode), truth.back());
  }

  for (auto kind : spec.estimators) {
    for (auto budget : spec.budgets) {
      for (int trial = 0; trial < spec.trials; ++trial) {
        double total = 0.0;
        for (int s = 0; s < samples; ++s) {
          // A rank-deficient KernelSHAP draw is redrawn from a derived seed;
          // the failed draw's calls still count.
          const std::uint64_t base = estimator_seed(spec.seed, kind, trial, s);
          std::optional<EstimateRecord> rec;
          for (int attempt = 0; !rec; ++attempt) {
            const std::uint64_t seed =
                attempt == 0 ? base : derive_seed(base, Stream::kEstimator, attempt);
            CountingOracle counted(games[s]);
            try {
              rec = run_estimator(kind, std::ref(counted), n, Budget{budget, seed});
            } catch (const RankError&) {
              result.estimator_inferences += counted.calls();
              if (attempt + 1 >= kMaxRankRedraws) throw;
              ++result.rank_redraws;
              continue;
            }
            if (rec->budget_used != counted.calls()) {
              throw Error("inference accounting mismatch for " + rec->estimator + ": reported " +
                          std::to_string(rec->budget_used) + ", counted " +
                          std::to_string(counted.calls()));
            }
            result.estimator_inferences += counted.calls();
          }
          total += rmse(rec->attribution, truth[s]);
        }
        result.rows.push_back({std::string(estimator_name(kind)), budget, trial, total / samples});
      }
    }
  }
  result.rows.push_back({"harsanyinet", 1, 0, exact_rmse / samples});
  return result;
}

namespace {

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace

ConvergenceResult run_convergence_experiment(const ExperimentSpec& spec) {
  spec.validate();
  auto loaded = load_model(spec.model);
  CsvOptions options;
  options.label_column = spec.label_column;
  options.categorical_columns = spec.categorical_columns;
  options.normalize = loaded.is_mlp();
  const Preprocessing* fixed = loaded.preprocessing ? &*loaded.preprocessing : nullptr;
  const Dataset data = load_csv_dataset(spec.dataset, options, fixed);
  auto result = run_convergence(loaded.model, data, spec);
  if (!spec.csv_out.empty()) {
    std::ostringstream out;
    write_convergence_csv(out, result);
    write_text(spec.csv_out, out.str());
  }
  if (!spec.summary_out.empty()) {
    std::ostringstream out;
    write_convergence_summary(out, spec, result);
    write_text(spec.summary_out, out.str());
  }
  return result;
}

void write_convergence_csv(std::ostream& out, const ConvergenceResult& result) {
  out << "estimator,budget,trial,rmse\n";
  for (const auto& r : result.rows) {
    out << r.estimator << ',' << r.budget << ',' << r.trial << ',' << real(r.rmse) << '\n';
  }
}

void write_convergence_summary(std::ostream& out, const ExperimentSpec& spec,
                               const ConvergenceResult& result) {
  out << "# seed=" << spec.seed << '\n';
  out << "# trials=" << spec.trials << '\n';
  out << "# samples=" << result.samples << '\n';
  out << "# players=" << result.players << '\n';
  out << "# mode=" << (spec.mode ? std::string(and_mode_name(*spec.mode)) : "model") << '\n';
  out << "# oracle_inferences=" << result.oracle_inferences << '\n';
  out << "# estimator_inferences=" << result.estimator_inferences << '\n';
  out << "# rank_redraws=" << result.rank_redraws << '\n';
  out << "estimator,budget,trials,mean_rmse,sd_rmse\n";
  // Group in first-seen order.
  std::vector<std::pair<std::string, std::uint64_t>> keys;
  std::map<std::pair<std::string, std::uint64_t>, std::vector<double>> groups;
  for (const auto& r : result.rows) {
    auto key = std::make_pair(r.estimator, r.budget);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) keys.push_back(key);
    it->second.push_back(r.rmse);
  }
  for (const auto& key : keys) {
    const auto& v = groups[key];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    out << key.first << ',' << key.second << ',' << v.size() << ',' << real(mean) << ','
        << real(sd) << '\n';
  }
}

}  // namespace harsanyi

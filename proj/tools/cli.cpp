#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "harsanyi/errors.hpp"
#include "harsanyi/estimators.hpp"
#include "harsanyi/experiment.hpp"
#include "harsanyi/explain.hpp"
#include "harsanyi/model_io.hpp"
#include "harsanyi/training.hpp"

namespace harsanyi {
namespace {

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct UsageError : Error {
  using Error::Error;
};

// Options shared by the inspection commands.
struct Common {
  std::string model;
  std::string data;
  std::string label_col = "label";
  std::vector<std::string> categorical;
  std::string out;
  std::string mode = "model";
  std::string cls = "auto";
  std::string rows;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* app, Common& c, bool needs_data) {
  app->add_option("--model", c.model, "model file")->required();
  auto* data = app->add_option("--data", c.data, "CSV with a header row");
  if (needs_data) data->required();
  app->add_option("--label-col", c.label_col, "label column when the model has no record");
  app->add_option("--categorical", c.categorical, "columns to one-hot encode")->delimiter(',');
  app->add_option("--out", c.out, "output file (default stdout)");
  app->add_option("--mode", c.mode, "AND mode: hard, soft or model")
      ->check(CLI::IsMember({"hard", "soft", "model"}));
  app->add_option("--class", c.cls, "auto or a class index");
  app->add_option("--rows", c.rows, "row list such as 0,3,5-9 (default all)");
  app->add_option("--seed", c.seed, "master seed");
}

// Text goes to a string first so a failing command never leaves a partial
// file behind.
class Output {
 public:
  explicit Output(std::ostream& fallback) : fallback_(fallback) {}
  std::ostream& stream() { return buffer_; }
  void flush(const std::string& path) {
    if (path.empty()) {
      fallback_ << buffer_.str();
      return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("cannot open " + path + " for writing");
    file << buffer_.str();
    if (!file) throw Error("failed writing " + path);
  }

 private:
  std::ostream& fallback_;
  std::ostringstream buffer_;
};

void echo(std::ostream& out, const std::string& key, const std::string& value) {
  out << "# " << key << '=' << value << '\n';
}

void echo_common(std::ostream& out, const std::string& command, const Common& c, AndMode mode) {
  echo(out, "command", command);
  echo(out, "model", c.model);
  if (!c.data.empty()) echo(out, "data", c.data);
  echo(out, "seed", std::to_string(c.seed));
  echo(out, "mode", std::string(and_mode_name(mode)));
  echo(out, "class", c.cls);
  echo(out, "rows", c.rows.empty() ? "all" : c.rows);
}

std::optional<int> parse_class(const std::string& text) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size() && v >= 0) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("--class expects auto or a nonnegative index, got '" + text + "'");
}

std::vector<int> parse_rows(const std::string& text, int rows) {
  std::vector<int> out;
  if (text.empty()) {
    for (int r = 0; r < rows; ++r) out.push_back(r);
    return out;
  }
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ',');) {
    int lo = 0, hi = 0;
    char dash = 0;
    std::istringstream ps(part);
    if (!(ps >> lo)) throw UsageError("bad --rows entry '" + part + "'");
    hi = lo;
    if (ps >> dash) {
      if (dash != '-' || !(ps >> hi)) throw UsageError("bad --rows entry '" + part + "'");
    }
    if (lo < 0 || hi < lo || hi >= rows) {
      throw UsageError("row range '" + part + "' outside [0, " + std::to_string(rows) + ")");
    }
    for (int r = lo; r <= hi; ++r) out.push_back(r);
  }
  return out;
}

struct Loaded {
  LoadedModel model;
  Dataset data;
  AndMode mode;
};

Loaded load_inputs(const Common& c) {
  Loaded in{load_model(c.model), {}, AndMode::kSoft};
  in.mode = c.mode == "model" ? default_mode(in.model.model) : parse_and_mode(c.mode);
  if (!c.data.empty()) {
    CsvOptions options;
    options.label_column = c.label_col;
    options.categorical_columns = c.categorical;
    options.normalize = in.model.is_mlp();
    const Preprocessing* fixed = in.model.preprocessing ? &*in.model.preprocessing : nullptr;
    in.data = load_csv_dataset(c.data, options, fixed);
    if (in.data.cols != input_size(in.model.model)) {
      throw ContractError("data has " + std::to_string(in.data.cols) + " model columns, model expects " +
                          std::to_string(input_size(in.model.model)));
    }
  }
  return in;
}

void write_attributions(std::ostream& out, const std::vector<int>& rows,
                        const std::vector<AttributionVector>& phis) {
  out << "sample_index,player,phi\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t i = 0; i < phis[k].phi.size(); ++i) {
      out << rows[k] << ',' << i << ',' << real(phis[k].phi[i]) << '\n';
    }
  }
}

int cmd_explain(const Common& c, std::ostream& stdout_) {
  auto in = load_inputs(c);
  const auto requested = parse_class(c.cls);
  const auto rows = parse_rows(c.rows, in.data.rows);
  Output o(stdout_);
  auto& out = o.stream();
  echo_common(out, "explain", c, in.mode);
  std::vector<AttributionVector> phis;
  for (int r : rows) {
    const auto x = in.data.row(r);
    const int cls = resolve_class(in.model.model, x, in.data.labels[r], requested, in.mode);
    phis.push_back(exact_attribution(in.model.model, x, cls, in.mode));
    const double logit = logits(in.model.model, x, in.mode)[cls];
    out << "# sample=" << r << " class=" << cls << " logit=" << real(logit)
        << " phi_sum=" << real(phis.back().total()) << '\n';
  }
  write_attributions(out, rows, phis);
  o.flush(c.out);
  return 0;
}

int cmd_oracle(const Common& c, std::ostream& stdout_) {
  auto in = load_inputs(c);
  const auto requested = parse_class(c.cls);
  const auto rows = parse_rows(c.rows, in.data.rows);
  const int n = player_count(in.model.model);
  Output o(stdout_);
  auto& out = o.stream();
  echo_common(out, "oracle", c, in.mode);
  std::vector<AttributionVector> phis;
  for (int r : rows) {
    const auto x = in.data.row(r);
    const int cls = resolve_class(in.model.model, x, in.data.labels[r], requested, in.mode);
    phis.push_back(brute_force_shapley(sample_game(in.model.model, x, cls, in.mode), n));
    out << "# sample=" << r << " class=" << cls << " inferences=" << phis.back().inference_count
        << '\n';
  }
  write_attributions(out, rows, phis);
  o.flush(c.out);
  return 0;
}

int cmd_estimate(const Common& c, const std::string& estimator, std::uint64_t budget,
                 std::ostream& stdout_) {
  const auto kind = parse_estimator(estimator);
  auto in = load_inputs(c);
  const auto requested = parse_class(c.cls);
  const auto rows = parse_rows(c.rows, in.data.rows);
  const int n = player_count(in.model.model);
  Output o(stdout_);
  auto& out = o.stream();
  echo_common(out, "estimate", c, in.mode);
  echo(out, "estimator", std::string(estimator_name(kind)));
  echo(out, "budget", std::to_string(budget));
  std::vector<AttributionVector> phis;
  for (int r : rows) {
    const auto x = in.data.row(r);
    const int cls = resolve_class(in.model.model, x, in.data.labels[r], requested, in.mode);
    const auto rec = run_estimator(kind, sample_game(in.model.model, x, cls, in.mode), n,
                                   Budget{budget, estimator_seed(c.seed, kind, 0, r)});
    phis.push_back(rec.attribution);
    out << "# sample=" << r << " class=" << cls << " inferences=" << rec.budget_used << '\n';
  }
  write_attributions(out, rows, phis);
  o.flush(c.out);
  return 0;
}

int cmd_evaluate(const Common& c, std::ostream& stdout_) {
  auto in = load_inputs(c);
  const auto requested = parse_class(c.cls);
  const auto rows = parse_rows(c.rows, in.data.rows);
  const int n = player_count(in.model.model);
  Output o(stdout_);
  auto& out = o.stream();
  echo_common(out, "evaluate", c, in.mode);
  std::vector<double> errors;
  for (int r : rows) {
    const auto x = in.data.row(r);
    const int cls = resolve_class(in.model.model, x, in.data.labels[r], requested, in.mode);
    const auto exact = exact_attribution(in.model.model, x, cls, in.mode);
    const auto truth = brute_force_shapley(sample_game(in.model.model, x, cls, in.mode), n);
    errors.push_back(rmse(exact, truth));
  }
  double mean = 0.0, worst = 0.0;
  for (double e : errors) {
    mean += e;
    worst = std::max(worst, e);
  }
  if (!errors.empty()) mean /= static_cast<double>(errors.size());
  out << "samples,mean_rmse,max_rmse\n";
  out << errors.size() << ',' << real(mean) << ',' << real(worst) << '\n';
  o.flush(c.out);
  return 0;
}

int cmd_spectrum(const Common& c, const std::string& source, int row, std::ostream& stdout_) {
  auto in = load_inputs(c);
  const auto requested = parse_class(c.cls);
  if (row < 0 || row >= in.data.rows) {
    throw UsageError("row " + std::to_string(row) + " outside the dataset");
  }
  const auto x = in.data.row(row);
  const int cls = resolve_class(in.model.model, x, in.data.labels[row], requested, in.mode);
  Output o(stdout_);
  auto& out = o.stream();
  echo_common(out, "spectrum", c, in.mode);
  echo(out, "source", source);
  echo(out, "row", std::to_string(row));
  echo(out, "resolved_class", std::to_string(cls));
  out << "coalition,size,interaction\n";
  if (source == "network") {
    for (const auto& e : network_spectrum(in.model.model, x, cls, in.mode)) {
      out << '"' << format_members(e.field) << "\"," << e.field.count() << ','
          << real(e.interaction) << '\n';
    }
  } else {
    const int n = player_count(in.model.model);
    const auto rewards = tabulate(sample_game(in.model.model, x, cls, in.mode), n);
    for (const auto& e : interaction_spectrum(rewards)) {
      if (e.interaction == 0.0) continue;
      out << '"' << format_members(to_field_set(e.coalition)) << "\"," << e.coalition.size()
          << ',' << real(e.interaction) << '\n';
    }
  }
  o.flush(c.out);
  return 0;
}

int cmd_fields(const Common& c, std::ostream& stdout_) {
  auto in = load_inputs(c);
  Output o(stdout_);
  auto& out = o.stream();
  echo(out, "command", "fields");
  echo(out, "model", c.model);
  echo(out, "seed", std::to_string(c.seed));
  if (const auto* m = std::get_if<HarsanyiMlp>(&in.model.model)) {
    const auto fields = receptive_fields(*m);
    out << "block,unit,size,field\n";
    for (int l = 0; l < m->block_count(); ++l) {
      for (int u = 0; u < m->block(l).units; ++u) {
        const auto& f = fields.at({l, u});
        out << l << ',' << u << ',' << f.count() << ",\"" << format_members(f) << "\"\n";
      }
    }
  } else {
    const auto& cnn = std::get<HarsanyiCnn>(in.model.model);
    const auto fields = grid_receptive_fields(cnn);
    out << "block,location,size,field\n";
    for (int l = 0; l < cnn.block_count(); ++l) {
      for (int loc = 0; loc < cnn.locations(); ++loc) {
        const auto& f = fields.location(l, loc);
        out << l << ',' << loc << ',' << f.count() << ",\"" << format_members(f) << "\"\n";
      }
    }
  }
  o.flush(c.out);
  return 0;
}

struct TrainOptions {
  std::string data;
  std::string label_col = "label";
  std::vector<std::string> categorical;
  std::string out;
  std::string metrics;
  std::string topology = "mlp";
  std::vector<int> units{100, 100, 100};
  std::string scope = "previous_block_only";
  std::string mode = "soft";
  std::optional<double> beta;
  std::optional<double> gamma;
  double lr = 1e-3;
  int epochs = 20;
  int batch = 32;
  int fanin = 10;
  double tau_sd = 0.01;
  double holdout = 0.2;
  std::uint64_t seed = 0;
  int height = 8, width = 8, in_channels = 1, stem_channels = 8, stem_kernel = 3, pool = 1;
  int blocks = 2, channels = 8, kernel = 3;
};

void add_train(CLI::App* app, TrainOptions& t) {
  app->add_option("--data", t.data, "training CSV")->required();
  app->add_option("--label-col", t.label_col, "label column");
  app->add_option("--categorical", t.categorical, "columns to one-hot encode")->delimiter(',');
  app->add_option("--out", t.out, "model file to write")->required();
  app->add_option("--metrics", t.metrics, "per-epoch metrics CSV");
  app->add_option("--topology", t.topology, "mlp or conv")->check(CLI::IsMember({"mlp", "conv"}));
  app->add_option("--units", t.units, "units per block, e.g. 100,100,100")->delimiter(',');
  app->add_option("--scope", t.scope, "previous_block_only or all_previous_blocks");
  app->add_option("--mode", t.mode, "AND mode stored for inference")
      ->check(CLI::IsMember({"hard", "soft"}));
  app->add_option("--beta", t.beta, "STE surrogate sharpness");
  app->add_option("--gamma", t.gamma, "soft AND sharpness");
  app->add_option("--lr", t.lr, "learning rate");
  app->add_option("--epochs", t.epochs, "epochs");
  app->add_option("--batch", t.batch, "minibatch size");
  app->add_option("--fanin", t.fanin, "initial children per MLP unit");
  app->add_option("--tau-sd", t.tau_sd, "initial tau deviation for conv blocks");
  app->add_option("--holdout", t.holdout, "validation fraction");
  app->add_option("--seed", t.seed, "master seed");
  app->add_option("--height", t.height, "image height (conv)");
  app->add_option("--width", t.width, "image width (conv)");
  app->add_option("--in-channels", t.in_channels, "image channels (conv)");
  app->add_option("--stem-channels", t.stem_channels, "stem channels (conv)");
  app->add_option("--stem-kernel", t.stem_kernel, "stem kernel (conv)");
  app->add_option("--pool", t.pool, "stem max-pool factor (conv)");
  app->add_option("--blocks", t.blocks, "Harsanyi blocks (conv)");
  app->add_option("--channels", t.channels, "block channels (conv)");
  app->add_option("--kernel", t.kernel, "block kernel (conv)");
}

template <typename Model>
void finish_train(const TrainResult<Model>& result, const TrainConfig& config,
                  const Preprocessing& prep, const TrainOptions& t, std::ostream& out) {
  if (!t.metrics.empty()) {
    std::ostringstream m;
    write_metrics_csv(m, config, result.log);
    std::ofstream file(t.metrics, std::ios::binary);
    if (!file) throw Error("cannot open " + t.metrics + " for writing");
    file << m.str();
  }
  save_model(result.model, t.out, &prep);
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    echo(out, "final_loss", real(last.loss));
    echo(out, "train_acc", real(last.train_acc));
    echo(out, "val_acc", real(last.val_acc));
  }
  echo(out, "saved", t.out);
}

int cmd_train(const TrainOptions& t, std::ostream& out) {
  const bool conv = t.topology == "conv";
  CsvOptions options;
  options.label_column = t.label_col;
  options.categorical_columns = t.categorical;
  options.normalize = !conv;
  const Dataset all = load_csv_dataset(t.data, options);
  if (!all.warnings.empty()) {
    for (const auto& w : all.warnings) out << "# warning=" << w << '\n';
  }
  if (all.rejected_rows > 0) echo(out, "rejected_rows", std::to_string(all.rejected_rows));
  auto [train_set, val_set] = split_dataset(all, t.holdout, t.seed);

  TrainConfig config;
  config.beta = t.beta.value_or(conv ? 1000.0 : 10.0);
  config.gamma = t.gamma.value_or(conv ? 1.0 : 100.0);
  config.learning_rate = t.lr;
  config.epochs = t.epochs;
  config.batch_size = t.batch;
  config.seed = t.seed;
  config.init.kind = conv ? InitKind::kCnnGaussian : InitKind::kMlpFixedFanin;
  config.init.fanin = t.fanin;
  config.init.tau_sd = t.tau_sd;

  echo(out, "command", "train");
  echo(out, "data", t.data);
  echo(out, "topology", t.topology);
  echo(out, "seed", std::to_string(t.seed));
  echo(out, "rows", std::to_string(all.rows));
  echo(out, "players", std::to_string(all.players()));
  echo(out, "classes", std::to_string(all.class_count()));
  echo(out, "holdout", real(t.holdout));
  echo(out, "beta", real(config.beta));
  echo(out, "gamma", real(config.gamma));
  echo(out, "learning_rate", real(config.learning_rate));
  echo(out, "epochs", std::to_string(config.epochs));
  echo(out, "batch_size", std::to_string(config.batch_size));
  echo(out, "mode", t.mode);

  if (!conv) {
    ModelConfig mc;
    mc.input_dim = all.cols;
    mc.player_of_input = all.preprocessing.player_of_column();
    mc.units = t.units;
    mc.class_count = all.class_count();
    mc.children_scope = parse_children_scope(t.scope);
    mc.and_mode = parse_and_mode(t.mode);
    std::string units;
    for (int u : t.units) units += (units.empty() ? "" : ",") + std::to_string(u);
    echo(out, "units", units);
    echo(out, "scope", t.scope);
    echo(out, "fanin", std::to_string(t.fanin));
    auto result = train(HarsanyiMlp(mc), train_set, val_set, config);
    finish_train(result, config, all.preprocessing, t, out);
  } else {
    CnnConfig cc;
    cc.stem = {t.in_channels, t.height, t.width, t.stem_kernel, t.stem_channels, t.pool};
    cc.blocks = t.blocks;
    cc.channels = t.channels;
    cc.kernel = t.kernel;
    cc.class_count = all.class_count();
    cc.and_mode = parse_and_mode(t.mode);
    echo(out, "image", std::to_string(t.in_channels) + "x" + std::to_string(t.height) + "x" +
                           std::to_string(t.width));
    echo(out, "grid", std::to_string(cc.grid_height()) + "x" + std::to_string(cc.grid_width()));
    echo(out, "blocks", std::to_string(t.blocks));
    echo(out, "channels", std::to_string(t.channels));
    echo(out, "kernel", std::to_string(t.kernel));
    auto result = train(HarsanyiCnn(cc), train_set, val_set, config);
    finish_train(result, config, all.preprocessing, t, out);
  }
  return 0;
}

int cmd_experiment(const std::string& path, std::optional<std::uint64_t> seed, std::ostream& out) {
  auto spec = load_experiment_spec(path);
  if (seed) spec.seed = *seed;
  const auto result = run_convergence_experiment(spec);
  echo(out, "command", "experiment");
  echo(out, "spec", path);
  if (!spec.csv_out.empty()) echo(out, "csv", spec.csv_out);
  if (!spec.summary_out.empty()) echo(out, "summary", spec.summary_out);
  write_convergence_summary(out, spec, result);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"HarsanyiNet: exact Shapley values from one forward pass", "harsanyinet"};
  app.require_subcommand(1);
  app.allow_extras(false);

  TrainOptions to;
  add_train(app.add_subcommand("train", "fit a model and save it"), to);

  Common explain, oracle, estimate, evaluate, spectrum, fields;
  add_common(app.add_subcommand("explain", "exact Shapley values from one forward pass"), explain,
             true);
  add_common(app.add_subcommand("oracle", "brute-force Shapley values over all masks"), oracle,
             true);
  auto* est = app.add_subcommand("estimate", "run a sampling estimator at a budget");
  add_common(est, estimate, true);
  std::string estimator;
  std::uint64_t budget = 0;
  est->add_option("--estimator", estimator, "sampling, antithetical, kernelshap or kernelshap-ps")
      ->required()
      ->check(CLI::IsMember({"sampling", "antithetical", "kernelshap", "kernelshap-ps"}));
  est->add_option("--budget", budget, "model inferences per sample")->required();
  add_common(app.add_subcommand("evaluate", "RMSE between exact and brute-force values"), evaluate,
             true);
  auto* spec_cmd = app.add_subcommand("spectrum", "interaction spectrum of one sample");
  add_common(spec_cmd, spectrum, true);
  std::string source = "network";
  int row = 0;
  spec_cmd->add_option("--source", source, "network or oracle")
      ->check(CLI::IsMember({"network", "oracle"}));
  spec_cmd->add_option("--row", row, "row to analyse");
  add_common(app.add_subcommand("fields", "receptive field of every unit"), fields, false);
  auto* exp = app.add_subcommand("experiment", "convergence experiment from a JSON spec");
  std::string spec_path;
  std::optional<std::uint64_t> exp_seed;
  exp->add_option("--spec", spec_path, "experiment spec")->required();
  exp->add_option("--seed", exp_seed, "override the spec's master seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "train") return cmd_train(to, out);
    if (name == "explain") return cmd_explain(explain, out);
    if (name == "oracle") return cmd_oracle(oracle, out);
    if (name == "estimate") return cmd_estimate(estimate, estimator, budget, out);
    if (name == "evaluate") return cmd_evaluate(evaluate, out);
    if (name == "spectrum") return cmd_spectrum(spectrum, source, row, out);
    if (name == "fields") return cmd_fields(fields, out);
    if (name == "experiment") return cmd_experiment(spec_path, exp_seed, out);
    throw UsageError("unknown command " + name);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace harsanyi

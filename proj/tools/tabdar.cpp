// Command-line front end: inspect, fit, sample, impute, eval.
//
// Exit codes: 0 success, 1 computation failure, 2 usage or I/O failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tabdar/tabdar.hpp"

namespace {

using tabdar::RawTable;
using tabdar::TableSchema;
using json = nlohmann::json;

constexpr int kExitCompute = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("invalid JSON in '" + path + "': " + e.what());
  }
}

tabdar::SchemaOverrides overrides_from(const std::string& schema_path) {
  if (schema_path.empty()) return {};
  return tabdar::overrides_from_schema(tabdar::schema_from_json(read_json_file(schema_path)));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw UsageError("cannot write '" + path + "'");
}

void write_table(const std::string& path, const RawTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  tabdar::csv::write(out, table);
  if (!out) throw UsageError("cannot write '" + path + "'");
}

RawTable read_table(const std::string& path) { return tabdar::csv::read_file(path); }

// ---- inspect ----

struct InspectArgs {
  std::string data, schema;
};

int run_inspect(const InspectArgs& a) {
  const auto [raw, schema] = tabdar::load_csv(a.data, overrides_from(a.schema));
  std::cout << tabdar::to_json(schema).dump(2) << '\n';
  return 0;
}

// ---- fit ----

struct FitArgs {
  std::string data, out, schema, config;
  std::optional<int> epochs, batch, threads;
  std::optional<std::uint64_t> seed;
};

int run_fit(const FitArgs& a) {
  tabdar::TrainConfig cfg;
  if (!a.config.empty()) cfg = tabdar::train_config_from_json(read_json_file(a.config), cfg);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch) cfg.batch_size = *a.batch;
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.threads < 1)
    throw UsageError("epochs must be >= 0, batch and threads >= 1");

  const auto [raw, schema] = tabdar::load_csv(a.data, overrides_from(a.schema));
  const auto transforms = tabdar::fit_transforms(raw, schema);
  const auto encoded = tabdar::encode(raw, schema, transforms);

  std::cout << json{{"config", tabdar::to_json(cfg)}}.dump() << '\n';
  const auto result = tabdar::train(encoded, cfg, [](const tabdar::EpochRecord& r) {
    std::cerr << json{{"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"lr", r.lr}}.dump() << '\n';
  });
  try {
    tabdar::save_checkpoint(result.checkpoint, a.out);
  } catch (const tabdar::CheckpointError& e) {
    throw UsageError(e.what());
  }
  return 0;
}

// ---- sample ----

tabdar::SamplerConfig sampler_config(const std::string& solver) {
  tabdar::SamplerConfig cfg;
  cfg.solver = solver == "euler" ? tabdar::Solver::Euler : tabdar::Solver::Heun;
  return cfg;
}

struct SampleArgs {
  std::string ckpt, out, order = "random", cond, solver = "heun";
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

int run_sample(const SampleArgs& a) {
  const auto ckpt = tabdar::load_checkpoint(a.ckpt);
  RawTable table;
  if (!a.cond.empty()) {
    table = tabdar::generate_conditional(ckpt.model, ckpt.transforms, read_table(a.cond), a.seed,
                                         sampler_config(a.solver));
  } else {
    const auto mode = a.order == "fixed" ? tabdar::OrderMode::Fixed : tabdar::OrderMode::Random;
    table = tabdar::generate_unconditional(ckpt.model, ckpt.transforms, a.n, a.seed, mode, sampler_config(a.solver));
  }
  write_table(a.out, table);
  return 0;
}

// ---- impute ----

struct ImputeArgs {
  std::string ckpt, data, out, solver = "heun";
  std::size_t k = tabdar::SamplerConfig{}.impute_k;
  std::uint64_t seed = 0;
};

int run_impute(const ImputeArgs& a) {
  const auto ckpt = tabdar::load_checkpoint(a.ckpt);
  const auto table = read_table(a.data);
  write_table(a.out, tabdar::impute(ckpt.model, ckpt.transforms, table, a.k, a.seed, sampler_config(a.solver)));
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string real, syn, holdout, schema, out, marginal_csv;
  std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a) {
  const auto [real, schema] = tabdar::load_csv(a.real, overrides_from(a.schema));
  const auto syn = read_table(a.syn);
  tabdar::detail::check_header(syn, schema);
  std::optional<RawTable> holdout;
  if (!a.holdout.empty()) {
    holdout = read_table(a.holdout);
    tabdar::detail::check_header(*holdout, schema);
  }
  const auto report = tabdar::metrics::evaluate(real, syn, schema, holdout ? &*holdout : nullptr, a.seed);
  json j = tabdar::metrics::to_json(report);
  j["config"] = {{"real", a.real}, {"syn", a.syn}, {"seed", a.seed}};
  if (holdout) j["config"]["holdout"] = a.holdout;
  const std::string text = j.dump(2) + "\n";
  if (a.out.empty())
    std::cout << text;
  else
    write_text(a.out, text);

  if (!a.marginal_csv.empty()) {
    RawTable rows;
    rows.header = {"column", "method", "score"};
    for (const auto& c : report.marginal) rows.rows.push_back({c.column, c.method, tabdar::format_real(c.score)});
    write_table(a.marginal_csv, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tabdar::tune_allocator();
  CLI::App app{"TabDAR tabular data generator"};
  app.require_subcommand(1);

  InspectArgs inspect;
  auto* c_inspect = app.add_subcommand("inspect", "Print the inferred table schema as JSON");
  c_inspect->add_option("--data", inspect.data, "Input CSV")->required();
  c_inspect->add_option("--schema", inspect.schema, "Schema JSON overriding inferred column kinds");

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Train a model and write a checkpoint");
  c_fit->add_option("--data", fit.data, "Training CSV")->required();
  c_fit->add_option("--out", fit.out, "Checkpoint path")->required();
  c_fit->add_option("--schema", fit.schema, "Schema JSON overriding inferred column kinds");
  c_fit->add_option("--config", fit.config, "Training config JSON");
  c_fit->add_option("--epochs", fit.epochs, "Training epochs");
  c_fit->add_option("--batch", fit.batch, "Batch size");
  c_fit->add_option("--seed", fit.seed, "Random seed");
  c_fit->add_option("--threads", fit.threads, "Worker threads for gradient computation");

  SampleArgs sample;
  auto* c_sample = app.add_subcommand("sample", "Generate synthetic rows");
  c_sample->add_option("--ckpt", sample.ckpt, "Checkpoint path")->required();
  c_sample->add_option("--out", sample.out, "Output CSV")->required();
  auto* n_opt = c_sample->add_option("--n", sample.n, "Number of rows");
  auto* cond_opt = c_sample->add_option("--cond", sample.cond, "CSV whose empty cells are generated conditionally");
  n_opt->excludes(cond_opt);
  c_sample->add_option("--seed", sample.seed, "Random seed");
  c_sample->add_option("--order", sample.order, "Column order")->check(CLI::IsMember({"random", "fixed"}));
  c_sample->add_option("--solver", sample.solver, "Diffusion ODE solver")->check(CLI::IsMember({"heun", "euler"}));

  ImputeArgs imp;
  auto* c_impute = app.add_subcommand("impute", "Fill empty cells by averaging conditional samples");
  c_impute->add_option("--ckpt", imp.ckpt, "Checkpoint path")->required();
  c_impute->add_option("--data", imp.data, "CSV with empty cells")->required();
  c_impute->add_option("--out", imp.out, "Output CSV")->required();
  c_impute->add_option("--k", imp.k, "Samples per row")->check(CLI::PositiveNumber);
  c_impute->add_option("--seed", imp.seed, "Random seed");
  c_impute->add_option("--solver", imp.solver, "Diffusion ODE solver")->check(CLI::IsMember({"heun", "euler"}));

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score a synthetic table against real data");
  c_eval->add_option("--real", ev.real, "Real (training) CSV")->required();
  c_eval->add_option("--syn", ev.syn, "Synthetic CSV")->required();
  c_eval->add_option("--holdout", ev.holdout, "Holdout CSV enabling the DCR score");
  c_eval->add_option("--schema", ev.schema, "Schema JSON overriding inferred column kinds");
  c_eval->add_option("--seed", ev.seed, "Random seed for the classifier test");
  c_eval->add_option("--out", ev.out, "Write the report here instead of standard output");
  c_eval->add_option("--marginal-csv", ev.marginal_csv, "Per-column marginal scores as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*c_inspect) return run_inspect(inspect);
    if (*c_fit) return run_fit(fit);
    if (*c_sample) {
      if (!*n_opt && !*cond_opt) throw UsageError("sample needs --n or --cond");
      return run_sample(sample);
    }
    if (*c_impute) return run_impute(imp);
    if (*c_eval) return run_eval(ev);
  } catch (const tabdar::ComputeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCompute;
  } catch (const tabdar::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCompute;
  }
  return kExitUsage;
}

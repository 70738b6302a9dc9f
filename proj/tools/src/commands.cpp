#include "stsreg_cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "stsreg/checkpoint.hpp"
#include "stsreg/error.hpp"
#include "stsreg/eval.hpp"
#include "stsreg/gradcheck.hpp"
#include "stsreg/synthetic.hpp"
#include "stsreg_cli/run_config.hpp"
#include "stsreg_cli/runner.hpp"

namespace stsreg::cli {

namespace {

std::filesystem::path output_dir(const std::string& flag, const RunConfig& config) {
  if (!flag.empty()) {
    return flag;
  }
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
    return env;
  }
  return config.output_dir;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string spearman_text(const std::optional<double>& v) { return v ? fixed(*v) : "undefined"; }

/// Runs job(i) for i in [0, n) on up to `threads` workers. Jobs are independent;
/// results are stored by index, so output order never depends on scheduling.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& job) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---- filter-data ---------------------------------------------------------

struct FilterArgs {
  std::vector<std::string> train;
  std::vector<std::string> sick_train;
  std::vector<std::string> tests;
  std::string out;
  std::string audit;
};

int cmd_filter_data(const FilterArgs& a, std::ostream& out) {
  if (a.train.empty() && a.sick_train.empty()) {
    throw InvalidInput("filter-data: give at least one --train or --sick-train file");
  }
  // Load everything before writing anything.
  std::vector<Dataset> tests;
  for (const auto& t : a.tests) {
    tests.push_back(load_tsv_auto(t, std::nullopt, std::nullopt, std::filesystem::path(t).stem().string()));
  }
  std::vector<std::pair<Dataset, bool>> trains;
  for (const auto& t : a.train) {
    trains.emplace_back(load_tsv(t, ScoreRange{0.0, 5.0}), false);
  }
  for (const auto& t : a.sick_train) {
    trains.emplace_back(load_tsv(t, ScoreRange{1.0, 5.0}), true);
  }

  std::size_t input = 0;
  std::vector<Dataset> kept;
  std::vector<RemovedPair> removed;
  for (const auto& [ds, is_sick] : trains) {
    input += ds.size();
    DedupResult r = dedup_filter(ds, tests);
    removed.insert(removed.end(), r.removed.begin(), r.removed.end());
    kept.push_back(is_sick ? rescale_sick(r.filtered) : std::move(r.filtered));
  }
  const Dataset merged = merge(kept, std::filesystem::path(a.out).stem().string());

  const std::filesystem::path out_path(a.out);
  const std::filesystem::path audit_path = a.audit.empty() ? std::filesystem::path(a.out + ".removed.jsonl")
                                                           : std::filesystem::path(a.audit);
  for (const auto& p : {out_path, audit_path}) {
    if (p.has_parent_path()) {
      std::filesystem::create_directories(p.parent_path());
    }
  }
  write_file_atomic(out_path, format_tsv(merged));
  write_file_atomic(audit_path, format_removal_audit(removed));

  out << "input " << input << "\n"
      << "removed " << removed.size() << "\n"
      << "kept " << merged.size() << "\n";
  return kOk;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 1;
};

RunConfig load_with_overrides(const std::string& path, const std::optional<std::uint64_t>& seed) {
  RunConfig c = load_run_config(path);
  if (seed) {
    c.seed = *seed;
    for (auto& s : c.stages) s.train.seed = *seed;
  }
  return c;
}

void print_run(const RunOutcome& r, const std::filesystem::path& dir, std::ostream& out) {
  for (const auto& s : r.stages) {
    out << to_string(s.stage) << ": best step " << s.result.best_step << ", dev spearman "
        << spearman_text(s.result.best_dev_spearman) << "\n";
  }
  out << "dev spearman " << spearman_text(r.dev_spearman) << "\n"
      << "wrote " << dir.string() << "\n";
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const RunConfig config = load_with_overrides(a.config, a.seed);
  const auto dir = output_dir(a.out, config);
  const RunOutcome r = run_training(config);
  write_run(r, config, dir);
  print_run(r, dir, out);
  return kOk;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::vector<std::string> data;
  std::string report;
  std::string format = "both";
  std::string name = "model";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.data.empty()) {
    throw InvalidInput("eval: no datasets given");
  }
  const Model model = load_checkpoint(a.checkpoint);
  std::vector<Dataset> sets;
  for (const auto& d : a.data) {
    sets.push_back(load_tsv_auto(d, std::nullopt, model.mapping, std::filesystem::path(d).stem().string()));
  }
  const EvalReport report = evaluate(model, sets);
  if (!a.report.empty()) {
    write_file_atomic(a.report, report.to_json() + "\n");
  }
  if (a.format == "json" || a.format == "both") {
    out << report.to_json() << "\n";
  }
  if (a.format == "table" || a.format == "both") {
    out << report.to_table(a.name);
  }
  return kOk;
}

// ---- gradcheck -----------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  std::size_t dim = 6;
  std::size_t vocab = 24;
  std::size_t batch = 4;
  std::size_t classes = 3;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  bool ok = true;
  for (std::size_t s = 0; s < a.seeds; ++s) {
    GradCheckOptions o;
    o.seed = a.seed + s;
    o.dim = a.dim;
    o.vocab = a.vocab;
    o.batch = a.batch;
    o.classes = a.classes;
    for (const auto& c : run_gradcheck_suite(o)) {
      out << "seed " << o.seed << "  " << std::left << std::setw(26) << c.label << " max_rel_err "
          << std::scientific << std::setprecision(3) << c.result.max_relative_error << std::defaultfloat
          << "  worst " << c.result.worst_parameter << "  resamples " << c.resamples << "  "
          << (c.passed ? "PASS" : "FAIL") << "\n";
      ok = ok && c.passed;
    }
  }
  out << (ok ? "all gradients within " : "gradient check FAILED at tolerance ") << "1e-4\n";
  return ok ? kOk : kValidation;
}

// ---- sweep / ablate ------------------------------------------------------

struct GridArgs {
  std::string config;
  std::vector<double> k;
  std::vector<double> x0;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 1;
};

struct GridRow {
  std::string label;
  RunConfig config;
  std::optional<double> dev;
  std::size_t head_params = 0;
};

void run_rows(std::vector<GridRow>& rows, const std::filesystem::path& dir, std::size_t threads) {
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    const RunOutcome r = run_training(rows[i].config);
    write_run(r, rows[i].config, dir / rows[i].label);
    rows[i].dev = r.dev_spearman;
    rows[i].head_params = r.model.params.head_weight_count();
  });
}

void set_seed(RunConfig& c, std::uint64_t seed) {
  c.seed = seed;
  for (auto& s : c.stages) s.train.seed = seed;
}

bool by_dev_desc(const GridRow& a, const GridRow& b) {
  const double da = a.dev.value_or(-2.0);
  const double db = b.dev.value_or(-2.0);
  return da > db;
}

int cmd_sweep(const GridArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig base = load_with_overrides(a.config, a.seed);
  if (base.loss.kind() != LossKind::TranslatedReLU && base.loss.kind() != LossKind::SmoothK2) {
    throw InvalidInput("sweep: the config loss must be translated_relu or smooth_k2");
  }
  const auto dir = output_dir(a.out, base);
  std::vector<GridRow> rows;
  std::size_t index = 0;
  for (double k : a.k) {
    for (double x0 : a.x0) {
      const std::size_t i = index++;
      RunConfig c = base;
      try {
        c.loss = LossSpec(base.loss.kind(), k, x0, base.loss.d());
      } catch (const InvalidInput& e) {
        err << "warning: skipping k=" << k << " x0=" << x0 << ": " << e.what() << "\n";
        continue;
      }
      set_seed(c, base.seed + i);
      rows.push_back({"point-" + std::to_string(i), c, std::nullopt, 0});
    }
  }
  if (rows.empty()) {
    throw InvalidInput("sweep: no valid grid points");
  }
  run_rows(rows, dir, a.threads);
  std::stable_sort(rows.begin(), rows.end(), by_dev_desc);

  std::ostringstream csv;
  csv << "k,x0,seed,dev_spearman,run\n";
  out << std::left << std::setw(8) << "k" << std::setw(8) << "x0" << std::setw(14) << "dev spearman"
      << "run\n";
  for (const auto& r : rows) {
    csv << r.config.loss.k() << "," << r.config.loss.x0() << "," << r.config.seed << ","
        << (r.dev ? fixed(*r.dev, 6) : "") << "," << r.label << "\n";
    out << std::setw(8) << r.config.loss.k() << std::setw(8) << r.config.loss.x0() << std::setw(14)
        << spearman_text(r.dev) << r.label << "\n";
  }
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "sweep.csv", csv.str());
  return kOk;
}

int cmd_ablate(const GridArgs& a, std::ostream& out) {
  const RunConfig base = load_with_overrides(a.config, a.seed);
  const auto dir = output_dir(a.out, base);
  std::vector<GridRow> rows;
  for (FeatureMode mode : {FeatureMode::UV, FeatureMode::AbsDiff, FeatureMode::UVAbsDiff}) {
    RunConfig c = base;
    c.mode = mode;
    rows.push_back({std::string(to_string(mode)), c, std::nullopt, 0});
  }
  run_rows(rows, dir, a.threads);

  std::ostringstream csv;
  csv << "mode,head_params,dev_spearman\n";
  out << std::left << std::setw(12) << "mode" << std::setw(13) << "head params" << "dev spearman\n";
  for (const auto& r : rows) {
    csv << r.label << "," << r.head_params << "," << (r.dev ? fixed(*r.dev, 6) : "") << "\n";
    out << std::setw(12) << r.label << std::setw(13) << r.head_params << spearman_text(r.dev) << "\n";
  }
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "ablate.csv", csv.str());
  return kOk;
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string kind = "ordinal";
  std::string out;
  SyntheticOptions options;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const std::string name = std::filesystem::path(a.out).stem().string();
  Dataset ds("empty", ScoreRange{});
  if (a.kind == "ordinal") {
    ds = make_ordinal_corpus(name, relevance_categories(), a.options);
  } else if (a.kind == "nli") {
    ds = make_ordinal_corpus(name, LabelMapping::nli().categories(), a.options);
  } else if (a.kind == "continuous") {
    ds = make_continuous_corpus(name, a.options);
  } else {
    throw InvalidInput("synth: unknown kind '" + a.kind + "' (expected ordinal, nli or continuous)");
  }
  const std::filesystem::path path(a.out);
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  write_file_atomic(path, format_tsv(ds));
  out << "wrote " << ds.size() << " pairs to " << a.out << "\n";
  return kOk;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Siamese sentence-pair regression with zero-gradient buffer losses", "stsreg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "stsreg 0.1.0");

  FilterArgs filter;
  auto* f = app.add_subcommand("filter-data", "Remove training pairs that overlap any test set");
  f->add_option("--train", filter.train, "STS-style training TSV (scores in [0, 5])");
  f->add_option("--sick-train", filter.sick_train, "SICK-style training TSV (scores in [1, 5], rescaled)");
  f->add_option("--test", filter.tests, "Test TSV to protect")->required();
  f->add_option("--out", filter.out, "Filtered TSV to write")->required();
  f->add_option("--audit", filter.audit, "Removal audit (JSON lines); default <out>.removed.jsonl");

  TrainArgs train_args;
  std::uint64_t seed_value = 0;
  auto* t = app.add_subcommand("train", "Train according to a run config");
  t->add_option("--config", train_args.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  auto* t_seed = t->add_option("--seed", seed_value, "Override the config seed");
  t->add_option("--out", train_args.out, "Output directory (overrides STSREG_OUT_DIR and the config)");
  t->add_option("--threads", train_args.threads, "Worker threads (training itself is sequential)")
      ->check(CLI::PositiveNumber);

  EvalArgs eval_args;
  auto* e = app.add_subcommand("eval", "Spearman (and accuracy) of a checkpoint on datasets");
  e->add_option("--checkpoint", eval_args.checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
  e->add_option("data", eval_args.data, "Dataset TSV files");
  e->add_option("--report", eval_args.report, "Also write the JSON report here");
  e->add_option("--format", eval_args.format, "table, json or both")
      ->check(CLI::IsMember({"table", "json", "both"}));
  e->add_option("--name", eval_args.name, "Row label in the table");

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  g->add_option("--seed", gc.seed, "First seed");
  g->add_option("--seeds", gc.seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  g->add_option("--dim", gc.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  g->add_option("--vocab", gc.vocab, "Vocabulary size")->check(CLI::PositiveNumber);
  g->add_option("--batch", gc.batch, "Batch size")->check(CLI::PositiveNumber);
  g->add_option("--classes", gc.classes, "Classes for the cross-entropy head")->check(CLI::Range(2, 64));

  GridArgs sweep_args;
  auto* s = app.add_subcommand("sweep", "Train over a grid of (k, x0) and rank by dev Spearman");
  s->add_option("--config", sweep_args.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--k", sweep_args.k, "k values")->required()->delimiter(',');
  s->add_option("--x0", sweep_args.x0, "x0 values")->required()->delimiter(',');
  auto* s_seed = s->add_option("--seed", seed_value, "Base seed; grid point i uses base + i");
  s->add_option("--out", sweep_args.out, "Output directory");
  s->add_option("--threads", sweep_args.threads, "Parallel grid points")->check(CLI::PositiveNumber);

  GridArgs ablate_args;
  auto* ab = app.add_subcommand("ablate", "Compare the uv, absdiff and uv_absdiff feature modes");
  ab->add_option("--config", ablate_args.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  auto* ab_seed = ab->add_option("--seed", seed_value, "Override the config seed");
  ab->add_option("--out", ablate_args.out, "Output directory");
  ab->add_option("--threads", ablate_args.threads, "Parallel runs")->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "Generate a synthetic corpus");
  sy->add_option("--kind", synth.kind, "ordinal (4 relevance levels), nli or continuous");
  sy->add_option("--out", synth.out, "TSV to write")->required();
  sy->add_option("--pairs", synth.options.pairs, "Number of pairs");
  sy->add_option("--length", synth.options.sentence_length, "Words per sentence");
  sy->add_option("--shared-step", synth.options.shared_step, "Extra shared words per class");
  sy->add_option("--pool", synth.options.word_pool, "Word pool size");
  sy->add_option("--seed", synth.options.seed, "Pair sampling seed");
  sy->add_option("--pool-seed", synth.options.pool_seed, "Word pool seed (share across splits)");

  std::vector<const char*> argv{"stsreg"};
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& pe) {
      const int code = app.exit(pe, out, err);
      return code == 0 ? kOk : kValidation;
    }
    if (*t_seed) train_args.seed = seed_value;
    if (*s_seed) sweep_args.seed = seed_value;
    if (*ab_seed) ablate_args.seed = seed_value;

    if (f->parsed()) return cmd_filter_data(filter, out);
    if (t->parsed()) return cmd_train(train_args, out);
    if (e->parsed()) return cmd_eval(eval_args, out);
    if (g->parsed()) return cmd_gradcheck(gc, out);
    if (s->parsed()) return cmd_sweep(sweep_args, out, err);
    if (ab->parsed()) return cmd_ablate(ablate_args, out);
    if (sy->parsed()) return cmd_synth(synth, out);
    return kValidation;
  } catch (const InvalidInput& ex) {
    err << "error: " << ex.what() << "\n";
    return kValidation;
  } catch (const stsreg::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kValidation;
  } catch (const ShapeError& ex) {
    err << "error: " << ex.what() << "\n";
    return kValidation;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kRuntime;
  }
}

}  // namespace stsreg::cli

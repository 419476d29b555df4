// symrel — command-line driver for corpus generation, training and evaluation.
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "symrel/error.hpp"
#include "symrel/harness.hpp"
#include "symrel/io.hpp"

namespace fs = std::filesystem;
using namespace symrel;

namespace {

constexpr const char* kProbeRow = "untrained-probe";

struct Options {
  std::optional<std::uint64_t> seed;
  std::string config_file;
  std::string out = "symrel-out";
  std::map<std::string, std::string> overrides;  // RunConfig key -> raw value

  // generate
  std::size_t entities = 200;
  std::size_t per_relation = 50;
  std::size_t proxy_size = 1000;
  std::string triples;

  // eval / report
  std::string model_dir;
  std::vector<std::string> inputs;
  std::string format = "table";
  bool timing = false;
};

RunConfig resolve_config(const Options& opt) {
  RunConfig cfg;
  if (!opt.config_file.empty()) cfg = parse_run_config(read_file(opt.config_file), cfg);
  for (const auto& [key, value] : opt.overrides) apply_config_value(cfg, key, value);
  if (opt.seed) cfg.seed = *opt.seed;
  if (cfg.lexicalized.empty()) cfg.lexicalized = (fs::path(opt.out) / "corpus").string();
  if (cfg.proxy.empty() && fs::exists(fs::path(opt.out) / "proxy" / "proxy.train.jsonl")) {
    cfg.proxy = (fs::path(opt.out) / "proxy").string();
  }
  cfg.validate();
  return cfg;
}

void write_manifest(const Options& opt, const RunConfig& cfg, std::string_view command,
                    const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config_hash"] = config_hash(cfg);
  m["config"] = format_run_config(cfg);
  m["format_versions"] = {{"corpus", 1}, {"encoder", 1}, {"store", 1}, {"report", 1}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_file(fs::path(opt.out) / ("manifest." + std::string(command) + ".json"), m.dump(2) + "\n");
}

Corpus load_bench_corpus(const RunConfig& cfg) {
  Corpus corpus = load_corpus(cfg.lexicalized);
  if (!cfg.delexicalized.empty()) corpus.delexicalized = load_corpus(cfg.delexicalized).delexicalized;
  return corpus;
}

Benchmark load_benchmark(const RunConfig& cfg, bool need_proxy) {
  const Corpus corpus = load_bench_corpus(cfg);
  if (cfg.proxy.empty()) {
    if (need_proxy) throw DataError("no proxy corpus: pass --proxy or run generate first");
    return make_benchmark(corpus);
  }
  const ProxyCorpus proxy = load_proxy_corpus(cfg.proxy);
  return make_benchmark(corpus, &proxy);
}

void write_rows(const fs::path& path, const std::vector<EvalReport>& rows) {
  write_file(path, render_report(rows, ReportFormat::Json));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_generate(const Options& opt) {
  RunConfig cfg = resolve_config(opt);
  GenerateConfig g;
  g.seed = cfg.seed;
  g.split.seed = cfg.seed;
  g.n_entities = opt.entities;
  g.per_relation = opt.per_relation;
  if (!opt.triples.empty()) g.triples_path = opt.triples;
  const Corpus corpus = generate_corpus(g);
  const fs::path out(opt.out);
  write_corpus(out / "corpus", corpus);
  write_proxy_corpus(out / "proxy", make_proxy_corpus(cfg.seed, opt.proxy_size));
  write_manifest(opt, cfg, "generate", {{"corpus", nlohmann::json::parse(corpus.manifest)}});
  std::cout << "wrote corpus to " << (out / "corpus").string() << " and proxy task to "
            << (out / "proxy").string() << "\n";
  return 0;
}

int cmd_train(const Options& opt) {
  const RunConfig cfg = resolve_config(opt);
  const Benchmark bench = load_benchmark(cfg, false);
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train(cfg, bench);
  const fs::path out(opt.out);
  save_model(out / "model", r.model, bench.vocab);
  write_file(out / "train.log.jsonl", r.log);
  nlohmann::ordered_json extra;
  extra["epochs"] = r.model.epochs;
  extra["steps"] = r.model.steps;
  extra["dev_accuracy"] = r.dev_accuracy;
  write_manifest(opt, cfg, "train", extra);
  std::cout << to_string(cfg.method) << ": " << r.model.epochs << " epochs, " << r.model.steps
            << " steps";
  if (!r.dev_accuracy.empty()) std::cout << ", dev accuracy " << r.dev_accuracy.back();
  if (opt.timing) std::cout << " (" << seconds_since(t0) << " s)";
  std::cout << "\n";
  return 0;
}

int cmd_eval(const Options& opt) {
  const RunConfig cfg = resolve_config(opt);
  const fs::path model_dir = opt.model_dir.empty() ? fs::path(opt.out) / "model" : fs::path(opt.model_dir);
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedModel loaded = load_model(model_dir);
  const Corpus corpus = load_bench_corpus(cfg);
  EvalReport row;
  row.method = std::string(to_string(loaded.model.method));
  row.seed = cfg.seed;
  row.accuracy_lexicalized =
      evaluate(loaded.model, tokenize_examples(corpus.lexicalized.test, loaded.vocab));
  row.accuracy_delexicalized =
      evaluate(loaded.model, tokenize_examples(corpus.delexicalized.test, loaded.vocab));
  if (opt.timing) row.wall_time = seconds_since(t0);
  write_rows(fs::path(opt.out) / ("eval." + row.method + ".json"), {row});
  write_manifest(opt, cfg, "eval");
  std::cout << render_report(std::vector<EvalReport>{row}, ReportFormat::Table);
  return 0;
}

int cmd_fewshot(const Options& opt) {
  const RunConfig cfg = resolve_config(opt);
  const Benchmark bench = load_benchmark(cfg, false);
  const auto t0 = std::chrono::steady_clock::now();
  const FewShotResult r = measure_few_shot(cfg, bench, kDefaultFewShotSchedule);
  EvalReport row;
  row.method = std::string(to_string(cfg.method));
  row.seed = cfg.seed;
  row.training_samples_used = r.samples;
  if (opt.timing) row.wall_time = seconds_since(t0);
  write_rows(fs::path(opt.out) / ("fewshot." + row.method + ".json"), {row});
  nlohmann::ordered_json curve = nlohmann::ordered_json::array();
  for (const auto& p : r.curve) curve.push_back({{"samples", p.samples}, {"accuracy", p.accuracy}});
  write_manifest(opt, cfg, "fewshot", {{"curve", curve}});
  for (const auto& p : r.curve) std::cout << p.samples << "\t" << p.accuracy << "\n";
  if (!r.samples) std::cout << "target " << cfg.accuracy_target << " not reached within schedule\n";
  return 0;
}

int cmd_forget(const Options& opt) {
  const RunConfig cfg = resolve_config(opt);
  const Benchmark bench = load_benchmark(cfg, true);
  const auto t0 = std::chrono::steady_clock::now();
  const ForgettingResult r = measure_forgetting(cfg, bench);
  EvalReport row;
  row.method = std::string(to_string(cfg.method));
  row.seed = cfg.seed;
  row.forgetting_delta = r.delta;
  if (opt.timing) row.wall_time = seconds_since(t0);
  write_rows(fs::path(opt.out) / ("forget." + row.method + ".json"), {row});
  write_manifest(opt, cfg, "forget",
                 {{"proxy_before", r.proxy_before},
                  {"proxy_after", r.proxy_after},
                  {"symmetry_steps", r.symmetry_steps}});
  std::cout << "proxy accuracy " << r.proxy_before << " -> " << r.proxy_after << ", delta "
            << r.delta << (r.improved() ? " (improved)" : "") << " after " << r.symmetry_steps
            << " symmetry steps\n";
  return 0;
}

int cmd_probe(const Options& opt) {
  const RunConfig cfg = resolve_config(opt);
  const Benchmark bench = load_benchmark(cfg, false);
  const auto t0 = std::chrono::steady_clock::now();
  TrainedModel model;
  model.method = MethodId::KnnFixed;
  model.encoder = init_params(cfg.seed, cfg.d, bench.vocab.size(), cfg.init_scale);
  model.k = 1;
  model.store = build_store(bench.train, model.encoder, StoreMode::Fixed);
  EvalReport row;
  row.method = kProbeRow;
  row.seed = cfg.seed;
  row.accuracy_lexicalized = evaluate(model, bench.test_lexicalized);
  row.accuracy_delexicalized = evaluate(model, bench.test_delexicalized);
  if (opt.timing) row.wall_time = seconds_since(t0);
  write_rows(fs::path(opt.out) / "probe.json", {row});
  write_manifest(opt, cfg, "probe");
  std::cout << render_report(std::vector<EvalReport>{row}, ReportFormat::Table);
  return 0;
}

// Merges row fragments (eval / fewshot / forget / probe) into one row per method.
int cmd_report(const Options& opt) {
  const RunConfig cfg = resolve_config(opt);
  std::vector<fs::path> files;
  for (const auto& s : opt.inputs) files.emplace_back(s);
  if (files.empty()) {
    for (const auto& entry : fs::directory_iterator(opt.out)) {
      const auto name = entry.path().filename().string();
      if (name.ends_with(".json") && !name.starts_with("manifest") && !name.starts_with("report")) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw DataError("report: no result files found under " + opt.out);

  std::vector<EvalReport> rows;
  for (const auto& f : files) {
    for (auto& r : parse_report(read_file(f))) {
      auto it = std::find_if(rows.begin(), rows.end(),
                             [&](const EvalReport& x) { return x.method == r.method; });
      if (it == rows.end()) {
        rows.push_back(std::move(r));
        continue;
      }
      if (r.accuracy_lexicalized) it->accuracy_lexicalized = r.accuracy_lexicalized;
      if (r.accuracy_delexicalized) it->accuracy_delexicalized = r.accuracy_delexicalized;
      if (r.training_samples_used) it->training_samples_used = r.training_samples_used;
      if (r.forgetting_delta) it->forgetting_delta = r.forgetting_delta;
      if (r.wall_time) it->wall_time = it->wall_time.value_or(0.0) + *r.wall_time;
    }
  }
  // Table order: probe baseline first, then the four methods.
  const auto rank = [](const std::string& m) {
    if (m == kProbeRow) return 0;
    for (std::size_t i = 0; i < kMethods.size(); ++i) {
      if (to_string(kMethods[i]) == m) return static_cast<int>(i) + 1;
    }
    return 99;
  };
  std::stable_sort(rows.begin(), rows.end(),
                   [&](const auto& a, const auto& b) { return rank(a.method) < rank(b.method); });

  const fs::path out(opt.out);
  write_file(out / "report.json", render_report(rows, ReportFormat::Json));
  write_file(out / "report.md", render_report(rows, ReportFormat::Table));
  write_manifest(opt, cfg, "report");
  std::cout << render_report(rows, opt.format == "json" ? ReportFormat::Json : ReportFormat::Table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symrel: symmetric/antisymmetric relation NLI benchmark and training harness"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kVersion));

  Options opt;
  app.add_option("--seed", opt.seed, "Random seed (overrides the config file)");
  app.add_option("--config", opt.config_file, "Key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", opt.out, "Output directory")->capture_default_str();

  const std::vector<std::pair<std::string, std::string>> cfg_flags = {
      {"method", "random-label | knn-fixed | knn-learnt | fine-tune"},
      {"d", "Embedding dimension"},
      {"lr", "Adam learning rate"},
      {"batch_size", "Mini-batch size"},
      {"margin", "Hinge margin"},
      {"k", "Neighbours for k-NN"},
      {"max_epochs", "Epoch limit"},
      {"accuracy_target", "Dev accuracy that stops training"},
      {"init_scale", "Half-width of the uniform parameter init"},
      {"lexicalized", "Corpus directory (default <out>/corpus)"},
      {"delexicalized", "Corpus directory for delexicalized splits"},
      {"proxy", "Proxy corpus directory (default <out>/proxy)"},
  };
  for (const auto& [key, help] : cfg_flags) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    app.add_option_function<std::string>(
        flag, [&opt, key = key](const std::string& v) { opt.overrides[key] = v; }, help);
  }
  app.add_flag("--timing", opt.timing, "Record wall time in result rows");

  auto* generate = app.add_subcommand("generate", "Generate the corpus, proxy task and manifest");
  generate->add_option("--entities", opt.entities, "Synthetic entity count")->capture_default_str();
  generate->add_option("--per-relation", opt.per_relation, "Triples per relation")->capture_default_str();
  generate->add_option("--proxy-size", opt.proxy_size, "Proxy task examples")->capture_default_str();
  generate->add_option("--triples", opt.triples, "Read triples from a 5-column TSV file instead");

  auto* train_cmd = app.add_subcommand("train", "Train one method");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model on both test splits");
  eval_cmd->add_option("--model", opt.model_dir, "Model directory (default <out>/model)");
  auto* fewshot = app.add_subcommand("fewshot", "Smallest training-set size reaching the target");
  auto* forget = app.add_subcommand("forget", "Proxy-task forgetting delta");
  auto* probe = app.add_subcommand("probe", "Untrained encoder with a 1-NN probe");
  auto* report = app.add_subcommand("report", "Merge result files into a table");
  report->add_option("inputs", opt.inputs, "Result files (default: all under --out)");
  report->add_option("--format", opt.format, "table | json")
      ->check(CLI::IsMember({"table", "json"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*generate) return cmd_generate(opt);
    if (*train_cmd) return cmd_train(opt);
    if (*eval_cmd) return cmd_eval(opt);
    if (*fewshot) return cmd_fewshot(opt);
    if (*forget) return cmd_forget(opt);
    if (*probe) return cmd_probe(opt);
    if (*report) return cmd_report(opt);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

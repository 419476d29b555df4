#pragma once

// Experiment driver: trains the four methods, measures accuracy, few-shot
// sample counts and forgetting, and renders the comparison table.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "symrel/classifiers.hpp"
#include "symrel/dataset.hpp"
#include "symrel/encoder.hpp"
#include "symrel/objectives.hpp"

namespace symrel {

inline constexpr std::string_view kVersion = "1.0.0";

enum class MethodId { RandomLabel, KnnFixed, KnnLearnt, FineTune };

inline constexpr std::array<MethodId, 4> kMethods = {MethodId::RandomLabel, MethodId::KnnFixed,
                                                     MethodId::KnnLearnt, MethodId::FineTune};

std::string_view to_string(MethodId m);
MethodId parse_method(std::string_view s);

struct RunConfig {
  MethodId method = MethodId::KnnFixed;
  std::uint64_t seed = 13;
  std::size_t d = 32;
  double lr = 2e-5;
  std::size_t batch_size = 16;
  double margin = 0.5;
  std::size_t k = 3;
  std::size_t max_epochs = 50;
  double accuracy_target = 0.99;
  double init_scale = 0.1;
  std::string lexicalized;    // corpus directory holding both modes
  std::string delexicalized;  // optional override for the delexicalized splits
  std::string proxy;          // proxy corpus directory

  // Throws UsageError on out-of-range values.
  void validate() const;
};

// Flat "key = value" text; '#' starts a comment. Unknown keys are errors.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
void apply_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string format_run_config(const RunConfig& cfg);
// FNV-1a of format_run_config, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

// ---------------------------------------------------------------------------

struct ProxyCorpus {
  std::vector<NliExample> train;
  std::vector<NliExample> dev;
  std::vector<NliExample> test;
};

inline constexpr std::string_view kNegationToken = "not";

// Two-class stand-in task: entailment hypotheses restate an ordered subset
// of the premise words, contradictions additionally start with "not".
// Vocabulary is disjoint from synthetic entity labels. Requires n >= 100.
ProxyCorpus make_proxy_corpus(std::uint64_t seed, std::size_t n);
void write_proxy_corpus(const std::filesystem::path& dir, const ProxyCorpus& proxy);
ProxyCorpus load_proxy_corpus(const std::filesystem::path& dir);

// Tokenized views of the corpora sharing one vocabulary. The vocabulary
// covers every split (only token identities, never labels), so held-out
// entities keep distinct, untrained embeddings rather than collapsing to UNK.
struct Benchmark {
  Vocabulary vocab;
  std::vector<NliExample> train_examples;  // lexicalized train, with metadata
  std::vector<TokenizedPair> train;
  std::vector<TokenizedPair> dev;
  std::vector<TokenizedPair> test_lexicalized;
  std::vector<TokenizedPair> test_delexicalized;
  std::vector<TokenizedPair> proxy_train;
  std::vector<TokenizedPair> proxy_dev;
  std::vector<TokenizedPair> proxy_test;
};

Benchmark make_benchmark(const Corpus& corpus, const ProxyCorpus* proxy = nullptr);
std::vector<TokenizedPair> tokenize_examples(std::span<const NliExample> examples,
                                             const Vocabulary& vocab);

// ---------------------------------------------------------------------------

struct TrainedModel {
  MethodId method = MethodId::KnnFixed;
  EncoderParams encoder;
  std::optional<LabelEmbeddingBank> bank;  // random-label
  std::optional<LabelStore> store;         // knn-fixed, knn-learnt
  std::optional<HeadParams> head;          // fine-tune
  std::size_t k = 3;
  std::size_t training_samples = 0;
  std::size_t epochs = 0;
  long steps = 0;
};

struct TrainResult {
  TrainedModel model;
  std::string log;  // one JSON record per optimizer step
  std::vector<double> dev_accuracy;
};

// Runs the method's objective with Adam until dev accuracy reaches the target
// for two consecutive epochs or max_epochs is hit. Only encoder parameters are
// updated, plus the head for fine-tune. Throws DivergenceError on a
// non-finite loss or gradient.
TrainResult train(const RunConfig& cfg, const EncoderParams& initial,
                  std::span<const TokenizedPair> train_set, std::span<const TokenizedPair> dev_set);
// Starts from init_params(cfg.seed, cfg.d, |V|, cfg.init_scale).
TrainResult train(const RunConfig& cfg, const Benchmark& bench);

// Inference through the method's own probing path.
Label predict(const TrainedModel& model, const TokenizedPair& sample);
// Throws DataError on an empty corpus.
double evaluate(const TrainedModel& model, std::span<const TokenizedPair> test);

// Seeded subset alternating labels, round-robin over relations within a label.
std::vector<std::size_t> balanced_subset(std::span<const NliExample> examples, std::size_t n,
                                         std::uint64_t seed);

inline constexpr std::array<std::size_t, 11> kDefaultFewShotSchedule = {
    8, 16, 32, 48, 64, 96, 128, 192, 256, 400, 512};

struct FewShotPoint {
  std::size_t samples = 0;
  double accuracy = 0.0;
};

struct FewShotResult {
  std::optional<std::size_t> samples;  // first schedule entry meeting the target
  std::vector<FewShotPoint> curve;
};

// Throws UsageError unless the schedule is non-empty and strictly increasing.
FewShotResult measure_few_shot(const RunConfig& cfg, const Benchmark& bench,
                               std::span<const std::size_t> schedule);

struct ForgettingResult {
  double proxy_before = 0.0;
  double proxy_after = 0.0;
  double delta = 0.0;  // before - after; negative means the proxy task improved
  long symmetry_steps = 0;
  bool improved() const { return delta < 0.0; }
};

struct ProxyModel {
  EncoderParams encoder;
  HeadParams head;
  double accuracy = 0.0;
};

// Trains encoder + proxy head with cross-entropy on the proxy task.
ProxyModel train_proxy(const RunConfig& cfg, const Benchmark& bench);
double proxy_accuracy(const EncoderParams& encoder, const HeadParams& head,
                      std::span<const TokenizedPair> test);

// Proxy accuracy below this is treated as a failure to learn the proxy task.
inline constexpr double kProxyMinimumAccuracy = 0.6;

// Train proxy -> symmetry-train with cfg.method -> re-test the frozen proxy
// head. Throws DataError if the proxy task was not learned.
ForgettingResult measure_forgetting(const RunConfig& cfg, const Benchmark& bench);
ForgettingResult measure_forgetting(const RunConfig& cfg, const Benchmark& bench,
                                    const ProxyModel& proxy);

// ---------------------------------------------------------------------------

struct EvalReport {
  std::string method;  // a method id or "untrained-probe"
  std::optional<double> accuracy_lexicalized;
  std::optional<double> accuracy_delexicalized;
  std::optional<std::size_t> training_samples_used;
  std::optional<double> forgetting_delta;
  std::uint64_t seed = 0;
  std::optional<double> wall_time;  // seconds; excluded from rendered files unless set

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

enum class ReportFormat { Json, Table };

std::string render_report(std::span<const EvalReport> reports, ReportFormat format);
std::vector<EvalReport> parse_report(std::string_view json);

// Model directories: encoder.json, model.json and bank/store/head files.
void save_model(const std::filesystem::path& dir, const TrainedModel& model,
                const Vocabulary& vocab);
struct LoadedModel {
  TrainedModel model;
  Vocabulary vocab;
};
LoadedModel load_model(const std::filesystem::path& dir);

}  // namespace symrel

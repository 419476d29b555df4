#include "symrel/harness.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "symrel/error.hpp"
#include "symrel/io.hpp"
#include "symrel/random.hpp"

namespace symrel {

std::string_view to_string(MethodId m) {
  switch (m) {
    case MethodId::RandomLabel:
      return "random-label";
    case MethodId::KnnFixed:
      return "knn-fixed";
    case MethodId::KnnLearnt:
      return "knn-learnt";
    case MethodId::FineTune:
      return "fine-tune";
  }
  return "?";
}

MethodId parse_method(std::string_view s) {
  for (MethodId m : kMethods) {
    if (to_string(m) == s) return m;
  }
  throw UsageError("unknown method '" + std::string(s) +
                   "' (expected random-label, knn-fixed, knn-learnt or fine-tune)");
}

// ---------------------------------------------------------------------------
// Configuration

void RunConfig::validate() const {
  if (!(lr > 0)) throw UsageError("lr must be positive");
  if (d == 0) throw UsageError("d must be >= 1");
  if (batch_size == 0) throw UsageError("batch_size must be >= 1");
  if (k == 0) throw UsageError("k must be >= 1");
  if (!(accuracy_target >= 0 && accuracy_target <= 1)) {
    throw UsageError("accuracy_target must lie in [0, 1]");
  }
  if (!(init_scale >= 0)) throw UsageError("init_scale must be non-negative");
  MarginConfig{margin}.validate();
}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw UsageError("config: bad value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void apply_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "method") {
    cfg.method = parse_method(value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "d") {
    cfg.d = parse_number<std::size_t>(key, value);
  } else if (key == "lr") {
    cfg.lr = parse_number<double>(key, value);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "margin") {
    cfg.margin = parse_number<double>(key, value);
  } else if (key == "k") {
    cfg.k = parse_number<std::size_t>(key, value);
  } else if (key == "max_epochs") {
    cfg.max_epochs = parse_number<std::size_t>(key, value);
  } else if (key == "accuracy_target") {
    cfg.accuracy_target = parse_number<double>(key, value);
  } else if (key == "init_scale") {
    cfg.init_scale = parse_number<double>(key, value);
  } else if (key == "lexicalized") {
    cfg.lexicalized = std::string(value);
  } else if (key == "delexicalized") {
    cfg.delexicalized = std::string(value);
  } else if (key == "proxy") {
    cfg.proxy = std::string(value);
  } else {
    throw UsageError("config: unknown key '" + std::string(key) + "'");
  }
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_config_value(base, trim(std::string_view(t).substr(0, eq)),
                       trim(std::string_view(t).substr(eq + 1)));
  }
  return base;
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out;
  out += "method = " + std::string(to_string(cfg.method)) + "\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  out += "d = " + std::to_string(cfg.d) + "\n";
  out += "lr = " + format_double(cfg.lr) + "\n";
  out += "batch_size = " + std::to_string(cfg.batch_size) + "\n";
  out += "margin = " + format_double(cfg.margin) + "\n";
  out += "k = " + std::to_string(cfg.k) + "\n";
  out += "max_epochs = " + std::to_string(cfg.max_epochs) + "\n";
  out += "accuracy_target = " + format_double(cfg.accuracy_target) + "\n";
  out += "init_scale = " + format_double(cfg.init_scale) + "\n";
  if (!cfg.lexicalized.empty()) out += "lexicalized = " + cfg.lexicalized + "\n";
  if (!cfg.delexicalized.empty()) out += "delexicalized = " + cfg.delexicalized + "\n";
  if (!cfg.proxy.empty()) out += "proxy = " + cfg.proxy + "\n";
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : format_run_config(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Proxy task

namespace {

// Letters j, q, w, x, z never occur in synthetic entity labels.
std::vector<std::string> proxy_lexicon(Rng& rng, std::size_t n) {
  static constexpr std::string_view onsets = "jqwxz";
  static constexpr std::string_view vowels = "aeiou";
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < n) {
    std::string w;
    for (int s = 0; s < 2; ++s) {
      w += onsets[rng.below(onsets.size())];
      w += vowels[rng.below(vowels.size())];
    }
    if (seen.insert(w).second) words.push_back(w);
  }
  return words;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) s += ' ';
    s += words[i];
  }
  return s;
}

}  // namespace

ProxyCorpus make_proxy_corpus(std::uint64_t seed, std::size_t n) {
  if (n < 100) throw UsageError("make_proxy_corpus: n must be >= 100");
  Rng rng = Rng::derive(seed, 0x70726f78);
  auto lexicon = proxy_lexicon(rng, 60);
  // Function words shared with the relation templates, as in real NLI text.
  for (const char* w : {"is", "a", "of", "the", "to", "in", "with", "an", "for", "that", "are"}) {
    lexicon.emplace_back(w);
  }

  std::vector<NliExample> all;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 5 + rng.below(4);
    std::vector<std::string> premise;
    for (std::size_t t = 0; t < len; ++t) premise.push_back(lexicon[rng.below(lexicon.size())]);

    const std::size_t keep = 2 + rng.below(3);
    std::vector<std::size_t> positions(len);
    for (std::size_t t = 0; t < len; ++t) positions[t] = t;
    rng.shuffle(std::span(positions));
    positions.resize(keep);
    std::sort(positions.begin(), positions.end());
    std::vector<std::string> hypothesis;
    const Label label = i % 2 == 0 ? Label::Entailment : Label::Contradiction;
    if (label == Label::Contradiction) hypothesis.emplace_back(kNegationToken);
    for (std::size_t p : positions) hypothesis.push_back(premise[p]);

    all.push_back({join_words(premise), join_words(hypothesis), label, "proxy",
                   Mode::Lexicalized, "", ""});
  }
  rng.shuffle(std::span(all));
  ProxyCorpus out;
  const std::size_t n_train = n * 7 / 10;
  const std::size_t n_dev = n / 10;
  out.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.dev.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train),
                 all.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
  out.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), all.end());
  return out;
}

void write_proxy_corpus(const std::filesystem::path& dir, const ProxyCorpus& proxy) {
  write_file(dir / "proxy.train.jsonl", to_jsonl(proxy.train));
  write_file(dir / "proxy.dev.jsonl", to_jsonl(proxy.dev));
  write_file(dir / "proxy.test.jsonl", to_jsonl(proxy.test));
}

ProxyCorpus load_proxy_corpus(const std::filesystem::path& dir) {
  return {parse_jsonl(read_file(dir / "proxy.train.jsonl")),
          parse_jsonl(read_file(dir / "proxy.dev.jsonl")),
          parse_jsonl(read_file(dir / "proxy.test.jsonl"))};
}

// ---------------------------------------------------------------------------

std::vector<TokenizedPair> tokenize_examples(std::span<const NliExample> examples,
                                             const Vocabulary& vocab) {
  std::vector<TokenizedPair> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back({vocab.tokenize(ex.premise), vocab.tokenize(ex.hypothesis), ex.label});
  }
  return out;
}

Benchmark make_benchmark(const Corpus& corpus, const ProxyCorpus* proxy) {
  std::vector<std::string> texts;
  const auto collect = [&](const std::vector<NliExample>& v) {
    for (const auto& ex : v) {
      texts.push_back(ex.premise);
      texts.push_back(ex.hypothesis);
    }
  };
  for (Mode mode : kModes) {
    const auto& s = corpus.splits(mode);
    collect(s.train);
    collect(s.dev);
    collect(s.test);
  }
  if (proxy != nullptr) {
    collect(proxy->train);
    collect(proxy->dev);
    collect(proxy->test);
  }
  Benchmark b;
  b.vocab = Vocabulary::build(texts);
  b.train_examples = corpus.lexicalized.train;
  b.train = tokenize_examples(corpus.lexicalized.train, b.vocab);
  b.dev = tokenize_examples(corpus.lexicalized.dev, b.vocab);
  b.test_lexicalized = tokenize_examples(corpus.lexicalized.test, b.vocab);
  b.test_delexicalized = tokenize_examples(corpus.delexicalized.test, b.vocab);
  if (proxy != nullptr) {
    b.proxy_train = tokenize_examples(proxy->train, b.vocab);
    b.proxy_dev = tokenize_examples(proxy->dev, b.vocab);
    b.proxy_test = tokenize_examples(proxy->test, b.vocab);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Training

namespace {

StoreMode store_mode(MethodId m) {
  return m == MethodId::KnnLearnt ? StoreMode::Learnt : StoreMode::Fixed;
}

bool uses_store(MethodId m) { return m == MethodId::KnnFixed || m == MethodId::KnnLearnt; }

void finalize_store(TrainedModel& model, std::span<const TokenizedPair> train_set) {
  if (uses_store(model.method)) {
    model.store = build_store(train_set, model.encoder, store_mode(model.method));
  }
}

}  // namespace

Label predict(const TrainedModel& model, const TokenizedPair& sample) {
  switch (model.method) {
    case MethodId::RandomLabel:
      return classify_nearest_label(embed(model.encoder, sample.premise),
                                    embed(model.encoder, sample.hypothesis), model.bank.value());
    case MethodId::KnnFixed:
    case MethodId::KnnLearnt:
      return knn_classify(sample_label(model.encoder, sample, store_mode(model.method)),
                          model.store.value(), {model.k});
    case MethodId::FineTune:
      return classify_head(model.head.value(), embed(model.encoder, sample.premise),
                           embed(model.encoder, sample.hypothesis));
  }
  throw UsageError("predict: unknown method");
}

double evaluate(const TrainedModel& model, std::span<const TokenizedPair> test) {
  if (test.empty()) throw DataError("evaluate: empty test corpus");
  std::size_t correct = 0;
  for (const auto& s : test) {
    if (predict(model, s) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

TrainResult train(const RunConfig& cfg, const EncoderParams& initial,
                  std::span<const TokenizedPair> train_set,
                  std::span<const TokenizedPair> dev_set) {
  cfg.validate();
  initial.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  if (initial.dim != cfg.d) throw DimensionError("train: encoder dimension differs from config d");

  TrainResult result;
  TrainedModel& model = result.model;
  model.method = cfg.method;
  model.encoder = initial;
  model.k = std::min(cfg.k, train_set.size());
  model.training_samples = train_set.size();
  if (cfg.method == MethodId::RandomLabel) model.bank = init_label_bank(cfg.seed, cfg.d);
  if (cfg.method == MethodId::FineTune) model.head = HeadParams::init(cfg.seed, cfg.d, cfg.init_scale);

  const MarginConfig margin{cfg.margin};
  const AdamConfig adam{cfg.lr};
  AdamState enc_state = AdamState::for_shapes(std::as_const(model.encoder).tensors());
  AdamState head_state;
  if (model.head) head_state = AdamState::for_shapes(std::as_const(*model.head).tensors());

  std::array<std::vector<std::size_t>, 2> by_label;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    by_label[ordinal(train_set[i].label)].push_back(i);
  }
  Rng rng = Rng::derive(cfg.seed, 0x747261696e);
  // Partner for the pairwise objectives: even batch slots draw a same-label
  // partner, odd slots a different-label one (1:1 balance).
  const auto partner = [&](std::size_t anchor, std::size_t slot) {
    const Label want = slot % 2 == 0 ? train_set[anchor].label : other(train_set[anchor].label);
    const auto& pool = by_label[ordinal(want)].empty() ? by_label[ordinal(other(want))]
                                                       : by_label[ordinal(want)];
    if (pool.size() == 1) return pool[0];
    std::size_t j = pool[rng.below(pool.size())];
    while (j == anchor) j = pool[rng.below(pool.size())];
    return j;
  };

  std::vector<std::size_t> order(train_set.size());
  std::size_t consecutive = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span(order));

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      auto grads = ParamGradients::zeros_like(model.encoder);
      std::optional<HeadGradients> head_grads;
      if (model.head) head_grads = HeadGradients::zeros_like(*model.head);

      double loss = 0.0;
      // overflowing parameters surface as NumericError in the forward pass
      try {
        for (std::size_t b = start; b < end; ++b) {
          const auto& ex = train_set[order[b]];
          switch (cfg.method) {
            case MethodId::RandomLabel:
              loss += weight * random_label_term(model.encoder, ex, *model.bank, margin, &grads, weight);
              break;
            case MethodId::KnnFixed:
              loss += weight * pairwise_fixed_term(model.encoder, ex,
                                                   train_set[partner(order[b], b - start)], margin,
                                                   &grads, weight);
              break;
            case MethodId::KnnLearnt:
              loss += weight * pairwise_learnt_term(model.encoder, ex,
                                                    train_set[partner(order[b], b - start)], margin,
                                                    &grads, weight);
              break;
            case MethodId::FineTune:
              loss += weight * cross_entropy_term(model.encoder, *model.head, ex, &grads,
                                                  &*head_grads, weight);
              break;
          }
        }
      } catch (const NumericError& e) {
        throw DivergenceError(e.what(), model.steps + 1);
      }
      const long step = model.steps + 1;
      if (!std::isfinite(loss)) throw DivergenceError("non-finite training loss", step);

      double grad_sq = std::pow(grads.norm(), 2);
      if (head_grads) {
        for (auto t : head_grads->tensors()) {
          for (double v : t) grad_sq += v * v;
        }
      }
      adam_step(model.encoder.tensors(), std::as_const(grads).tensors(), enc_state, adam);
      if (model.head) adam_step(model.head->tensors(), head_grads->tensors(), head_state, adam);
      model.steps = step;

      nlohmann::ordered_json rec;
      rec["step"] = step;
      rec["epoch"] = epoch;
      rec["objective"] = to_string(cfg.method);
      rec["loss"] = loss;
      rec["grad_norm"] = std::sqrt(grad_sq);
      rec["seed"] = cfg.seed;
      result.log += rec.dump();
      result.log += '\n';
    }
    model.epochs = epoch;

    if (!dev_set.empty()) {
      finalize_store(model, train_set);
      const double acc = evaluate(model, dev_set);
      result.dev_accuracy.push_back(acc);
      consecutive = acc >= cfg.accuracy_target ? consecutive + 1 : 0;
      if (consecutive >= 2) break;
    }
  }
  finalize_store(model, train_set);
  return result;
}

TrainResult train(const RunConfig& cfg, const Benchmark& bench) {
  const auto init = init_params(cfg.seed, cfg.d, bench.vocab.size(), cfg.init_scale);
  return train(cfg, init, bench.train, bench.dev);
}

// ---------------------------------------------------------------------------
// Few-shot

std::vector<std::size_t> balanced_subset(std::span<const NliExample> examples, std::size_t n,
                                         std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0x66657773);
  // bucket[label][property] -> shuffled example indices
  std::array<std::map<std::string, std::vector<std::size_t>>, 2> buckets;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    buckets[ordinal(examples[i].label)][examples[i].property_id].push_back(i);
  }
  std::array<std::vector<std::vector<std::size_t>*>, 2> rotation;
  for (std::size_t c = 0; c < 2; ++c) {
    for (auto& [prop, idx] : buckets[c]) {
      rng.shuffle(std::span(idx));
      rotation[c].push_back(&idx);
    }
    rng.shuffle(std::span(rotation[c]));
  }
  std::array<std::size_t, 2> cursor{};
  std::array<std::size_t, 2> taken_rounds{};
  const auto take = [&](std::size_t c) -> std::optional<std::size_t> {
    auto& rot = rotation[c];
    for (std::size_t tries = 0; tries < rot.size(); ++tries) {
      auto* bucket = rot[cursor[c] % rot.size()];
      const std::size_t round = taken_rounds[c] / rot.size();
      ++cursor[c];
      ++taken_rounds[c];
      (void)round;
      if (!bucket->empty()) {
        const std::size_t i = bucket->back();
        bucket->pop_back();
        return i;
      }
    }
    return std::nullopt;
  };
  std::vector<std::size_t> out;
  std::size_t c = 0;
  while (out.size() < n) {
    auto pick = take(c);
    if (!pick) pick = take(1 - c);
    if (!pick) break;
    out.push_back(*pick);
    c = 1 - c;
  }
  return out;
}

FewShotResult measure_few_shot(const RunConfig& cfg, const Benchmark& bench,
                               std::span<const std::size_t> schedule) {
  if (schedule.empty()) throw UsageError("few-shot schedule is empty");
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (schedule[i] <= schedule[i - 1]) throw UsageError("few-shot schedule must be strictly increasing");
  }
  FewShotResult result;
  for (std::size_t n : schedule) {
    const auto idx = balanced_subset(bench.train_examples, n, cfg.seed);
    std::vector<TokenizedPair> subset;
    for (std::size_t i : idx) subset.push_back(bench.train[i]);
    const auto trained = train(cfg, init_params(cfg.seed, cfg.d, bench.vocab.size(), cfg.init_scale),
                               subset, bench.dev);
    const double acc = evaluate(trained.model, bench.test_lexicalized);
    result.curve.push_back({n, acc});
    if (acc >= cfg.accuracy_target) {
      result.samples = n;
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Forgetting

double proxy_accuracy(const EncoderParams& encoder, const HeadParams& head,
                      std::span<const TokenizedPair> test) {
  if (test.empty()) throw DataError("proxy_accuracy: empty proxy test split");
  std::size_t correct = 0;
  for (const auto& s : test) {
    if (classify_head(head, embed(encoder, s.premise), embed(encoder, s.hypothesis)) == s.label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

ProxyModel train_proxy(const RunConfig& cfg, const Benchmark& bench) {
  if (bench.proxy_train.empty() || bench.proxy_test.empty()) {
    throw DataError("forgetting: benchmark has no proxy task splits");
  }
  RunConfig proxy_cfg = cfg;
  proxy_cfg.method = MethodId::FineTune;
  proxy_cfg.seed = cfg.seed ^ 0x5052u;
  const auto init = init_params(cfg.seed, cfg.d, bench.vocab.size(), cfg.init_scale);
  auto trained = train(proxy_cfg, init, bench.proxy_train, bench.proxy_dev);
  ProxyModel pm{trained.model.encoder, *trained.model.head, 0.0};
  pm.accuracy = proxy_accuracy(pm.encoder, pm.head, bench.proxy_test);
  if (pm.accuracy < kProxyMinimumAccuracy) {
    throw DataError("proxy training reached only " + std::to_string(pm.accuracy) +
                    " accuracy; forgetting delta would be meaningless");
  }
  return pm;
}

ForgettingResult measure_forgetting(const RunConfig& cfg, const Benchmark& bench,
                                    const ProxyModel& proxy) {
  const auto trained = train(cfg, proxy.encoder, bench.train, bench.dev);
  ForgettingResult r;
  r.proxy_before = proxy.accuracy;
  r.proxy_after = proxy_accuracy(trained.model.encoder, proxy.head, bench.proxy_test);
  r.delta = r.proxy_before - r.proxy_after;
  r.symmetry_steps = trained.model.steps;
  return r;
}

ForgettingResult measure_forgetting(const RunConfig& cfg, const Benchmark& bench) {
  return measure_forgetting(cfg, bench, train_proxy(cfg, bench));
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string percent(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", *v * 100.0);
  return buf;
}

std::string forgetting_cell(std::optional<double> v) {
  if (!v) return "-";
  char buf[48];
  if (*v < 0) {
    std::snprintf(buf, sizeof(buf), "%.1f%% (improved)", *v * 100.0);
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f%%", *v * 100.0);
  }
  return buf;
}

template <typename T>
nlohmann::ordered_json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

template <typename T>
std::optional<T> json_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

std::string render_report(std::span<const EvalReport> reports, ReportFormat format) {
  if (format == ReportFormat::Json) {
    nlohmann::ordered_json doc;
    doc["format"] = "symrel-report";
    doc["version"] = 1;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
      nlohmann::ordered_json row;
      row["method"] = r.method;
      row["accuracy_lexicalized"] = optional_json(r.accuracy_lexicalized);
      row["accuracy_delexicalized"] = optional_json(r.accuracy_delexicalized);
      row["training_samples_used"] = optional_json(r.training_samples_used);
      row["forgetting_delta"] = optional_json(r.forgetting_delta);
      row["seed"] = r.seed;
      if (r.wall_time) row["wall_time"] = *r.wall_time;
      rows.push_back(std::move(row));
    }
    doc["rows"] = std::move(rows);
    return doc.dump(2) + "\n";
  }

  const std::array<std::string, 5> header = {"Model (Method)", "Accuracy (Lexicalized)",
                                             "Accuracy (Delexicalized)", "Training Samples",
                                             "Catastrophic Forgetting (delta)"};
  std::vector<std::array<std::string, 5>> rows;
  for (const auto& r : reports) {
    rows.push_back({r.method, percent(r.accuracy_lexicalized), percent(r.accuracy_delexicalized),
                    r.training_samples_used ? std::to_string(*r.training_samples_used) : "-",
                    forgetting_cell(r.forgetting_delta)});
  }
  std::array<std::size_t, 5> width{};
  for (std::size_t c = 0; c < 5; ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  const auto line = [&](const std::array<std::string, 5>& cells) {
    std::string s = "|";
    for (std::size_t c = 0; c < 5; ++c) {
      s += ' ' + cells[c] + std::string(width[c] - cells[c].size(), ' ') + " |";
    }
    return s + "\n";
  };
  std::string out = line(header);
  out += "|";
  for (std::size_t c = 0; c < 5; ++c) out += std::string(width[c] + 2, '-') + "|";
  out += "\n";
  for (const auto& row : rows) out += line(row);
  return out;
}

std::vector<EvalReport> parse_report(std::string_view json) {
  try {
    const auto doc = nlohmann::json::parse(json);
    if (doc.at("format") != "symrel-report") throw DataError("not a symrel report");
    std::vector<EvalReport> out;
    for (const auto& row : doc.at("rows")) {
      EvalReport r;
      r.method = row.at("method").get<std::string>();
      r.accuracy_lexicalized = json_optional<double>(row, "accuracy_lexicalized");
      r.accuracy_delexicalized = json_optional<double>(row, "accuracy_delexicalized");
      r.training_samples_used = json_optional<std::size_t>(row, "training_samples_used");
      r.forgetting_delta = json_optional<double>(row, "forgetting_delta");
      r.seed = row.at("seed").get<std::uint64_t>();
      r.wall_time = json_optional<double>(row, "wall_time");
      out.push_back(std::move(r));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Model directories

void save_model(const std::filesystem::path& dir, const TrainedModel& model,
                const Vocabulary& vocab) {
  save_checkpoint(dir / "encoder.json", model.encoder, vocab);
  nlohmann::ordered_json meta;
  meta["format"] = "symrel-model";
  meta["version"] = 1;
  meta["method"] = to_string(model.method);
  meta["k"] = model.k;
  meta["training_samples"] = model.training_samples;
  meta["epochs"] = model.epochs;
  meta["steps"] = model.steps;
  write_file(dir / "model.json", meta.dump(2) + "\n");
  if (model.bank) {
    nlohmann::ordered_json b;
    b["frozen"] = model.bank->frozen;
    for (Label l : kLabels) {
      const auto ph = (*model.bank)[l].phases();
      b[std::string(to_string(l))] = std::vector<double>(ph.begin(), ph.end());
    }
    write_file(dir / "bank.json", b.dump() + "\n");
  }
  if (model.store) save_store(dir / "store.json", *model.store);
  if (model.head) {
    nlohmann::ordered_json h;
    h["dim"] = model.head->dim;
    h["weight"] = model.head->weight;
    h["bias"] = model.head->bias;
    write_file(dir / "head.json", h.dump() + "\n");
  }
}

LoadedModel load_model(const std::filesystem::path& dir) {
  auto ck = load_checkpoint(dir / "encoder.json");
  LoadedModel out{TrainedModel{}, std::move(ck.vocab)};
  TrainedModel& m = out.model;
  m.encoder = std::move(ck.params);
  try {
    const auto meta = nlohmann::json::parse(read_file(dir / "model.json"));
    m.method = parse_method(meta.at("method").get<std::string>());
    m.k = meta.at("k").get<std::size_t>();
    m.training_samples = meta.at("training_samples").get<std::size_t>();
    m.epochs = meta.at("epochs").get<std::size_t>();
    m.steps = meta.at("steps").get<long>();
    if (m.method == MethodId::RandomLabel) {
      const auto b = nlohmann::json::parse(read_file(dir / "bank.json"));
      LabelEmbeddingBank bank;
      bank.frozen = b.at("frozen").get<bool>();
      for (Label l : kLabels) {
        bank.labels[ordinal(l)] = PhaseVector(b.at(std::string(to_string(l))).get<std::vector<double>>());
      }
      m.bank = std::move(bank);
    }
    if (m.method == MethodId::KnnFixed || m.method == MethodId::KnnLearnt) {
      m.store = load_store(dir / "store.json");
    }
    if (m.method == MethodId::FineTune) {
      const auto h = nlohmann::json::parse(read_file(dir / "head.json"));
      HeadParams head;
      head.dim = h.at("dim").get<std::size_t>();
      head.weight = h.at("weight").get<std::vector<double>>();
      head.bias = h.at("bias").get<std::vector<double>>();
      m.head = std::move(head);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model directory " + dir.string() + ": " + e.what());
  }
  return out;
}

}  // namespace symrel

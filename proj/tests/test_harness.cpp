#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <set>

#include "json.hpp"
#include "symrel/error.hpp"
#include "symrel/harness.hpp"

using namespace symrel;

namespace {

struct Fixture {
  Corpus corpus;
  ProxyCorpus proxy;
  Benchmark bench;
};

const Fixture& small() {
  static const Fixture f = [] {
    Fixture x;
    GenerateConfig g;
    g.n_entities = 100;
    g.per_relation = 10;
    x.corpus = generate_corpus(g);
    x.proxy = make_proxy_corpus(13, 1000);
    x.bench = make_benchmark(x.corpus, &x.proxy);
    return x;
  }();
  return f;
}

RunConfig quick(MethodId m) {
  RunConfig cfg;
  cfg.method = m;
  cfg.d = 8;
  cfg.lr = 1e-3;
  cfg.max_epochs = 2;
  return cfg;
}

}  // namespace

TEST_CASE("method names") {
  for (MethodId m : kMethods) CHECK(parse_method(to_string(m)) == m);
  CHECK(to_string(MethodId::KnnLearnt) == "knn-learnt");
  CHECK_THROWS_AS(parse_method("knn"), UsageError);
}

TEST_CASE("run config defaults, parsing and hashing") {
  const RunConfig def;
  CHECK(def.lr == 2e-5);
  CHECK(def.batch_size == 16);
  CHECK(def.margin == 0.5);
  CHECK(def.k == 3);
  CHECK(def.accuracy_target == 0.99);

  const auto cfg = parse_run_config(
      "# comment\nmethod = fine-tune\nlr = 0.001   # inline\n\nk=5\nlexicalized = data/corpus\n");
  CHECK(cfg.method == MethodId::FineTune);
  CHECK(cfg.lr == 0.001);
  CHECK(cfg.k == 5);
  CHECK(cfg.lexicalized == "data/corpus");
  CHECK(cfg.batch_size == 16);
  CHECK(parse_run_config(format_run_config(cfg)).lr == cfg.lr);
  CHECK(config_hash(parse_run_config(format_run_config(cfg))) == config_hash(cfg));
  CHECK(config_hash(cfg) != config_hash(def));
  CHECK(config_hash(cfg).size() == 16);

  CHECK_THROWS_AS(parse_run_config("colour = blue\n"), UsageError);
  CHECK_THROWS_AS(parse_run_config("lr = fast\n"), UsageError);
  CHECK_THROWS_AS(parse_run_config("just words\n"), UsageError);
  RunConfig bad;
  bad.lr = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = RunConfig{};
  bad.margin = 3;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("proxy corpus") {
  const auto p = make_proxy_corpus(7, 300);
  CHECK(p.train.size() + p.dev.size() + p.test.size() == 300);
  std::vector<NliExample> all = p.train;
  all.insert(all.end(), p.dev.begin(), p.dev.end());
  all.insert(all.end(), p.test.begin(), p.test.end());
  long balance = 0;
  for (const auto& e : all) {
    balance += e.label == Label::Entailment ? 1 : -1;
    const bool negated = e.hypothesis.rfind(std::string(kNegationToken) + " ", 0) == 0;
    CHECK(negated == (e.label == Label::Contradiction));
  }
  CHECK(std::abs(balance) <= 1);
  CHECK(to_jsonl(make_proxy_corpus(7, 300).test) == to_jsonl(p.test));
  CHECK_THROWS_AS(make_proxy_corpus(1, 99), UsageError);

  // No overlap with the entity vocabulary of the symmetry corpus.
  std::set<std::string> entity_words;
  for (const auto& t : small().corpus.triples) {
    for (const auto& s : {t.subject_id, t.subject_label, t.object_id, t.object_label}) {
      for (const auto& w : split_words(s)) entity_words.insert(w);
    }
  }
  for (const auto& e : all) {
    for (const auto& w : split_words(e.premise + " " + e.hypothesis)) CHECK_FALSE(entity_words.contains(w));
  }
}

TEST_CASE("benchmark vocabulary covers every split") {
  const auto& b = small().bench;
  for (const auto* split : {&b.train, &b.dev, &b.test_lexicalized, &b.test_delexicalized, &b.proxy_test}) {
    for (const auto& s : *split) {
      for (TokenId t : s.premise) CHECK(t != Vocabulary::kUnk);
    }
  }
  CHECK(b.train.size() == b.train_examples.size());
}

TEST_CASE("parameter contract per method") {
  const auto& b = small().bench;
  for (MethodId m : kMethods) {
    CAPTURE(to_string(m));
    const auto cfg = quick(m);
    const auto init = init_params(cfg.seed, cfg.d, b.vocab.size(), cfg.init_scale);
    const auto r = train(cfg, init, b.train, b.dev);
    CHECK_FALSE(r.model.encoder == init);
    CHECK(r.model.head.has_value() == (m == MethodId::FineTune));
    CHECK(r.model.bank.has_value() == (m == MethodId::RandomLabel));
    CHECK(r.model.store.has_value() == (m == MethodId::KnnFixed || m == MethodId::KnnLearnt));
    if (m == MethodId::RandomLabel) CHECK(*r.model.bank == init_label_bank(cfg.seed, cfg.d));
    if (m == MethodId::FineTune) CHECK_FALSE(*r.model.head == HeadParams::init(cfg.seed, cfg.d, cfg.init_scale));
    CHECK(r.model.steps > 0);
  }
}

TEST_CASE("training is deterministic and logs every step") {
  const auto& b = small().bench;
  const auto cfg = quick(MethodId::KnnFixed);
  const auto a = train(cfg, b);
  const auto c = train(cfg, b);
  CHECK(a.model.encoder == c.model.encoder);
  CHECK(a.log == c.log);
  CHECK(a.model.store == c.model.store);

  std::size_t lines = 0;
  std::size_t start = 0;
  while (start < a.log.size()) {
    const auto end = a.log.find('\n', start);
    const auto rec = nlohmann::json::parse(a.log.substr(start, end - start));
    CHECK(rec.at("step") == static_cast<long>(lines + 1));
    CHECK(rec.at("objective") == "knn-fixed");
    CHECK(rec.at("seed") == cfg.seed);
    CHECK(rec.contains("loss"));
    CHECK(rec.contains("grad_norm"));
    ++lines;
    start = end + 1;
  }
  CHECK(static_cast<long>(lines) == a.model.steps);
}

TEST_CASE("zero epochs leaves the encoder untouched") {
  const auto& b = small().bench;
  auto cfg = quick(MethodId::FineTune);
  cfg.max_epochs = 0;
  const auto init = init_params(1, cfg.d, b.vocab.size(), 0.1);
  const auto r = train(cfg, init, b.train, b.dev);
  CHECK(r.model.encoder == init);
  CHECK(r.model.steps == 0);
  CHECK(r.log.empty());
}

TEST_CASE("non-finite parameters are rejected up front") {
  const auto& b = small().bench;
  const auto cfg = quick(MethodId::FineTune);
  auto init = init_params(1, cfg.d, b.vocab.size(), 0.1);
  init.embedding[5] = std::nan("");
  CHECK_THROWS_AS(train(cfg, init, b.train, b.dev), NumericError);
}

TEST_CASE("divergence is reported with its step") {
  const auto& b = small().bench;
  auto cfg = quick(MethodId::FineTune);
  cfg.lr = 1e300;
  const auto init = init_params(1, cfg.d, b.vocab.size(), 0.1);
  try {
    train(cfg, init, b.train, b.dev);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() >= 1);
  }
}

TEST_CASE("evaluate") {
  const auto& b = small().bench;
  const auto r = train(quick(MethodId::KnnLearnt), b);
  CHECK_THROWS_AS(evaluate(r.model, std::vector<TokenizedPair>{}), DataError);
  const double one = evaluate(r.model, std::span(b.test_lexicalized).first(1));
  CHECK((one == 0.0 || one == 1.0));
  const double acc = evaluate(r.model, b.test_lexicalized);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}

TEST_CASE("predict dispatches on the method's own inference path") {
  const auto& b = small().bench;
  const auto& s = b.test_lexicalized.front();
  for (MethodId m : kMethods) {
    const auto r = train(quick(m), b);
    const auto& model = r.model;
    Label expected = Label::Entailment;
    switch (m) {
      case MethodId::RandomLabel:
        expected = classify_nearest_label(embed(model.encoder, s.premise), embed(model.encoder, s.hypothesis),
                                          *model.bank);
        break;
      case MethodId::KnnFixed:
        expected = knn_classify(sample_label(model.encoder, s, StoreMode::Fixed), *model.store, {3});
        break;
      case MethodId::KnnLearnt:
        expected = knn_classify(sample_label(model.encoder, s, StoreMode::Learnt), *model.store, {3});
        break;
      case MethodId::FineTune:
        expected = classify_head(*model.head, embed(model.encoder, s.premise), embed(model.encoder, s.hypothesis));
        break;
    }
    CHECK(predict(model, s) == expected);
  }
}

TEST_CASE("trained model reaches the ceiling on its own training slice") {
  const auto& b = small().bench;
  auto cfg = quick(MethodId::KnnFixed);
  cfg.d = 16;
  cfg.max_epochs = 50;
  const auto r = train(cfg, b);
  CHECK(evaluate(r.model, b.train) >= 0.99);
}

TEST_CASE("proxy task is learnable with 1-NN") {
  const auto& b = small().bench;
  auto cfg = quick(MethodId::KnnFixed);
  cfg.d = 16;
  cfg.k = 1;
  cfg.max_epochs = 50;
  const auto r = train(cfg, init_params(cfg.seed, cfg.d, b.vocab.size(), cfg.init_scale), b.proxy_train,
                       b.proxy_dev);
  CHECK(evaluate(r.model, b.proxy_test) >= 0.9);
}

TEST_CASE("balanced subsets") {
  const auto& ex = small().bench.train_examples;
  const auto idx = balanced_subset(ex, 48, 3);
  REQUIRE(idx.size() == 48);
  CHECK(std::set<std::size_t>(idx.begin(), idx.end()).size() == 48);
  int ent = 0;
  std::set<std::string> relations;
  for (auto i : idx) {
    ent += ex[i].label == Label::Entailment;
    relations.insert(ex[i].property_id);
  }
  CHECK(ent == 24);
  CHECK(relations.size() == 14);
  CHECK(balanced_subset(ex, 48, 3) == idx);
  CHECK(balanced_subset(ex, 1'000'000, 3).size() == ex.size());
}

TEST_CASE("few-shot search") {
  const auto& b = small().bench;
  auto cfg = quick(MethodId::KnnFixed);
  cfg.accuracy_target = 0.0;
  const std::vector<std::size_t> schedule = {8, 16};
  const auto r = measure_few_shot(cfg, b, schedule);
  REQUIRE(r.samples);
  CHECK(*r.samples == 8);
  CHECK(r.curve.size() == 1);

  cfg.method = MethodId::FineTune;
  cfg.accuracy_target = 1.0;
  cfg.max_epochs = 0;  // untrained head, target out of reach
  const auto miss = measure_few_shot(cfg, b, schedule);
  CHECK_FALSE(miss.samples);
  CHECK(miss.curve.size() == 2);
  CHECK(measure_few_shot(cfg, b, schedule).curve.front().accuracy == miss.curve.front().accuracy);

  CHECK_THROWS_AS(measure_few_shot(cfg, b, std::vector<std::size_t>{16, 8}), UsageError);
  CHECK_THROWS_AS(measure_few_shot(cfg, b, std::vector<std::size_t>{}), UsageError);
}

TEST_CASE("forgetting") {
  const auto& b = small().bench;
  auto cfg = quick(MethodId::KnnFixed);
  cfg.d = 16;
  cfg.max_epochs = 30;
  const auto proxy = train_proxy(cfg, b);
  CHECK(proxy.accuracy >= kProxyMinimumAccuracy);

  auto none = cfg;
  none.max_epochs = 0;
  const auto zero = measure_forgetting(none, b, proxy);
  CHECK(zero.delta == 0.0);
  CHECK(zero.symmetry_steps == 0);
  CHECK_FALSE(zero.improved());

  const auto r = measure_forgetting(cfg, b, proxy);
  CHECK(r.proxy_before == proxy.accuracy);
  CHECK(r.delta == doctest::Approx(r.proxy_before - r.proxy_after));
  CHECK(r.improved() == (r.delta < 0));

  Benchmark no_proxy = b;
  no_proxy.proxy_train.clear();
  CHECK_THROWS_AS(train_proxy(cfg, no_proxy), DataError);
}

TEST_CASE("report rendering") {
  EvalReport full{"knn-fixed", 1.0, 0.9923, 64, 0.077, 13, std::nullopt};
  EvalReport probe{"untrained-probe", 0.5, 0.48, std::nullopt, std::nullopt, 13, std::nullopt};

  SUBCASE("one row in, header plus one data row out") {
    const auto t = render_report(std::vector<EvalReport>{full}, ReportFormat::Table);
    std::size_t lines = 0;
    for (char c : t) lines += c == '\n';
    CHECK(lines == 3);  // header, rule, row
    CHECK(t.find("| knn-fixed") != std::string::npos);
    CHECK(t.find("99.2%") != std::string::npos);
    CHECK(t.find("7.7%") != std::string::npos);
  }
  SUBCASE("missing values render as a dash") {
    const auto t = render_report(std::vector<EvalReport>{probe}, ReportFormat::Table);
    const auto row = t.substr(t.rfind("| untrained-probe"));
    std::size_t dashes = 0;
    for (std::size_t at = row.find("| -"); at != std::string::npos; at = row.find("| -", at + 1)) ++dashes;
    CHECK(dashes == 2);
  }
  SUBCASE("negative forgetting is flagged") {
    EvalReport r = full;
    r.forgetting_delta = -0.01;
    CHECK(render_report(std::vector<EvalReport>{r}, ReportFormat::Table).find("(improved)") != std::string::npos);
  }
  SUBCASE("structured output round-trips") {
    EvalReport timed = full;
    timed.wall_time = 1.25;
    const std::vector<EvalReport> rows = {probe, full, timed};
    const auto back = parse_report(render_report(rows, ReportFormat::Json));
    REQUIRE(back.size() == 3);
    CHECK(back[0].method == probe.method);
    CHECK_FALSE(back[0].training_samples_used);
    CHECK(back[1].accuracy_delexicalized == full.accuracy_delexicalized);
    CHECK(back[1].forgetting_delta == full.forgetting_delta);
    CHECK(back[2].wall_time == 1.25);
    CHECK(render_report(back, ReportFormat::Json) == render_report(rows, ReportFormat::Json));
  }
  SUBCASE("bytes depend only on the input") {
    const std::vector<EvalReport> rows = {full, probe};
    CHECK(render_report(rows, ReportFormat::Table) == render_report(rows, ReportFormat::Table));
  }
  CHECK_THROWS_AS(parse_report("{}"), DataError);
}

TEST_CASE("model directory round trip") {
  const auto& b = small().bench;
  const auto dir = std::filesystem::temp_directory_path() / "symrel_test_model";
  for (MethodId m : kMethods) {
    std::filesystem::remove_all(dir);
    const auto r = train(quick(m), b);
    save_model(dir, r.model, b.vocab);
    const auto loaded = load_model(dir);
    CHECK(loaded.model.method == m);
    CHECK(loaded.model.encoder == r.model.encoder);
    CHECK(loaded.vocab.tokens() == b.vocab.tokens());
    CHECK(evaluate(loaded.model, b.test_delexicalized) == evaluate(r.model, b.test_delexicalized));
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_model(dir), DataError);
}

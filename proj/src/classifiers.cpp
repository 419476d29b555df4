#include "symrel/classifiers.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <string>
#include <utility>

#include "json.hpp"
#include "symrel/error.hpp"
#include "symrel/io.hpp"

namespace symrel {

std::string_view to_string(StoreMode mode) { return mode == StoreMode::Fixed ? "fixed" : "learnt"; }

StoreMode parse_store_mode(std::string_view s) {
  if (s == "fixed") return StoreMode::Fixed;
  if (s == "learnt") return StoreMode::Learnt;
  throw DataError("unknown store mode '" + std::string(s) + "'");
}

Label classify_nearest_label(const ComplexVector& p, const ComplexVector& h,
                             const LabelEmbeddingBank& bank) {
  Label best = Label::Entailment;
  double best_d = rotate_distance(p, h, bank[best]);
  for (Label c : kLabels) {
    const double d = rotate_distance(p, h, bank[c]);
    if (d < best_d) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

PhaseVector sample_label(const EncoderParams& params, const TokenizedPair& sample, StoreMode mode) {
  if (mode == StoreMode::Learnt) return encode_pair(params, sample.premise, sample.hypothesis).label;
  return extract_label(embed(params, sample.premise), embed(params, sample.hypothesis));
}

LabelStore build_store(std::span<const TokenizedPair> samples, const EncoderParams& params,
                       StoreMode mode) {
  if (samples.empty()) throw DataError("build_store: no training samples");
  LabelStore store;
  store.dim = params.dim;
  store.mode = mode;
  store.entries.reserve(samples.size());
  for (const auto& s : samples) store.entries.push_back({sample_label(params, s, mode), s.label});
  return store;
}

Label knn_classify(const PhaseVector& query, const LabelStore& store, const KnnConfig& cfg) {
  if (cfg.k == 0) throw UsageError("knn_classify: k must be positive");
  if (cfg.k > store.size()) {
    throw UsageError("knn_classify: k = " + std::to_string(cfg.k) + " exceeds store size " +
                     std::to_string(store.size()));
  }
  // Max-heap on (distance, index) holding the k best entries seen so far.
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item> best;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Item item{label_distance(query, store.entries[i].label), i};
    if (best.size() < cfg.k) {
      best.push(item);
    } else if (item < best.top()) {
      best.pop();
      best.push(item);
    }
  }
  std::array<std::size_t, 2> votes{};
  std::array<double, 2> summed{};
  while (!best.empty()) {
    const auto [d, i] = best.top();
    best.pop();
    const std::size_t c = ordinal(store.entries[i].tag);
    ++votes[c];
    summed[c] += d;
  }
  if (votes[0] != votes[1]) return votes[0] > votes[1] ? Label::Entailment : Label::Contradiction;
  return summed[1] < summed[0] ? Label::Contradiction : Label::Entailment;
}

double probe_pretrained(std::span<const TokenizedPair> test, std::span<const TokenizedPair> train,
                        const EncoderParams& params) {
  if (test.empty() || train.empty()) throw DataError("probe_pretrained: empty sample set");
  const LabelStore store = build_store(train, params, StoreMode::Fixed);
  std::size_t correct = 0;
  for (const auto& s : test) {
    if (knn_classify(sample_label(params, s, StoreMode::Fixed), store, {1}) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

Label classify_head(const HeadParams& head, const ComplexVector& p, const ComplexVector& h) {
  const auto z = head_logits(head, p, h);
  return z[1] > z[0] ? Label::Contradiction : Label::Entailment;
}

void save_store(const std::filesystem::path& path, const LabelStore& store) {
  nlohmann::ordered_json j;
  j["format"] = "symrel-label-store";
  j["version"] = 1;
  j["dim"] = store.dim;
  j["mode"] = to_string(store.mode);
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : store.entries) {
    nlohmann::ordered_json row;
    row["label"] = to_string(e.tag);
    row["phases"] = std::vector<double>(e.label.phases().begin(), e.label.phases().end());
    entries.push_back(std::move(row));
  }
  j["entries"] = std::move(entries);
  write_file(path, j.dump() + "\n");
}

LabelStore load_store(const std::filesystem::path& path) {
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    if (j.at("format") != "symrel-label-store" || j.at("version") != 1) {
      throw DataError("unsupported store format in " + path.string());
    }
    LabelStore store;
    store.dim = j.at("dim").get<std::size_t>();
    store.mode = parse_store_mode(j.at("mode").get<std::string>());
    for (const auto& row : j.at("entries")) {
      auto phases = row.at("phases").get<std::vector<double>>();
      if (phases.size() != store.dim) throw DataError("store entry dimension mismatch");
      store.entries.push_back(
          {PhaseVector(std::move(phases)), parse_label(row.at("label").get<std::string>())});
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed store " + path.string() + ": " + e.what());
  }
}

}  // namespace symrel

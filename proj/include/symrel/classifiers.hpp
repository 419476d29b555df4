#pragma once

// Inference paths, one per training regime:
//   random-label  -> nearest frozen label embedding
//   knn-fixed     -> k-NN over labels extracted as h / p
//   knn-learnt    -> k-NN over labels from joint pair encoding
//   fine-tune     -> argmax of the classification head

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "symrel/encoder.hpp"
#include "symrel/label.hpp"
#include "symrel/metric.hpp"
#include "symrel/objectives.hpp"

namespace symrel {

enum class StoreMode { Fixed, Learnt };

std::string_view to_string(StoreMode mode);
StoreMode parse_store_mode(std::string_view s);

struct StoreEntry {
  PhaseVector label;
  Label tag = Label::Entailment;
  friend bool operator==(const StoreEntry&, const StoreEntry&) = default;
};

struct LabelStore {
  std::size_t dim = 0;
  StoreMode mode = StoreMode::Fixed;
  std::vector<StoreEntry> entries;

  std::size_t size() const { return entries.size(); }
  friend bool operator==(const LabelStore&, const LabelStore&) = default;
};

struct KnnConfig {
  std::size_t k = 3;
  // Distance ties go to the earlier entry; vote ties to the smaller summed
  // distance, then to the lower class ordinal. Only this policy exists.
  static constexpr std::string_view kTieBreak = "index/summed-distance/ordinal";
};

// argmin over classes of rotate_distance(p, h, l_c); ties to the lower ordinal.
Label classify_nearest_label(const ComplexVector& p, const ComplexVector& h,
                             const LabelEmbeddingBank& bank);

// Label embedding of one sample under the store's construction rule.
PhaseVector sample_label(const EncoderParams& params, const TokenizedPair& sample, StoreMode mode);

// Throws DataError on an empty sample set; propagates extract_label errors.
LabelStore build_store(std::span<const TokenizedPair> samples, const EncoderParams& params,
                       StoreMode mode);

// Throws UsageError when k is zero or exceeds the store size.
Label knn_classify(const PhaseVector& query, const LabelStore& store, const KnnConfig& cfg);

// 1-NN accuracy of an untrained encoder with a fixed-metric store.
double probe_pretrained(std::span<const TokenizedPair> test, std::span<const TokenizedPair> train,
                        const EncoderParams& params);

Label classify_head(const HeadParams& head, const ComplexVector& p, const ComplexVector& h);

// Versioned JSON store file.
void save_store(const std::filesystem::path& path, const LabelStore& store);
LabelStore load_store(const std::filesystem::path& path);

}  // namespace symrel

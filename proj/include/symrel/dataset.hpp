#pragma once

// Symmetric / antisymmetric NLI benchmark generation.
//
// Pipeline: triples (loaded from a Wikidata5m-style TSV or synthesized)
//   -> swap_and_label: each triple yields (original -> swapped) and
//      (swapped -> original), labelled by the relation's symmetry tag
//   -> realize: template filling with entity labels or Q-identifiers
//   -> make_splits: seeded, optionally entity-disjoint partition.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "symrel/label.hpp"

namespace symrel {

enum class Symmetry { Symmetric, Antisymmetric };
enum class Mode { Lexicalized, Delexicalized };

inline constexpr std::array<Mode, 2> kModes = {Mode::Lexicalized, Mode::Delexicalized};

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view s);

struct Triple {
  std::string subject_id;
  std::string subject_label;
  std::string property_id;
  std::string object_id;
  std::string object_label;

  friend bool operator==(const Triple&, const Triple&) = default;
};

bool is_entity_id(std::string_view s);    // Q\d+
bool is_property_id(std::string_view s);  // P\d+

struct RelationSpec {
  std::string property_id;
  std::string text;  // template with [X] (subject) and [Y] (object)
  Symmetry symmetry = Symmetry::Antisymmetric;
};

// The fourteen shipped relations, in template-table order.
const std::vector<RelationSpec>& relation_specs();
// Throws DataError for a property outside the shipped set.
const RelationSpec& relation_spec(std::string_view property_id);
// Throws DataError unless [X] and [Y] each occur exactly once.
void validate_template(const RelationSpec& spec);

struct NliExample {
  std::string premise;
  std::string hypothesis;
  Label label = Label::Entailment;
  std::string property_id;
  Mode mode = Mode::Lexicalized;
  std::string subject_id;  // subject of the premise statement
  std::string object_id;

  friend bool operator==(const NliExample&, const NliExample&) = default;
};

// A directed example before realization.
struct ExampleSkeleton {
  Triple premise;
  Triple hypothesis;
  Label label = Label::Entailment;
};

// Throws DataError if the file cannot be read or any line is malformed; the
// message lists every bad line number with its reason.
std::vector<Triple> load_triples(const std::filesystem::path& path);
std::vector<Triple> parse_triples(std::string_view text);
std::string format_triples(std::span<const Triple> triples);
void write_triples(const std::filesystem::path& path, std::span<const Triple> triples);

struct SynthesisOptions {
  // Entities are grouped into communities and triples only link members of
  // the same community, so entity-disjoint splits stay feasible.
  std::size_t community_size = 10;
};

// Deterministic synthetic triples: n_per_relation for each shipped relation,
// entity ids Q900000+i. No duplicate (s, p, o) and no pair in both
// orientations. Throws DataError when the request is infeasible.
std::vector<Triple> synthesize_triples(std::uint64_t seed, std::size_t n_entities,
                                       std::size_t n_per_relation,
                                       const SynthesisOptions& options = {});

// Throws DataError when the triple's property differs from the spec's.
std::array<ExampleSkeleton, 2> swap_and_label(const Triple& triple, const RelationSpec& spec);

std::string fill_template(const RelationSpec& spec, std::string_view x, std::string_view y);
NliExample realize(const ExampleSkeleton& skeleton, const RelationSpec& spec, Mode mode);

// Inverse of fill_template: recovers the ([X], [Y]) strings.
std::optional<std::pair<std::string, std::string>> parse_sentence(const RelationSpec& spec,
                                                                  std::string_view sentence);

struct SplitConfig {
  std::uint64_t seed = 13;
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
  bool entity_disjoint = true;

  void validate() const;
};

struct Splits {
  std::vector<NliExample> train;
  std::vector<NliExample> dev;
  std::vector<NliExample> test;
};

// Both directions of a swap pair always land in the same split.
// Throws DataError when entity-disjointness cannot be met.
Splits make_splits(std::span<const NliExample> examples, const SplitConfig& cfg);

// One JSON object per line; field order fixed.
std::string to_jsonl(std::span<const NliExample> examples);
std::vector<NliExample> parse_jsonl(std::string_view text);

struct GenerateConfig {
  std::uint64_t seed = 13;
  std::size_t n_entities = 200;
  std::size_t per_relation = 50;
  SynthesisOptions synthesis;
  SplitConfig split;
  std::optional<std::filesystem::path> triples_path;  // use a file instead of synthesis
};

struct Corpus {
  std::vector<Triple> triples;
  Splits lexicalized;
  Splits delexicalized;
  std::string manifest;  // JSON

  const Splits& splits(Mode mode) const {
    return mode == Mode::Lexicalized ? lexicalized : delexicalized;
  }
};

// Realizes every triple in both modes (triples whose property is outside the
// shipped set are skipped and counted in the manifest) and splits them.
std::vector<NliExample> realize_all(std::span<const Triple> triples, Mode mode);
Corpus generate_corpus(const GenerateConfig& cfg);

// Writes triples.tsv, <mode>.<split>.jsonl and manifest.json under dir.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace symrel

#include "symrel/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "symrel/error.hpp"
#include "symrel/io.hpp"
#include "symrel/random.hpp"

namespace symrel {

std::string_view to_string(Mode mode) {
  return mode == Mode::Lexicalized ? "lexicalized" : "delexicalized";
}

Mode parse_mode(std::string_view s) {
  if (s == "lexicalized") return Mode::Lexicalized;
  if (s == "delexicalized") return Mode::Delexicalized;
  throw DataError("unknown mode '" + std::string(s) + "'");
}

namespace {

bool is_prefixed_number(std::string_view s, char prefix) {
  if (s.size() < 2 || s[0] != prefix) return false;
  return std::all_of(s.begin() + 1, s.end(), [](unsigned char c) { return std::isdigit(c); });
}

constexpr std::string_view kX = "[X]";
constexpr std::string_view kY = "[Y]";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace

bool is_entity_id(std::string_view s) { return is_prefixed_number(s, 'Q'); }
bool is_property_id(std::string_view s) { return is_prefixed_number(s, 'P'); }

const std::vector<RelationSpec>& relation_specs() {
  using enum Symmetry;
  static const std::vector<RelationSpec> specs = {
      {"P40", "[Y] is a child of [X].", Antisymmetric},
      {"P1382", "[Y] partially overlaps with [X].", Symmetric},
      {"P279", "[X] is a type of [Y].", Antisymmetric},
      {"P3373", "[X] is a sibling of [Y].", Symmetric},
      {"P1560", "[X] is an equivalent name of [Y] for other gender.", Symmetric},
      {"P131", "[X] is located in [Y].", Antisymmetric},
      {"P25", "[Y] is the mother of [X].", Antisymmetric},
      {"P22", "[Y] is the father of [X].", Antisymmetric},
      {"P460", "[X] possibly the same as [Y].", Symmetric},
      {"P2670", "[X] has part(s) that are instances of [Y].", Antisymmetric},
      {"P1542", "[X] led to [Y].", Antisymmetric},
      {"P1889", "[X] is different from [Y].", Symmetric},
      {"P361", "[X] is part of [Y].", Antisymmetric},
      {"P828", "[X] caused by [Y].", Antisymmetric},
  };
  return specs;
}

const RelationSpec& relation_spec(std::string_view property_id) {
  for (const auto& s : relation_specs()) {
    if (s.property_id == property_id) return s;
  }
  throw DataError("property " + std::string(property_id) + " is not one of the shipped relations");
}

void validate_template(const RelationSpec& spec) {
  if (count_occurrences(spec.text, kX) != 1 || count_occurrences(spec.text, kY) != 1) {
    throw DataError("template for " + spec.property_id +
                    " must contain [X] and [Y] exactly once: " + spec.text);
  }
}

// ---------------------------------------------------------------------------
// Triple files: subject_id \t subject_label \t property_id \t object_id \t object_label

std::vector<Triple> parse_triples(std::string_view text) {
  std::vector<Triple> out;
  std::vector<std::string> problems;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::vector<std::string> cols;
    std::size_t s = 0;
    while (true) {
      const std::size_t tab = line.find('\t', s);
      cols.emplace_back(line.substr(s, tab == std::string_view::npos ? std::string_view::npos
                                                                    : tab - s));
      if (tab == std::string_view::npos) break;
      s = tab + 1;
    }
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (cols.size() != 5) {
      problems.push_back(where + "expected 5 tab-separated columns, found " +
                         std::to_string(cols.size()));
      continue;
    }
    Triple t{cols[0], cols[1], cols[2], cols[3], cols[4]};
    if (!is_entity_id(t.subject_id)) {
      problems.push_back(where + "bad subject id '" + t.subject_id + "'");
    } else if (!is_property_id(t.property_id)) {
      problems.push_back(where + "bad property id '" + t.property_id + "'");
    } else if (!is_entity_id(t.object_id)) {
      problems.push_back(where + "bad object id '" + t.object_id + "'");
    } else if (t.subject_label.empty() || t.object_label.empty()) {
      problems.push_back(where + "empty entity label");
    } else {
      out.push_back(std::move(t));
    }
  }
  if (!problems.empty()) {
    std::string msg = "malformed triple data:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }
  return out;
}

std::vector<Triple> load_triples(const std::filesystem::path& path) {
  try {
    return parse_triples(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_triples(std::span<const Triple> triples) {
  std::string out;
  for (const auto& t : triples) {
    out += t.subject_id + '\t' + t.subject_label + '\t' + t.property_id + '\t' + t.object_id +
           '\t' + t.object_label + '\n';
  }
  return out;
}

void write_triples(const std::filesystem::path& path, std::span<const Triple> triples) {
  write_file(path, format_triples(triples));
}

// ---------------------------------------------------------------------------

namespace {

// Consonant-vowel words of three or four syllables. None of them can collide
// with a template word.
std::string pronounceable_label(Rng& rng) {
  static constexpr std::string_view consonants = "bdfgklmnprstv";
  static constexpr std::string_view vowels = "aeiou";
  const std::size_t syllables = 3 + rng.below(2);
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += consonants[rng.below(consonants.size())];
    w += vowels[rng.below(vowels.size())];
  }
  w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

}  // namespace

std::vector<Triple> synthesize_triples(std::uint64_t seed, std::size_t n_entities,
                                       std::size_t n_per_relation,
                                       const SynthesisOptions& options) {
  if (n_entities < 2) throw DataError("synthesize_triples: need at least 2 entities");
  const std::size_t community = std::max<std::size_t>(2, options.community_size);

  Rng name_rng = Rng::derive(seed, 0x6e616d65);
  std::vector<std::string> ids(n_entities);
  std::vector<std::string> labels(n_entities);
  std::set<std::string> used;
  for (std::size_t i = 0; i < n_entities; ++i) {
    ids[i] = "Q" + std::to_string(900000 + i);
    std::string name;
    do {
      name = pronounceable_label(name_rng);
    } while (!used.insert(name).second);
    labels[i] = std::move(name);
  }

  // Candidate unordered pairs inside each community.
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t base = 0; base < n_entities; base += community) {
    const std::size_t end = std::min(n_entities, base + community);
    for (std::size_t a = base; a < end; ++a) {
      for (std::size_t b = a + 1; b < end; ++b) candidates.emplace_back(a, b);
    }
  }
  if (candidates.size() < n_per_relation) {
    throw DataError("synthesize_triples: " + std::to_string(n_per_relation) +
                    " triples per relation requested but only " +
                    std::to_string(candidates.size()) + " distinct entity pairs exist");
  }

  std::vector<Triple> out;
  out.reserve(n_per_relation * relation_specs().size());
  std::uint64_t salt = 0;
  for (const auto& spec : relation_specs()) {
    Rng rng = Rng::derive(seed, 0x70616972 + salt++);
    auto pool = candidates;
    rng.shuffle(std::span(pool));
    for (std::size_t i = 0; i < n_per_relation; ++i) {
      auto [a, b] = pool[i];
      if (rng.below(2) == 1) std::swap(a, b);
      out.push_back({ids[a], labels[a], spec.property_id, ids[b], labels[b]});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::array<ExampleSkeleton, 2> swap_and_label(const Triple& triple, const RelationSpec& spec) {
  if (triple.property_id != spec.property_id) {
    throw DataError("swap_and_label: triple property " + triple.property_id +
                    " does not match relation " + spec.property_id);
  }
  const Label label =
      spec.symmetry == Symmetry::Symmetric ? Label::Entailment : Label::Contradiction;
  const Triple swapped{triple.object_id, triple.object_label, triple.property_id,
                       triple.subject_id, triple.subject_label};
  return {ExampleSkeleton{triple, swapped, label}, ExampleSkeleton{swapped, triple, label}};
}

std::string fill_template(const RelationSpec& spec, std::string_view x, std::string_view y) {
  std::string out = spec.text;
  const auto px = out.find(kX);
  out.replace(px, kX.size(), x);
  const auto py = out.find(kY);
  out.replace(py, kY.size(), y);
  return out;
}

NliExample realize(const ExampleSkeleton& skeleton, const RelationSpec& spec, Mode mode) {
  const auto render = [&](const Triple& t) {
    return mode == Mode::Lexicalized ? fill_template(spec, t.subject_label, t.object_label)
                                     : fill_template(spec, t.subject_id, t.object_id);
  };
  return NliExample{render(skeleton.premise),
                    render(skeleton.hypothesis),
                    skeleton.label,
                    spec.property_id,
                    mode,
                    skeleton.premise.subject_id,
                    skeleton.premise.object_id};
}

std::optional<std::pair<std::string, std::string>> parse_sentence(const RelationSpec& spec,
                                                                  std::string_view sentence) {
  const std::string_view t = spec.text;
  const auto px = t.find(kX);
  const auto py = t.find(kY);
  const bool x_first = px < py;
  const auto first = std::min(px, py);
  const auto second = std::max(px, py);
  const std::string_view head = t.substr(0, first);
  const std::string_view middle = t.substr(first + 3, second - first - 3);
  const std::string_view tail = t.substr(second + 3);

  if (sentence.size() < head.size() + middle.size() + tail.size()) return std::nullopt;
  if (!sentence.starts_with(head) || !sentence.ends_with(tail)) return std::nullopt;
  const std::string_view body =
      sentence.substr(head.size(), sentence.size() - head.size() - tail.size());
  for (auto pos = body.find(middle, 1); pos != std::string_view::npos;
       pos = body.find(middle, pos + 1)) {
    const std::string_view a = body.substr(0, pos);
    const std::string_view b = body.substr(pos + middle.size());
    if (a.empty() || b.empty()) continue;
    if (x_first) return std::make_pair(std::string(a), std::string(b));
    return std::make_pair(std::string(b), std::string(a));
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

void SplitConfig::validate() const {
  if (train < 0 || dev < 0 || test < 0 || std::abs(train + dev + test - 1.0) > 1e-9) {
    throw UsageError("split fractions must be non-negative and sum to 1");
  }
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

Splits make_splits(std::span<const NliExample> examples, const SplitConfig& cfg) {
  cfg.validate();
  const std::array<double, 3> fractions = {cfg.train, cfg.dev, cfg.test};

  // Groups keyed so that they are identical for both realization modes.
  std::map<std::string, std::vector<std::size_t>> groups;
  if (cfg.entity_disjoint) {
    std::map<std::string, std::size_t> entity_index;
    for (const auto& ex : examples) {
      entity_index.emplace(ex.subject_id, 0);
      entity_index.emplace(ex.object_id, 0);
    }
    std::size_t next = 0;
    std::vector<std::string> names;
    for (auto& [id, idx] : entity_index) {
      idx = next++;
      names.push_back(id);
    }
    UnionFind uf(entity_index.size());
    for (const auto& ex : examples) uf.unite(entity_index[ex.subject_id], entity_index[ex.object_id]);
    for (std::size_t i = 0; i < examples.size(); ++i) {
      groups[names[uf.find(entity_index[examples[i].subject_id])]].push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto& ex = examples[i];
      const auto [lo, hi] = std::minmax(ex.subject_id, ex.object_id);
      groups[ex.property_id + "|" + lo + "|" + hi].push_back(i);
    }
  }

  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [key, members] : groups) order.push_back(&members);
  Rng rng = Rng::derive(cfg.seed, 0x73706c74);
  rng.shuffle(std::span(order));

  std::array<std::vector<std::size_t>, 3> assigned;
  if (cfg.entity_disjoint) {
    std::size_t needed = 0;
    for (double f : fractions) needed += f > 0 ? 1 : 0;
    if (order.size() < needed) {
      throw DataError("entity-disjoint split infeasible: only " + std::to_string(order.size()) +
                      " connected entity groups for " + std::to_string(needed) + " splits");
    }
    // Greedy: each group goes to the split furthest below its target size.
    const double total = static_cast<double>(examples.size());
    std::array<std::size_t, 3> sizes{};
    for (const auto* members : order) {
      std::size_t pick = 0;
      double best = -1e300;
      for (std::size_t s = 0; s < 3; ++s) {
        if (fractions[s] <= 0) continue;
        const double deficit = fractions[s] * total - static_cast<double>(sizes[s]);
        if (deficit > best) {
          best = deficit;
          pick = s;
        }
      }
      sizes[pick] += members->size();
      assigned[pick].insert(assigned[pick].end(), members->begin(), members->end());
    }
    for (std::size_t s = 0; s < 3; ++s) {
      if (fractions[s] > 0 && assigned[s].empty()) {
        throw DataError("entity-disjoint split infeasible: a split with positive fraction is empty");
      }
    }
  } else {
    const double g = static_cast<double>(order.size());
    const std::size_t n_train = static_cast<std::size_t>(std::llround(cfg.train * g));
    const std::size_t n_dev =
        std::min(order.size() - n_train, static_cast<std::size_t>(std::llround(cfg.dev * g)));
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::size_t s = i < n_train ? 0 : (i < n_train + n_dev ? 1 : 2);
      assigned[s].insert(assigned[s].end(), order[i]->begin(), order[i]->end());
    }
  }

  Splits out;
  std::array<std::vector<NliExample>*, 3> dst = {&out.train, &out.dev, &out.test};
  for (std::size_t s = 0; s < 3; ++s) {
    std::sort(assigned[s].begin(), assigned[s].end());
    for (std::size_t i : assigned[s]) dst[s]->push_back(examples[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_jsonl(std::span<const NliExample> examples) {
  std::string out;
  for (const auto& ex : examples) {
    nlohmann::ordered_json j;
    j["premise"] = ex.premise;
    j["hypothesis"] = ex.hypothesis;
    j["label"] = to_string(ex.label);
    j["property_id"] = ex.property_id;
    j["mode"] = to_string(ex.mode);
    j["subject_id"] = ex.subject_id;
    j["object_id"] = ex.object_id;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<NliExample> parse_jsonl(std::string_view text) {
  std::vector<NliExample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("premise").get<std::string>(), j.at("hypothesis").get<std::string>(),
                     parse_label(j.at("label").get<std::string>()),
                     j.at("property_id").get<std::string>(),
                     parse_mode(j.at("mode").get<std::string>()),
                     j.at("subject_id").get<std::string>(), j.at("object_id").get<std::string>()});
    } catch (const std::exception& e) {
      throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<NliExample> realize_all(std::span<const Triple> triples, Mode mode) {
  std::vector<NliExample> out;
  for (const auto& t : triples) {
    const RelationSpec* spec = nullptr;
    for (const auto& s : relation_specs()) {
      if (s.property_id == t.property_id) spec = &s;
    }
    if (spec == nullptr) continue;
    for (const auto& sk : swap_and_label(t, *spec)) out.push_back(realize(sk, *spec, mode));
  }
  return out;
}

Corpus generate_corpus(const GenerateConfig& cfg) {
  Corpus c;
  c.triples = cfg.triples_path ? load_triples(*cfg.triples_path)
                               : synthesize_triples(cfg.seed, cfg.n_entities, cfg.per_relation,
                                                    cfg.synthesis);
  SplitConfig split = cfg.split;
  split.seed = cfg.seed;
  const auto lex = realize_all(c.triples, Mode::Lexicalized);
  const auto delex = realize_all(c.triples, Mode::Delexicalized);
  c.lexicalized = make_splits(lex, split);
  c.delexicalized = make_splits(delex, split);

  nlohmann::ordered_json m;
  m["format"] = "symrel-corpus";
  m["version"] = 1;
  m["seed"] = cfg.seed;
  m["source"] = cfg.triples_path ? "file" : "synthetic";
  if (!cfg.triples_path) {
    m["n_entities"] = cfg.n_entities;
    m["per_relation"] = cfg.per_relation;
    m["community_size"] = cfg.synthesis.community_size;
  }
  nlohmann::ordered_json per_relation;
  std::size_t skipped = 0;
  for (const auto& spec : relation_specs()) per_relation[spec.property_id] = 0;
  for (const auto& t : c.triples) {
    if (per_relation.contains(t.property_id)) {
      per_relation[t.property_id] = per_relation[t.property_id].get<std::size_t>() + 1;
    } else {
      ++skipped;
    }
  }
  m["triples_per_relation"] = per_relation;
  m["triples_skipped"] = skipped;
  m["directed_examples_per_mode"] = lex.size();
  m["split"] = {{"train", split.train},
                {"dev", split.dev},
                {"test", split.test},
                {"entity_disjoint", split.entity_disjoint}};
  for (Mode mode : kModes) {
    const auto& s = c.splits(mode);
    m["split_sizes"][std::string(to_string(mode))] = {
        {"train", s.train.size()}, {"dev", s.dev.size()}, {"test", s.test.size()}};
  }
  c.manifest = m.dump(2) + "\n";
  return c;
}

namespace {

std::filesystem::path split_file(const std::filesystem::path& dir, Mode mode, std::string_view s) {
  return dir / (std::string(to_string(mode)) + "." + std::string(s) + ".jsonl");
}

}  // namespace

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  write_triples(dir / "triples.tsv", corpus.triples);
  for (Mode mode : kModes) {
    const auto& s = corpus.splits(mode);
    write_file(split_file(dir, mode, "train"), to_jsonl(s.train));
    write_file(split_file(dir, mode, "dev"), to_jsonl(s.dev));
    write_file(split_file(dir, mode, "test"), to_jsonl(s.test));
  }
  write_file(dir / "manifest.json", corpus.manifest);
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus c;
  if (std::filesystem::exists(dir / "triples.tsv")) c.triples = load_triples(dir / "triples.tsv");
  for (Mode mode : kModes) {
    Splits& s = mode == Mode::Lexicalized ? c.lexicalized : c.delexicalized;
    s.train = parse_jsonl(read_file(split_file(dir, mode, "train")));
    s.dev = parse_jsonl(read_file(split_file(dir, mode, "dev")));
    s.test = parse_jsonl(read_file(split_file(dir, mode, "test")));
  }
  if (std::filesystem::exists(dir / "manifest.json")) c.manifest = read_file(dir / "manifest.json");
  return c;
}

}  // namespace symrel

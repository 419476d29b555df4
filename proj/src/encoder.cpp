#include "symrel/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "json.hpp"
#include "symrel/error.hpp"
#include "symrel/io.hpp"
#include "symrel/random.hpp"

namespace symrel {

namespace {

bool is_trailing_punct(char c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      std::string word(text.substr(i, j - i));
      for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      std::vector<std::string> tail;
      while (word.size() > 1 && is_trailing_punct(word.back())) {
        tail.emplace_back(1, word.back());
        word.pop_back();
      }
      out.push_back(std::move(word));
      out.insert(out.end(), tail.rbegin(), tail.rend());
    }
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() {
  add(kUnkToken);
  add(kSepToken);
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  std::set<std::string> words;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) words.insert(std::move(w));
  }
  Vocabulary v;
  for (const auto& w : words) v.add(w);
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kUnkToken || tokens[1] != kSepToken) {
    throw DataError("vocabulary must start with " + std::string(kUnkToken) + " and " +
                    std::string(kSepToken));
  }
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw DataError("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

TokenId Vocabulary::add(std::string_view word) {
  std::string key(word);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

TokenId Vocabulary::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) ids.push_back(index_of(w));
  return ids;
}

// ---------------------------------------------------------------------------

std::vector<std::span<double>> EncoderParams::tensors() {
  return {embedding, projection, bias};
}

std::vector<std::span<const double>> EncoderParams::tensors() const {
  return {embedding, projection, bias};
}

std::size_t EncoderParams::parameter_count() const {
  return embedding.size() + projection.size() + bias.size();
}

void EncoderParams::validate() const {
  if (dim == 0) throw UsageError("encoder dimension must be >= 1");
  if (vocab_size < 2) throw UsageError("vocabulary must hold at least the two special tokens");
  if (embedding.size() != vocab_size * width() || projection.size() != width() * width() ||
      bias.size() != width()) {
    throw DimensionError("encoder parameter shapes inconsistent with d and |V|");
  }
  for (const auto& t : tensors()) {
    for (double v : t) {
      if (!std::isfinite(v)) throw NumericError("encoder parameters contain non-finite values");
    }
  }
}

EncoderParams init_params(std::uint64_t seed, std::size_t d, std::size_t vocab_size,
                          double scale) {
  if (d == 0) throw UsageError("init_params: d must be >= 1");
  if (vocab_size < 2) throw UsageError("init_params: vocab_size must be >= 2");
  EncoderParams p;
  p.dim = d;
  p.vocab_size = vocab_size;
  p.seed = seed;
  const std::size_t w = 2 * d;
  Rng rng(seed);
  p.embedding.resize(vocab_size * w);
  for (double& v : p.embedding) v = scale == 0.0 ? 0.0 : rng.uniform(-scale, scale);
  p.projection.resize(w * w);
  for (std::size_t r = 0; r < w; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double jitter = scale == 0.0 ? 0.0 : rng.uniform(-scale, scale);
      p.projection[r * w + c] = (r == c ? 1.0 : 0.0) + jitter;
    }
  }
  p.bias.assign(w, 0.0);
  return p;
}

// ---------------------------------------------------------------------------

ParamGradients ParamGradients::zeros_like(const EncoderParams& params) {
  ParamGradients g;
  g.embedding.assign(params.embedding.size(), 0.0);
  g.projection.assign(params.projection.size(), 0.0);
  g.bias.assign(params.bias.size(), 0.0);
  return g;
}

std::vector<std::span<double>> ParamGradients::tensors() { return {embedding, projection, bias}; }

std::vector<std::span<const double>> ParamGradients::tensors() const {
  return {embedding, projection, bias};
}

void ParamGradients::add_scaled(const ParamGradients& other, double factor) {
  auto dst = tensors();
  auto src = other.tensors();
  for (std::size_t t = 0; t < dst.size(); ++t) {
    if (dst[t].size() != src[t].size()) throw DimensionError("gradient shapes differ");
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += factor * src[t][i];
  }
}

void ParamGradients::scale(double factor) {
  for (auto t : tensors()) {
    for (double& v : t) v *= factor;
  }
}

double ParamGradients::norm() const {
  double s = 0.0;
  for (auto t : tensors()) {
    for (double v : t) s += v * v;
  }
  return std::sqrt(s);
}

bool ParamGradients::all_zero() const {
  for (auto t : tensors()) {
    for (double v : t) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

std::vector<double> pool_weights(std::span<const TokenId> tokens) {
  const double inv_n = 1.0 / static_cast<double>(tokens.size());
  std::vector<double> w(tokens.size(), inv_n);
  // A SEP-joined pair is pooled with the plain mean; the pair is already
  // ordered by construction.
  if (std::find(tokens.begin(), tokens.end(), Vocabulary::kSep) != tokens.end()) return w;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (2 * t >= tokens.size()) w[t] = -inv_n;
  }
  return w;
}

SingleEncoding encode_single(const EncoderParams& params, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw DataError("encode_single: empty token sequence");
  const std::size_t w = params.width();

  ComputationTape tape;
  tape.dim = params.dim;
  tape.vocab_size = params.vocab_size;
  tape.tokens.assign(tokens.begin(), tokens.end());
  tape.pool_weights = pool_weights(tokens);

  tape.ops.push_back(ComputationTape::Op::SignedMeanPool);
  tape.pooled.assign(w, 0.0);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] >= params.vocab_size) {
      throw DimensionError("encode_single: token id " + std::to_string(tokens[t]) +
                           " outside vocabulary");
    }
    const auto row = params.embedding_row(tokens[t]);
    const double a = tape.pool_weights[t];
    for (std::size_t j = 0; j < w; ++j) tape.pooled[j] += a * row[j];
  }

  tape.ops.push_back(ComputationTape::Op::Affine);
  std::vector<double> y(params.bias);
  for (std::size_t r = 0; r < w; ++r) {
    const double* wr = params.projection.data() + r * w;
    double s = 0.0;
    for (std::size_t c = 0; c < w; ++c) s += wr[c] * tape.pooled[c];
    y[r] += s;
  }
  tape.output = ComplexVector::from_realized(y);
  SingleEncoding enc{tape.output, std::move(tape)};
  return enc;
}

PairEncoding encode_pair(const EncoderParams& params, std::span<const TokenId> premise,
                         std::span<const TokenId> hypothesis) {
  if (premise.empty() || hypothesis.empty()) {
    throw DataError("encode_pair: empty premise or hypothesis");
  }
  std::vector<TokenId> joined(premise.begin(), premise.end());
  joined.push_back(Vocabulary::kSep);
  joined.insert(joined.end(), hypothesis.begin(), hypothesis.end());
  auto single = encode_single(params, joined);
  single.tape.ops.push_back(ComputationTape::Op::Phase);
  std::vector<double> theta(params.dim);
  for (std::size_t i = 0; i < params.dim; ++i) theta[i] = std::arg(single.embedding[i]);
  return {PhaseVector(std::move(theta)), std::move(single.tape)};
}

ComplexVector embed(const EncoderParams& params, std::span<const TokenId> tokens) {
  return encode_single(params, tokens).embedding;
}

void accumulate_backward(const EncoderParams& params, const ComputationTape& tape,
                         std::span<const double> upstream, ParamGradients& grads) {
  if (tape.dim != params.dim || tape.vocab_size != params.vocab_size ||
      tape.pooled.size() != params.width()) {
    throw DimensionError("backward: tape was recorded with different encoder shapes");
  }
  if (grads.embedding.size() != params.embedding.size() ||
      grads.projection.size() != params.projection.size() ||
      grads.bias.size() != params.bias.size()) {
    throw DimensionError("backward: gradient buffer shapes differ from parameters");
  }
  const std::size_t w = params.width();
  std::vector<double> d_out;

  for (auto op = tape.ops.rbegin(); op != tape.ops.rend(); ++op) {
    switch (*op) {
      case ComputationTape::Op::Phase: {
        if (upstream.size() != params.dim) {
          throw DimensionError("backward: phase output expects d upstream values");
        }
        d_out.assign(w, 0.0);
        phase_backward(tape.output, upstream, d_out);
        break;
      }
      case ComputationTape::Op::Affine: {
        if (d_out.empty()) {
          if (upstream.size() != w) {
            throw DimensionError("backward: complex output expects 2d upstream values");
          }
          d_out.assign(upstream.begin(), upstream.end());
        }
        std::vector<double> d_pooled(w, 0.0);
        for (std::size_t r = 0; r < w; ++r) {
          const double g = d_out[r];
          if (g == 0.0) continue;
          grads.bias[r] += g;
          const double* wr = params.projection.data() + r * w;
          double* gr = grads.projection.data() + r * w;
          for (std::size_t c = 0; c < w; ++c) {
            gr[c] += g * tape.pooled[c];
            d_pooled[c] += g * wr[c];
          }
        }
        d_out = std::move(d_pooled);
        break;
      }
      case ComputationTape::Op::SignedMeanPool: {
        for (std::size_t t = 0; t < tape.tokens.size(); ++t) {
          double* row = grads.embedding.data() + static_cast<std::size_t>(tape.tokens[t]) * w;
          const double a = tape.pool_weights[t];
          for (std::size_t j = 0; j < w; ++j) row[j] += a * d_out[j];
        }
        break;
      }
    }
  }
}

ParamGradients backward(const EncoderParams& params, const ComputationTape& tape,
                        std::span<const double> upstream) {
  auto grads = ParamGradients::zeros_like(params);
  accumulate_backward(params, tape, upstream, grads);
  return grads;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                     const Vocabulary& vocab) {
  if (vocab.size() != params.vocab_size) {
    throw DimensionError("save_checkpoint: vocabulary size differs from encoder");
  }
  nlohmann::ordered_json j;
  j["format"] = "symrel-encoder";
  j["version"] = 1;
  j["dim"] = params.dim;
  j["vocab_size"] = params.vocab_size;
  j["seed"] = params.seed;
  j["vocab"] = vocab.tokens();
  j["embedding"] = params.embedding;
  j["projection"] = params.projection;
  j["bias"] = params.bias;
  write_file(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
    if (j.at("format") != "symrel-encoder" || j.at("version") != 1) {
      throw DataError("unsupported checkpoint format in " + path.string());
    }
    Checkpoint ck;
    ck.params.dim = j.at("dim").get<std::size_t>();
    ck.params.vocab_size = j.at("vocab_size").get<std::size_t>();
    ck.params.seed = j.at("seed").get<std::uint64_t>();
    ck.params.embedding = j.at("embedding").get<std::vector<double>>();
    ck.params.projection = j.at("projection").get<std::vector<double>>();
    ck.params.bias = j.at("bias").get<std::vector<double>>();
    ck.vocab = Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>());
    ck.params.validate();
    if (ck.vocab.size() != ck.params.vocab_size) {
      throw DataError("checkpoint vocabulary size differs from vocab_size");
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace symrel

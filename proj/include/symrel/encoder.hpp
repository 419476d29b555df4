#pragma once

// Toy trainable sentence encoder producing complex embeddings.
//
//   tokens -> embedding rows (2d reals each) -> signed mean pool -> W z + b
//
// For a single sentence the pool gives every token a positional phase of 0 or
// pi: tokens in the first half are added, tokens in the second half
// subtracted. Subject and object slots of a templated sentence therefore
// enter with opposite signs, which is what lets a fixed rotation metric tell
// "X r Y" from "Y r X" on unseen entities. Plain mean pooling would make the
// two sentences of every swap pair identical. Joint pairs (premise, SEP,
// hypothesis) keep the plain mean.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "symrel/metric.hpp"

namespace symrel {

using TokenId = std::uint32_t;

// Lowercases, splits on whitespace, and detaches trailing sentence
// punctuation (. , ; : ! ?) into separate tokens.
std::vector<std::string> split_words(std::string_view text);

class Vocabulary {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr TokenId kSep = 1;
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kSepToken = "<sep>";

  Vocabulary();

  // Vocabulary over every word of texts, in sorted order after the specials.
  static Vocabulary build(std::span<const std::string> texts);
  // Rebuilds from a stored token list; the first two must be the specials.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  TokenId add(std::string_view word);
  TokenId index_of(std::string_view word) const;
  bool contains(std::string_view word) const { return index_.contains(std::string(word)); }
  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> tokenize(std::string_view text) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct EncoderParams {
  std::size_t dim = 0;  // complex output dimension d
  std::size_t vocab_size = 0;
  std::uint64_t seed = 0;
  std::vector<double> embedding;   // vocab_size x 2d, row-major
  std::vector<double> projection;  // 2d x 2d, row-major
  std::vector<double> bias;        // 2d

  std::size_t width() const { return 2 * dim; }
  std::span<const double> embedding_row(TokenId id) const {
    return {embedding.data() + static_cast<std::size_t>(id) * width(), width()};
  }
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t parameter_count() const;
  // Throws on inconsistent shapes or non-finite values.
  void validate() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

// Embeddings ~ U(-scale, scale); projection = I + U(-scale, scale); bias = 0.
EncoderParams init_params(std::uint64_t seed, std::size_t d, std::size_t vocab_size,
                          double scale);

// Same layout as EncoderParams.
struct ParamGradients {
  std::vector<double> embedding;
  std::vector<double> projection;
  std::vector<double> bias;

  static ParamGradients zeros_like(const EncoderParams& params);
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  void add_scaled(const ParamGradients& other, double factor);
  void scale(double factor);
  double norm() const;
  bool all_zero() const;
};

// Record of one forward pass, replayed in reverse by backward().
struct ComputationTape {
  enum class Op { SignedMeanPool, Affine, Phase };

  std::vector<Op> ops;
  std::size_t dim = 0;
  std::size_t vocab_size = 0;
  std::vector<TokenId> tokens;
  std::vector<double> pool_weights;  // +-1/n per token
  std::vector<double> pooled;        // 2d
  ComplexVector output;              // affine output, before any phase op
};

// Pooling weights. A single sentence of n tokens gets +1/n on its first half
// and -1/n on the rest, so a sentence and its subject/object swap (a token
// permutation) encode differently. A SEP-joined pair gets the plain mean 1/n.
std::vector<double> pool_weights(std::span<const TokenId> tokens);

struct SingleEncoding {
  ComplexVector embedding;
  ComputationTape tape;
};

struct PairEncoding {
  PhaseVector label;
  ComputationTape tape;
};

// Throws DataError on an empty token sequence.
SingleEncoding encode_single(const EncoderParams& params, std::span<const TokenId> tokens);

// Encodes premise ++ [SEP] ++ hypothesis through the single-sentence path and
// returns the componentwise phase of the output.
PairEncoding encode_pair(const EncoderParams& params, std::span<const TokenId> premise,
                         std::span<const TokenId> hypothesis);

// Forward without keeping the tape.
ComplexVector embed(const EncoderParams& params, std::span<const TokenId> tokens);

// Reverse accumulation. `upstream` is dL/d(output): 2d reals for a complex
// output, d phase gradients when the tape ends in a Phase op.
ParamGradients backward(const EncoderParams& params, const ComputationTape& tape,
                        std::span<const double> upstream);
void accumulate_backward(const EncoderParams& params, const ComputationTape& tape,
                         std::span<const double> upstream, ParamGradients& grads);

// Checkpoints are JSON documents holding the shapes, seed, vocabulary and all
// parameter arrays. Doubles are written in shortest round-trip form, so a
// reloaded encoder reproduces outputs bit-exactly.
struct Checkpoint {
  EncoderParams params;
  Vocabulary vocab;
};

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                     const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace symrel

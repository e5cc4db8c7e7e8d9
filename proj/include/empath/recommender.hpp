/* Copyright 2026 The Empath Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "empath/nn/checkpoint.hpp"
#include "empath/nn/layers.hpp"
#include "empath/ser_model.hpp"
#include "empath/training.hpp"

namespace empath::rec {

using ser::Emotion;

enum class Language : std::uint8_t { En, Fa };

std::string_view to_string(Language lang);
std::optional<Language> parse_language(std::string_view code);

// Recommender classes are the negative emotions in their SER index order.
inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<Emotion, kNumClasses> kNegativeEmotions = {
    Emotion::Anger, Emotion::Fear, Emotion::Sadness};

struct Suggestion {
  std::string id;
  Emotion emotion = Emotion::Anger;
  Language language = Language::En;
  std::string text;
};

class SuggestionCorpus {
 public:
  SuggestionCorpus() = default;
  // Throws DuplicateId, InvalidEmotion or ParseError (empty text).
  explicit SuggestionCorpus(std::vector<Suggestion> items);

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<Suggestion>& items() const { return items_; }

  // Indices into items(), ascending by id.
  const std::vector<std::size_t>& bucket(Emotion e, Language lang) const;
  std::vector<std::size_t> by_language(Language lang) const;
  const Suggestion* find(std::string_view id) const;

 private:
  std::vector<Suggestion> items_;
  std::map<std::pair<Emotion, Language>, std::vector<std::size_t>> index_;
};

// JSONL with exactly the keys id, emotion, language, text per line. Blank
// lines are ignored. ParseError messages carry the 1-based line number.
SuggestionCorpus parse_suggestions(std::istream& in);
SuggestionCorpus load_suggestions(const std::filesystem::path& path);

// Frozen word-vector table. Row `size()` is the zero out-of-vocabulary slot.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> tokens, nn::Tensor vectors);

  std::size_t size() const { return tokens_.size(); }
  std::size_t dim() const { return vectors_.rank() == 2 ? vectors_.dim(1) : 0; }
  std::size_t oov_index() const { return tokens_.size(); }
  std::size_t index_of(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  const nn::Tensor& vectors() const { return vectors_; }
  std::vector<double> lookup(std::string_view token) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> vocab_;
  nn::Tensor vectors_;
};

// Text format: `token v1 ... vd` per line. Throws EmptyFile,
// InconsistentDimension, DuplicateToken or ParseError.
EmbeddingTable parse_embeddings(std::istream& in);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

// Lowercases cased scripts, removes Unicode punctuation (categories P*),
// and splits on whitespace. ZWNJ inside Persian words is kept.
std::vector<std::string> tokenize(std::string_view text, Language language);

// Embedding (frozen) -> LSTM -> dense over the final hidden state -> softmax
// over {anger, fear, sadness}.
class RecModel {
 public:
  static constexpr std::size_t kMaxTokens = 32;
  static constexpr std::size_t kDefaultHidden = 64;

  RecModel() = default;

  const EmbeddingTable& embeddings() const { return *embeddings_; }
  std::size_t hidden() const { return lstm_.hidden(); }

  nn::ParameterRefs parameters();

  // Token indices after truncation to kMaxTokens.
  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;

  // Throws EmptyTokenSequence.
  std::array<double, kNumClasses> logits(const std::vector<std::string>& tokens) const;
  std::array<double, kNumClasses> forward(const std::vector<std::string>& tokens) const;

  // Adds scale * gradients into the trainable parameters; returns the loss.
  double accumulate_gradients(const std::vector<std::string>& tokens, std::size_t label,
                              double scale, std::size_t* predicted = nullptr);

  // Gradient of the loss with respect to the looked-up embedding rows, for
  // verification only; training never applies it.
  nn::Tensor embedding_gradient(const std::vector<std::string>& tokens, std::size_t label);

  nn::Checkpoint to_checkpoint() const;
  static RecModel from_checkpoint(const nn::Checkpoint& ckpt);

  nn::LstmParams& lstm() { return lstm_; }
  nn::Parameter& dense_weights() { return dense_w_; }
  nn::Parameter& dense_bias() { return dense_b_; }

 private:
  friend RecModel build_rec_model(std::shared_ptr<const EmbeddingTable> embeddings,
                                  std::uint64_t seed, std::size_t hidden);

  std::shared_ptr<const EmbeddingTable> embeddings_;
  nn::LstmParams lstm_;
  nn::Parameter dense_w_;
  nn::Parameter dense_b_;
};

RecModel build_rec_model(std::shared_ptr<const EmbeddingTable> embeddings, std::uint64_t seed,
                         std::size_t hidden = RecModel::kDefaultHidden);

// Trains on every suggestion (sorted by id) with its emotion as target.
// Throws EmptyCorpus.
TrainReport train_rec(RecModel& model, const SuggestionCorpus& corpus, const TrainConfig& config);

// Fraction of suggestions whose argmax class equals their labeled emotion.
double evaluate_rec(const RecModel& model, const SuggestionCorpus& corpus);

// Deterministic split: each (emotion, language) bucket contributes roughly
// `validation_fraction` of its entries, chosen by a seeded shuffle.
std::pair<SuggestionCorpus, SuggestionCorpus> split_corpus(const SuggestionCorpus& corpus,
                                                           double validation_fraction,
                                                           std::uint64_t seed);

struct ScoredSuggestion {
  const Suggestion* suggestion = nullptr;
  double score = 0.0;
};

struct Recommendation {
  std::vector<ScoredSuggestion> items;
  // Fewer than k candidates existed in the requested language.
  bool truncated = false;
};

// Ranks every suggestion in `language` by the model's probability of
// `emotion`, descending, ties by ascending id. Throws InvalidEmotion for a
// non-negative emotion and InsufficientCandidates when the language has no
// suggestions.
Recommendation recommend(const SuggestionCorpus& corpus, const RecModel& model, Emotion emotion,
                         Language language, std::size_t k = 3);

}  // namespace empath::rec

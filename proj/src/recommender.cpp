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

#include "empath/recommender.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "empath/error.hpp"
#include "empath/nn/optim.hpp"
#include "empath/nn/rng.hpp"
#include "unicode_punct.hpp"

namespace empath::rec {

using nn::Parameter;
using nn::Tensor;

std::string_view to_string(Language lang) { return lang == Language::En ? "en" : "fa"; }

std::optional<Language> parse_language(std::string_view code) {
  if (code == "en") return Language::En;
  if (code == "fa") return Language::Fa;
  return std::nullopt;
}

namespace {

std::optional<std::size_t> class_of(Emotion e) {
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (kNegativeEmotions[c] == e) return c;
  }
  return std::nullopt;
}

// --- UTF-8 -----------------------------------------------------------------

constexpr char32_t kReplacement = 0xFFFD;

std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + static_cast<std::size_t>(len) > s.size()) {
      out.push_back(kReplacement);
      break;
    }
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_punctuation(char32_t cp) {
  const auto& table = detail::kPunctuationRanges;
  auto it = std::upper_bound(table.begin(), table.end(), static_cast<std::uint32_t>(cp),
                             [](std::uint32_t v, const detail::CodepointRange& r) {
                               return v < r.first;
                             });
  if (it == table.begin()) return false;
  --it;
  return cp <= it->last;
}

bool is_space(char32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
         cp == 0x205F || cp == 0x3000;
}

// Simple lowercase mapping for Latin, Greek and Cyrillic; other scripts are
// caseless or left unchanged.
char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp < 0x80) return cp;
  if ((cp >= 0xC0 && cp <= 0xDE) && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x100 && cp <= 0x17F && cp != 0x130 && cp != 0x149 && cp != 0x178) {
    // Latin Extended-A alternates upper/lower in pairs, with an offset block.
    const bool even_upper = (cp <= 0x137) || (cp >= 0x14A && cp <= 0x177);
    if (even_upper) return (cp % 2 == 0) ? cp + 1 : cp;
    return (cp % 2 == 1) ? cp + 1 : cp;
  }
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

void require_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line) + ": key '" + key + "' must be a string");
  }
}

}  // namespace

// --- corpus ----------------------------------------------------------------

SuggestionCorpus::SuggestionCorpus(std::vector<Suggestion> items) : items_(std::move(items)) {
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const Suggestion& s = items_[i];
    if (!seen.insert(s.id).second) throw Error(ErrorCode::DuplicateId, s.id);
    if (!class_of(s.emotion)) {
      throw Error(ErrorCode::InvalidEmotion, std::string(ser::to_string(s.emotion)));
    }
    if (s.text.empty()) throw Error(ErrorCode::ParseError, "suggestion " + s.id + " has no text");
    index_[{s.emotion, s.language}].push_back(i);
  }
  for (auto& [key, bucket] : index_) {
    std::sort(bucket.begin(), bucket.end(),
              [this](std::size_t a, std::size_t b) { return items_[a].id < items_[b].id; });
  }
}

const std::vector<std::size_t>& SuggestionCorpus::bucket(Emotion e, Language lang) const {
  static const std::vector<std::size_t> kEmpty;
  const auto it = index_.find({e, lang});
  return it == index_.end() ? kEmpty : it->second;
}

std::vector<std::size_t> SuggestionCorpus::by_language(Language lang) const {
  std::vector<std::size_t> out;
  for (Emotion e : kNegativeEmotions) {
    const auto& b = bucket(e, lang);
    out.insert(out.end(), b.begin(), b.end());
  }
  std::sort(out.begin(), out.end(),
            [this](std::size_t a, std::size_t b) { return items_[a].id < items_[b].id; });
  return out;
}

const Suggestion* SuggestionCorpus::find(std::string_view id) const {
  for (const Suggestion& s : items_) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

SuggestionCorpus parse_suggestions(std::istream& in) {
  std::vector<Suggestion> items;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": not a JSON object");
    }
    for (const char* key : {"id", "emotion", "language", "text"}) require_string(obj, key, line);
    if (obj.size() != 4) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line) + ": expected exactly id, emotion, language, text");
    }
    Suggestion s;
    s.id = obj["id"].get<std::string>();
    const auto emotion_name = obj["emotion"].get<std::string>();
    const auto emotion = ser::parse_emotion(emotion_name);
    if (!emotion || !class_of(*emotion)) {
      throw Error(ErrorCode::InvalidEmotion,
                  "line " + std::to_string(line) + ": '" + emotion_name + "'");
    }
    s.emotion = *emotion;
    const auto lang_code = obj["language"].get<std::string>();
    const auto lang = parse_language(lang_code);
    if (!lang) {
      throw Error(ErrorCode::InvalidLanguage, "line " + std::to_string(line) + ": '" + lang_code + "'");
    }
    s.language = *lang;
    s.text = obj["text"].get<std::string>();
    if (s.text.empty()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": empty text");
    }
    if (!ids.insert(s.id).second) {
      throw Error(ErrorCode::DuplicateId, "line " + std::to_string(line) + ": '" + s.id + "'");
    }
    items.push_back(std::move(s));
  }
  return SuggestionCorpus(std::move(items));
}

SuggestionCorpus load_suggestions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_suggestions(in);
}

// --- embeddings --------------------------------------------------------------

EmbeddingTable::EmbeddingTable(std::vector<std::string> tokens, Tensor vectors)
    : tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
  if (vectors_.rank() != 2 || vectors_.dim(0) != tokens_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "embedding matrix does not match the vocabulary");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!vocab_.emplace(tokens_[i], i).second) throw Error(ErrorCode::DuplicateToken, tokens_[i]);
  }
}

std::size_t EmbeddingTable::index_of(std::string_view token) const {
  const auto it = vocab_.find(std::string(token));
  return it == vocab_.end() ? oov_index() : it->second;
}

std::vector<double> EmbeddingTable::lookup(std::string_view token) const {
  const std::size_t idx = index_of(token);
  return nn::embedding_lookup(vectors_, std::span<const std::size_t>(&idx, 1));
}

EmbeddingTable parse_embeddings(std::istream& in) {
  std::vector<std::string> tokens;
  std::vector<double> values;
  std::set<std::string> seen;
  std::size_t dim = 0;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::istringstream fields(text);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> row;
    std::string field;
    while (fields >> field) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line) + ": bad value '" + field + "'");
      }
      row.push_back(v);
    }
    if (row.empty()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": no vector values");
    }
    if (dim == 0) dim = row.size();
    if (row.size() != dim) {
      throw Error(ErrorCode::InconsistentDimension,
                  "line " + std::to_string(line) + ": " + std::to_string(row.size()) +
                      " values, expected " + std::to_string(dim));
    }
    if (!seen.insert(token).second) {
      throw Error(ErrorCode::DuplicateToken, "line " + std::to_string(line) + ": '" + token + "'");
    }
    tokens.push_back(token);
    values.insert(values.end(), row.begin(), row.end());
  }
  if (tokens.empty()) throw Error(ErrorCode::EmptyFile, "no embedding rows");
  const std::size_t rows = tokens.size();
  return EmbeddingTable(std::move(tokens), Tensor({rows, dim}, std::move(values)));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_embeddings(in);
}

// --- tokenizer ---------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text, Language /*language*/) {
  std::vector<std::string> tokens;
  std::string current;
  for (char32_t cp : decode_utf8(text)) {
    if (is_space(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (is_punctuation(cp)) continue;
    append_utf8(current, to_lower(cp));
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// --- model -------------------------------------------------------------------

RecModel build_rec_model(std::shared_ptr<const EmbeddingTable> embeddings, std::uint64_t seed,
                         std::size_t hidden) {
  if (!embeddings || embeddings->dim() == 0) {
    throw Error(ErrorCode::ModelNotLoaded, "recommender needs a loaded embedding table");
  }
  RecModel m;
  m.embeddings_ = std::move(embeddings);
  const std::size_t d = m.embeddings_->dim();
  m.lstm_ = nn::LstmParams("lstm", d, hidden);
  const nn::Rng root(seed);
  nn::Rng rng_in = root.split("lstm.input_weights");
  nn::init_glorot_uniform(m.lstm_.input_weights.value, d, 4 * hidden, rng_in);
  nn::Rng rng_h = root.split("lstm.hidden_weights");
  nn::init_glorot_uniform(m.lstm_.hidden_weights.value, hidden, 4 * hidden, rng_h);
  // Forget-gate bias 1.
  for (std::size_t k = 0; k < hidden; ++k) m.lstm_.bias.value.values[hidden + k] = 1.0;

  m.dense_w_ = Parameter("dense.weights", {kNumClasses, hidden});
  m.dense_b_ = Parameter("dense.bias", {kNumClasses});
  nn::Rng rng_d = root.split("dense");
  nn::init_glorot_uniform(m.dense_w_.value, hidden, kNumClasses, rng_d);
  return m;
}

nn::ParameterRefs RecModel::parameters() {
  return {&lstm_.input_weights, &lstm_.hidden_weights, &lstm_.bias, &dense_w_, &dense_b_};
}

std::vector<std::size_t> RecModel::encode(const std::vector<std::string>& tokens) const {
  const std::size_t n = std::min(tokens.size(), kMaxTokens);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = embeddings_->index_of(tokens[i]);
  return idx;
}

std::array<double, kNumClasses> RecModel::logits(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw Error(ErrorCode::EmptyTokenSequence, "nothing to classify");
  const std::vector<std::size_t> idx = encode(tokens);
  const std::vector<double> x = nn::embedding_lookup(embeddings_->vectors(), idx);
  const nn::LstmCache cache = nn::lstm_forward(lstm_, x, idx.size());
  const std::vector<double> z =
      nn::dense_forward(cache.final_hidden(), dense_w_.value, dense_b_.value.span());
  std::array<double, kNumClasses> out{};
  std::copy(z.begin(), z.end(), out.begin());
  return out;
}

std::array<double, kNumClasses> RecModel::forward(const std::vector<std::string>& tokens) const {
  const auto z = logits(tokens);
  const auto p = nn::softmax(z);
  std::array<double, kNumClasses> out{};
  std::copy(p.begin(), p.end(), out.begin());
  return out;
}

double RecModel::accumulate_gradients(const std::vector<std::string>& tokens, std::size_t label,
                                      double scale, std::size_t* predicted) {
  if (tokens.empty()) throw Error(ErrorCode::EmptyTokenSequence, "nothing to classify");
  const std::vector<std::size_t> idx = encode(tokens);
  const std::vector<double> x = nn::embedding_lookup(embeddings_->vectors(), idx);
  const nn::LstmCache cache = nn::lstm_forward(lstm_, x, idx.size());
  const std::vector<double> z =
      nn::dense_forward(cache.final_hidden(), dense_w_.value, dense_b_.value.span());
  if (predicted) *predicted = nn::argmax(z);
  nn::LossAndGrad lg = nn::softmax_cross_entropy(z, label);
  for (double& g : lg.grad) g *= scale;
  const nn::DenseGrads dg = nn::dense_backward(lg.grad, cache.final_hidden(), dense_w_.value);
  for (std::size_t i = 0; i < dg.weights.size(); ++i) dense_w_.grad.values[i] += dg.weights.values[i];
  for (std::size_t i = 0; i < dg.bias.size(); ++i) dense_b_.grad.values[i] += dg.bias[i];
  nn::lstm_backward(lstm_, cache, dg.input);
  return lg.loss;
}

Tensor RecModel::embedding_gradient(const std::vector<std::string>& tokens, std::size_t label) {
  const std::vector<std::size_t> idx = encode(tokens);
  const std::vector<double> x = nn::embedding_lookup(embeddings_->vectors(), idx);
  const nn::LstmCache cache = nn::lstm_forward(lstm_, x, idx.size());
  const std::vector<double> z =
      nn::dense_forward(cache.final_hidden(), dense_w_.value, dense_b_.value.span());
  const nn::LossAndGrad lg = nn::softmax_cross_entropy(z, label);
  const nn::DenseGrads dg = nn::dense_backward(lg.grad, cache.final_hidden(), dense_w_.value);
  // Run BPTT on a scratch copy so the model's own accumulators are untouched.
  nn::LstmParams scratch = lstm_;
  const std::vector<double> gx = nn::lstm_backward(scratch, cache, dg.input);
  Tensor grad = Tensor::zeros_like(embeddings_->vectors());
  nn::embedding_backward(grad, idx, gx);
  return grad;
}

nn::Checkpoint RecModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.kind = nn::ModelKind::Rec;
  ckpt.add(lstm_.input_weights.name, lstm_.input_weights.value);
  ckpt.add(lstm_.hidden_weights.name, lstm_.hidden_weights.value);
  ckpt.add(lstm_.bias.name, lstm_.bias.value);
  ckpt.add(dense_w_.name, dense_w_.value);
  ckpt.add(dense_b_.name, dense_b_.value);
  ckpt.add("embedding.vectors", embeddings_->vectors());
  std::string vocab;
  for (const std::string& t : embeddings_->tokens()) {
    vocab += t;
    vocab += '\n';
  }
  ckpt.strings["embedding.vocabulary"] = std::move(vocab);
  return ckpt;
}

RecModel RecModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.kind != nn::ModelKind::Rec) {
    throw Error(ErrorCode::MalformedCheckpoint, "checkpoint does not hold a recommender");
  }
  std::vector<std::string> tokens;
  std::istringstream vocab(ckpt.string("embedding.vocabulary"));
  for (std::string t; std::getline(vocab, t);) tokens.push_back(t);
  auto table =
      std::make_shared<const EmbeddingTable>(std::move(tokens), ckpt.tensor("embedding.vectors"));
  const Tensor& wh = ckpt.tensor("lstm.hidden_weights");
  if (wh.rank() != 2) throw Error(ErrorCode::MalformedCheckpoint, "lstm.hidden_weights rank");
  RecModel m = build_rec_model(std::move(table), 0, wh.dim(1));
  for (Parameter* p : m.parameters()) {
    const Tensor& t = ckpt.tensor(p->name);
    if (t.shape != p->value.shape) {
      throw Error(ErrorCode::MalformedCheckpoint, p->name + " has shape " +
                                                      nn::shape_string(t.shape));
    }
    p->value = t;
  }
  return m;
}

// --- training and ranking ------------------------------------------------------

namespace {

struct TokenizedExample {
  std::vector<std::string> tokens;
  std::size_t label;
};

std::vector<TokenizedExample> tokenized_examples(const SuggestionCorpus& corpus) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&corpus](std::size_t a, std::size_t b) {
    return corpus.items()[a].id < corpus.items()[b].id;
  });
  std::vector<TokenizedExample> out;
  for (std::size_t i : order) {
    const Suggestion& s = corpus.items()[i];
    auto tokens = tokenize(s.text, s.language);
    if (tokens.empty()) continue;
    out.push_back({std::move(tokens), *class_of(s.emotion)});
  }
  return out;
}

}  // namespace

TrainReport train_rec(RecModel& model, const SuggestionCorpus& corpus, const TrainConfig& config) {
  config.validate();
  const std::vector<TokenizedExample> examples = tokenized_examples(corpus);
  if (examples.empty()) throw Error(ErrorCode::EmptyCorpus, "no suggestions to train on");

  nn::ParameterRefs params = model.parameters();
  nn::Adam adam(params, {.lr = config.learning_rate});
  nn::Rng rng = nn::Rng(config.seed).split("shuffle");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport report;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      nn::zero_grads(params);
      for (std::size_t i = start; i < end; ++i) {
        const TokenizedExample& ex = examples[order[i]];
        std::size_t predicted = 0;
        loss_sum += model.accumulate_gradients(ex.tokens, ex.label, scale, &predicted);
        if (predicted == ex.label) ++correct;
      }
      adam.step(params);
    }
    const auto n = static_cast<double>(order.size());
    report.epochs.push_back({loss_sum / n, static_cast<double>(correct) / n});
  }
  return report;
}

double evaluate_rec(const RecModel& model, const SuggestionCorpus& corpus) {
  const std::vector<TokenizedExample> examples = tokenized_examples(corpus);
  if (examples.empty()) throw Error(ErrorCode::EmptyCorpus, "no suggestions to evaluate");
  std::size_t correct = 0;
  for (const TokenizedExample& ex : examples) {
    if (nn::argmax(model.logits(ex.tokens)) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

std::pair<SuggestionCorpus, SuggestionCorpus> split_corpus(const SuggestionCorpus& corpus,
                                                           double validation_fraction,
                                                           std::uint64_t seed) {
  std::vector<Suggestion> train;
  std::vector<Suggestion> validation;
  nn::Rng rng = nn::Rng(seed).split("split");
  for (Emotion e : kNegativeEmotions) {
    for (Language lang : {Language::En, Language::Fa}) {
      std::vector<std::size_t> bucket = corpus.bucket(e, lang);
      rng.shuffle(std::span<std::size_t>(bucket));
      const auto n_val = static_cast<std::size_t>(
          std::floor(validation_fraction * static_cast<double>(bucket.size())));
      for (std::size_t i = 0; i < bucket.size(); ++i) {
        (i < n_val ? validation : train).push_back(corpus.items()[bucket[i]]);
      }
    }
  }
  return {SuggestionCorpus(std::move(train)), SuggestionCorpus(std::move(validation))};
}

Recommendation recommend(const SuggestionCorpus& corpus, const RecModel& model, Emotion emotion,
                         Language language, std::size_t k) {
  const auto cls = class_of(emotion);
  if (!cls) {
    throw Error(ErrorCode::InvalidEmotion,
                std::string(ser::to_string(emotion)) + " is not a negative emotion");
  }
  const std::vector<std::size_t> candidates = corpus.by_language(language);
  if (candidates.empty()) {
    throw Error(ErrorCode::InsufficientCandidates,
                "no suggestions in language '" + std::string(to_string(language)) + "'");
  }
  Recommendation r;
  r.items.reserve(candidates.size());
  for (std::size_t i : candidates) {
    const Suggestion& s = corpus.items()[i];
    const auto tokens = tokenize(s.text, s.language);
    const double score = tokens.empty() ? 0.0 : model.forward(tokens)[*cls];
    r.items.push_back({&s, score});
  }
  std::stable_sort(r.items.begin(), r.items.end(),
                   [](const ScoredSuggestion& a, const ScoredSuggestion& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.suggestion->id < b.suggestion->id;
                   });
  r.truncated = r.items.size() < k;
  if (r.items.size() > k) r.items.resize(k);
  return r;
}

}  // namespace empath::rec

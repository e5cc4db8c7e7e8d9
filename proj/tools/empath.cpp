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

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "empath/error.hpp"
#include "empath/recommender.hpp"
#include "empath/ser_model.hpp"
#include "empath/service.hpp"

namespace {

using namespace empath;

nlohmann::json metrics_json(const ser::SerMetrics& m) {
  nlohmann::json recall = nlohmann::json::object();
  nlohmann::json confusion = nlohmann::json::array();
  for (ser::Emotion e : ser::kAllEmotions) {
    const auto i = ser::index_of(e);
    recall[std::string(ser::to_string(e))] = m.recall[i] ? nlohmann::json(*m.recall[i]) : nlohmann::json();
    confusion.push_back(m.confusion[i]);
  }
  return {{"accuracy", m.accuracy}, {"total", m.total}, {"recall", recall}, {"confusion", confusion},
          {"labels", [] {
             std::vector<std::string> names;
             for (ser::Emotion e : ser::kAllEmotions) names.emplace_back(ser::to_string(e));
             return names;
           }()}};
}

void print_epochs(const TrainReport& report) {
  for (std::size_t i = 0; i < report.epochs.size(); ++i) {
    std::fprintf(stderr, "epoch %3zu  loss %.6f  accuracy %.4f\n", i + 1, report.epochs[i].loss,
                 report.epochs[i].accuracy);
  }
}

ser::Emotion require_emotion(const std::string& name) {
  const auto e = ser::parse_emotion(name);
  if (!e) throw Error(ErrorCode::InvalidEmotion, "'" + name + "'");
  return *e;
}

rec::Language require_language(const std::string& code) {
  const auto l = rec::parse_language(code);
  if (!l) throw Error(ErrorCode::InvalidLanguage, "'" + code + "'");
  return *l;
}

service::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion-aware speech pipeline"};
  app.require_subcommand(1);

  // synth-data
  std::string synth_out;
  std::size_t synth_per_class = 10;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth-data", "Write the synthetic six-emotion WAV dataset");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--per-class", synth_per_class, "Clips per emotion")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();

  // train-ser
  std::string ser_data, ser_out, ser_cache;
  TrainConfig ser_cfg;
  auto* train_ser = app.add_subcommand("train-ser", "Train the speech emotion CNN");
  train_ser->add_option("--data", ser_data, "ShEMO-style directory of WAV files")->required();
  train_ser->add_option("--out", ser_out, "Checkpoint to write")->required();
  train_ser->add_option("--epochs", ser_cfg.epochs)->capture_default_str();
  train_ser->add_option("--seed", ser_cfg.seed)->capture_default_str();
  train_ser->add_option("--batch-size", ser_cfg.batch_size)->capture_default_str();
  train_ser->add_option("--lr", ser_cfg.learning_rate)->capture_default_str();
  train_ser->add_option("--feature-cache", ser_cache, "Directory for cached log-mel features");

  // eval-ser
  std::string eval_ckpt, eval_data;
  auto* eval_ser = app.add_subcommand("eval-ser", "Print SER metrics as JSON");
  eval_ser->add_option("--ckpt", eval_ckpt)->required();
  eval_ser->add_option("--data", eval_data)->required();

  // analyze-file
  std::string af_ckpt, af_wav;
  double af_threshold = 0.0;
  auto* analyze_file = app.add_subcommand("analyze-file", "Classify one WAV file");
  analyze_file->add_option("--ckpt", af_ckpt)->required();
  analyze_file->add_option("--wav", af_wav)->required();
  analyze_file->add_option("--threshold", af_threshold)->capture_default_str();

  // train-rec
  std::string tr_corpus, tr_embeddings, tr_out;
  std::size_t tr_hidden = rec::RecModel::kDefaultHidden;
  TrainConfig rec_cfg;
  rec_cfg.epochs = 50;
  rec_cfg.learning_rate = 3e-3;
  auto* train_rec = app.add_subcommand("train-rec", "Train the suggestion classifier");
  train_rec->add_option("--corpus", tr_corpus)->required();
  train_rec->add_option("--embeddings", tr_embeddings)->required();
  train_rec->add_option("--out", tr_out)->required();
  train_rec->add_option("--epochs", rec_cfg.epochs)->capture_default_str();
  train_rec->add_option("--seed", rec_cfg.seed)->capture_default_str();
  train_rec->add_option("--batch-size", rec_cfg.batch_size)->capture_default_str();
  train_rec->add_option("--lr", rec_cfg.learning_rate)->capture_default_str();
  train_rec->add_option("--hidden", tr_hidden)->capture_default_str();

  // recommend
  std::string rc_ckpt, rc_corpus, rc_emotion, rc_lang = "en";
  std::size_t rc_k = 3;
  bool rc_json = false;
  auto* recommend = app.add_subcommand("recommend", "Rank suggestions for an emotion");
  recommend->add_option("--ckpt", rc_ckpt)->required();
  recommend->add_option("--corpus", rc_corpus)->required();
  recommend->add_option("--emotion", rc_emotion)->required();
  recommend->add_option("--lang", rc_lang)->capture_default_str();
  recommend->add_option("-k", rc_k)->capture_default_str();
  recommend->add_flag("--json", rc_json, "Print a JSON object instead of one text per line");

  // serve
  std::string sv_config;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--config", sv_config)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto files = ser::write_synthetic_dataset(synth_out, synth_per_class, synth_seed);
      std::printf("wrote %zu clips to %s\n", files.size(), synth_out.c_str());
    } else if (*train_ser) {
      ser::SerModel model = ser::build_ser_model(ser_cfg.seed);
      const auto files = ser::list_shemo_directory(ser_data);
      const ser::SerDataset ds = ser::prepare_dataset(model, files, ser::Split::Train, true, ser_cache);
      const TrainReport report = ser::train_ser(model, ds, ser_cfg);
      print_epochs(report);
      nn::save_checkpoint(ser_out, model.to_checkpoint());
      std::printf("%s\n", nlohmann::json{{"examples", ds.examples.size()},
                                         {"final_accuracy", report.final_accuracy()},
                                         {"checkpoint", ser_out}}
                              .dump()
                              .c_str());
    } else if (*eval_ser) {
      ser::SerModel model = ser::SerModel::from_checkpoint(nn::load_checkpoint(eval_ckpt));
      const ser::SerDataset ds =
          ser::prepare_dataset(model, ser::list_shemo_directory(eval_data), ser::Split::Validation, false);
      std::printf("%s\n", metrics_json(ser::evaluate_ser(model, ds)).dump().c_str());
    } else if (*analyze_file) {
      const ser::SerModel model = ser::SerModel::from_checkpoint(nn::load_checkpoint(af_ckpt));
      const dsp::LogMelExtractor extractor(model.feature_config());
      const auto dist = model.forward(model.normalize(ser::featurize_wav(nn::read_file_bytes(af_wav), extractor)));
      nlohmann::json probs = nlohmann::json::object();
      for (ser::Emotion e : ser::kAllEmotions) probs[std::string(ser::to_string(e))] = dist.probability(e);
      const auto negative = ser::filter_negative(dist, af_threshold);
      nlohmann::json out = {{"distribution", probs},
                            {"top_emotion", std::string(ser::to_string(dist.top()))},
                            {"negative", negative.has_value()}};
      std::printf("%s\n", out.dump().c_str());
    } else if (*train_rec) {
      auto table = std::make_shared<const rec::EmbeddingTable>(rec::load_embeddings(tr_embeddings));
      const rec::SuggestionCorpus corpus = rec::load_suggestions(tr_corpus);
      rec::RecModel model = rec::build_rec_model(table, rec_cfg.seed, tr_hidden);
      const TrainReport report = rec::train_rec(model, corpus, rec_cfg);
      print_epochs(report);
      nn::save_checkpoint(tr_out, model.to_checkpoint());
      std::printf("%s\n", nlohmann::json{{"suggestions", corpus.size()},
                                         {"accuracy", rec::evaluate_rec(model, corpus)},
                                         {"checkpoint", tr_out}}
                              .dump()
                              .c_str());
    } else if (*recommend) {
      const rec::RecModel model = rec::RecModel::from_checkpoint(nn::load_checkpoint(rc_ckpt));
      const rec::SuggestionCorpus corpus = rec::load_suggestions(rc_corpus);
      const auto r = rec::recommend(corpus, model, require_emotion(rc_emotion),
                                    require_language(rc_lang), rc_k);
      if (rc_json) {
        nlohmann::json items = nlohmann::json::array();
        for (const auto& item : r.items) {
          items.push_back({{"id", item.suggestion->id}, {"text", item.suggestion->text}, {"score", item.score}});
        }
        std::printf("%s\n", nlohmann::json{{"items", items}, {"truncated", r.truncated}}.dump().c_str());
      } else {
        for (const auto& item : r.items) std::printf("%s\n", item.suggestion->text.c_str());
        if (r.truncated) std::fprintf(stderr, "only %zu candidates available\n", r.items.size());
      }
    } else if (*serve) {
      const service::ServiceConfig cfg = service::load_service_config(sv_config);
      auto snapshot = std::make_shared<const service::Snapshot>(service::load_snapshot(cfg));
      auto log = cfg.session_log.empty() ? nullptr : std::make_shared<service::SessionLog>(cfg.session_log);
      auto pipeline = std::make_shared<service::Pipeline>(
          snapshot, cfg.threshold, std::make_shared<service::ClipStore>(cfg.clip_capacity), log);
      service::Server server(pipeline);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::fprintf(stderr, "listening on %s:%d\n", cfg.host.c_str(), cfg.port);
      server.run(cfg.host, cfg.port);
      g_server = nullptr;
    }
  } catch (const service::StageError& e) {
    std::fprintf(stderr, "error [%s]: %s\n", e.stage().c_str(), e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

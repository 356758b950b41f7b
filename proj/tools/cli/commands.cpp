#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/null_sink.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "ctxda/analysis.hpp"
#include "ctxda/checkpoint.hpp"
#include "ctxda/errors.hpp"
#include "ctxda/svg.hpp"

namespace ctxda::cli {

namespace fs = std::filesystem;

namespace {

struct AnalysisInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::shared_ptr<spdlog::logger>& logger_slot() {
  static std::shared_ptr<spdlog::logger> log =
      std::make_shared<spdlog::logger>("ctxda", std::make_shared<spdlog::sinks::null_sink_mt>());
  return log;
}

spdlog::logger& log() { return *logger_slot(); }

void require_exists(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ParseError("no " + what + " path configured");
  if (!fs::exists(p)) throw ParseError(what + " not found: " + p.string());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw ParseError("cannot write " + p.string());
  return out;
}

void write_text(const fs::path& p, const std::string& text) { open_out(p) << text; }

std::string run_suffix(int runs, int i) { return runs == 1 ? "" : ".run" + std::to_string(i); }

fs::path checkpoint_path(const RunConfig& cfg, ModelKind kind, int i) {
  return cfg.output_dir / (to_string(kind) + run_suffix(cfg.runs, i) + ".ckpt.json");
}

fs::path records_path(const RunConfig& cfg, int i) {
  return cfg.output_dir / ("records" + run_suffix(cfg.runs, i) + ".jsonl");
}

fs::path train_corpus_path(const RunConfig& cfg) {
  return cfg.train_corpus.empty() ? cfg.output_dir / "train.jsonl" : cfg.train_corpus;
}

fs::path test_corpus_path(const RunConfig& cfg) {
  return cfg.test_corpus.empty() ? cfg.output_dir / "test.jsonl" : cfg.test_corpus;
}

void print_stats(std::ostream& out, const std::string& name, std::span<const Conversation> convs) {
  const auto s = corpus_stats(convs);
  out << fmt::format("{}: {} conversations, {} utterances, {} tags\n", name, s.conversations,
                     s.utterances, s.distinct_tags);
}

std::vector<std::string> texts_of(std::span<const Conversation> convs) {
  std::vector<std::string> texts;
  for (const auto& c : convs)
    for (const auto& u : c.utterances) texts.push_back(u.text);
  return texts;
}

}  // namespace

RunConfig resolve_config(const Overrides& o) {
  RunConfig cfg = o.config ? RunConfig::load(*o.config) : RunConfig{};
  if (o.model) cfg.model = parse_model_kind(*o.model);
  if (o.encoder) cfg.encoder = parse_encoder_kind(*o.encoder);
  if (o.seed) cfg.set_seed(*o.seed);
  if (o.out) cfg.output_dir = *o.out;
  if (o.runs) cfg.runs = *o.runs;
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

void cmd_prepare(const RunConfig& cfg, std::ostream& out) {
  std::vector<Conversation> train_set;
  std::vector<Conversation> test_set;
  if (cfg.corpus_format == "swda") {
    require_exists(cfg.swda_dir, "SwDA directory");
    require_exists(cfg.tag_map, "tag map");
    require_exists(cfg.test_ids, "test id list");
    const auto map = TagMap::load(cfg.tag_map);
    const auto all = load_swda_csv(cfg.swda_dir, map, cfg.swda);
    const auto ids = load_id_list(cfg.test_ids);
    std::tie(train_set, test_set) = split_by_ids(all, ids);
  } else {
    require_exists(cfg.train_corpus, "training corpus");
    train_set = load_jsonl(cfg.train_corpus);
    if (!cfg.test_corpus.empty()) {
      require_exists(cfg.test_corpus, "test corpus");
      test_set = load_jsonl(cfg.test_corpus);
    }
  }

  fs::create_directories(cfg.output_dir);
  write_jsonl(train_set, cfg.output_dir / "train.jsonl");
  if (!test_set.empty()) write_jsonl(test_set, cfg.output_dir / "test.jsonl");
  std::vector<Conversation> both = train_set;
  both.insert(both.end(), test_set.begin(), test_set.end());
  TagVocabulary::build(both).save(cfg.output_dir / "tags.txt");

  if (!cfg.embeddings.empty()) {
    require_exists(cfg.embeddings, "embeddings file");
    const auto table = load_embeddings(cfg.embeddings);
    std::set<std::string> tokens;
    for (const auto& t : texts_of(both))
      for (auto& tok : tokenize(t)) tokens.insert(std::move(tok));
    EmbeddingTable cache(table.dim());
    for (const auto& tok : tokens)
      if (const auto* v = table.find(tok)) cache.set(tok, *v);
    save_embeddings(cache, cfg.output_dir / "embeddings.txt");
    out << fmt::format("embeddings: {} of {} corpus tokens covered (dim {})\n", cache.size(),
                       tokens.size(), table.dim());
  }

  print_stats(out, "train", train_set);
  if (!test_set.empty()) print_stats(out, "test", test_set);
  out << fmt::format("tags: {}\n", TagVocabulary::build(both).size());
  if (!test_set.empty()) {
    out << fmt::format("majority baseline: {:.2f}%\n",
                       majority_baseline(all_tags(train_set), all_tags(test_set)));
  }
}

void cmd_synth(const RunConfig& cfg, std::ostream& out) {
  SyntheticSpec train_spec = cfg.synthetic;
  SyntheticSpec test_spec = cfg.synthetic;
  test_spec.num_conversations = cfg.synthetic_test_conversations;
  test_spec.seed = cfg.synthetic.seed + 1000003;
  const auto train_set = generate_synthetic(train_spec);
  auto test_set = generate_synthetic(test_spec);
  for (auto& c : test_set) {
    c.id = "test_" + c.id;
    for (auto& u : c.utterances) u.conversation_id = c.id;
  }

  fs::create_directories(cfg.output_dir);
  write_jsonl(train_set, cfg.output_dir / "train.jsonl");
  write_jsonl(test_set, cfg.output_dir / "test.jsonl");
  std::vector<std::string> tags;
  for (std::size_t k = 0; k < cfg.synthetic.num_classes; ++k) tags.push_back(synthetic_tag(k));
  TagVocabulary(tags).save(cfg.output_dir / "tags.txt");
  save_embeddings(synthetic_embeddings(cfg.synthetic, cfg.synthetic_embedding_dim,
                                       cfg.synthetic.seed + 7),
                  cfg.output_dir / "embeddings.txt");

  print_stats(out, "train", train_set);
  print_stats(out, "test", test_set);
  out << fmt::format("rule: {}\n", to_string(cfg.synthetic.rule));
  if (cfg.synthetic.rule == LabelRule::kPreviousClass) {
    out << fmt::format("no-context Bayes accuracy: {:.2f}%\n",
                       bayes_no_context_accuracy(cfg.synthetic));
  }
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
  const fs::path corpus = train_corpus_path(cfg);
  require_exists(corpus, "training corpus");
  const auto convs = load_jsonl(corpus);
  const fs::path tags_file = corpus.parent_path() / "tags.txt";
  const TagVocabulary tags =
      fs::exists(tags_file) ? TagVocabulary::load(tags_file) : TagVocabulary::build(convs);

  EncoderSpec spec;
  spec.kind = cfg.encoder;
  spec.pooling = cfg.pooling;
  if (cfg.encoder == EncoderKind::kWord || cfg.encoder == EncoderKind::kConcat) {
    spec.embeddings = cfg.embeddings.empty() ? corpus.parent_path() / "embeddings.txt" : cfg.embeddings;
    require_exists(spec.embeddings, "embeddings file");
  }
  if (cfg.encoder == EncoderKind::kPrecomputed) {
    spec.features = cfg.features;
    require_exists(spec.features, "precomputed features file");
  }
  if (cfg.encoder == EncoderKind::kChar || cfg.encoder == EncoderKind::kConcat) {
    log().info("training character language model ({} hidden units)", cfg.char_lm.hidden_dim);
    const auto texts = texts_of(convs);
    spec.char_lm = std::make_shared<const CharLanguageModel>(train_char_lm(texts, cfg.char_lm));
  }
  const auto encoder = make_encoder(spec);
  spec.dim = encoder->dim();
  const auto windows = build_windows(convs, cfg.train.n_context, *encoder, tags);
  log().info("{} training windows, feature dim {}", windows.size(), spec.dim);

  fs::create_directories(cfg.output_dir);
  for (int run = 0; run < cfg.runs; ++run) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed + static_cast<std::uint64_t>(run);
    std::unique_ptr<Classifier> model;
    if (cfg.model == ModelKind::kBaseline) {
      model = std::make_unique<BaselineMLP>(spec.dim, tags.size(), cfg.baseline);
    } else {
      model = std::make_unique<UttAttBiRNN>(spec.dim, tags.size(), cfg.uttatt);
    }
    Rng rng(tc.seed);
    model->init(rng);
    const auto result = train(*model, windows, tc, [&](const EpochRecord& r) {
      log().debug("epoch {} lr {:.6g} loss {:.4f} train {:.2f}% val {:.2f}%", r.epoch, r.lr,
                  r.train_loss, r.train_accuracy, r.val_accuracy);
    });

    Checkpoint ckpt;
    ckpt.model = std::move(model);
    ckpt.tags = tags;
    ckpt.encoder = spec;
    ckpt.n_context = cfg.train.n_context;
    ckpt.seed = tc.seed;
    const fs::path ckpt_path = checkpoint_path(cfg, cfg.model, run);
    save_checkpoint(ckpt, ckpt_path);
    const fs::path hist_path = cfg.output_dir / (to_string(cfg.model) + run_suffix(cfg.runs, run) +
                                                 "_history.csv");
    auto hist = open_out(hist_path);
    write_history_csv(result.history, hist);

    out << fmt::format("{} seed {}: best epoch {} of {}, validation accuracy {:.2f}%, train accuracy {:.2f}%\n",
                       to_string(cfg.model), tc.seed, result.best_epoch, result.history.size(),
                       result.best_val_accuracy,
                       result.history[static_cast<std::size_t>(result.best_epoch - 1)].train_accuracy);
    out << fmt::format("  checkpoint: {}\n", ckpt_path.string());
  }
}

namespace {

struct Scored {
  Checkpoint ckpt;
  std::vector<ContextWindow> windows;
  std::vector<Prediction> preds;
};

Scored score(const fs::path& path, std::span<const Conversation> test_set) {
  Scored s{load_checkpoint(path), {}, {}};
  std::shared_ptr<const UtteranceEncoder> encoder;
  try {
    encoder = make_encoder(s.ckpt.encoder);
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": encoder cannot be rebuilt: " + e.what());
  }
  s.windows = build_windows(test_set, s.ckpt.n_context, *encoder, s.ckpt.tags);
  s.preds = s.ckpt.model->predict(s.windows);
  return s;
}

double accuracy_of(std::span<const Prediction> preds, std::span<const ContextWindow> windows) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) hits += preds[i].argmax() == windows[i].label;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(windows.size());
}

}  // namespace

void cmd_eval(const RunConfig& cfg, const EvalOptions& opts, std::ostream& out) {
  const fs::path corpus = test_corpus_path(cfg);
  require_exists(corpus, "test corpus");
  const auto test_set = load_jsonl(corpus);
  if (test_set.empty()) throw ParseError("test corpus is empty: " + corpus.string());

  std::vector<fs::path> nc = opts.nc;
  std::vector<fs::path> wc = opts.wc;
  if (nc.empty() != wc.empty()) throw UsageError("give both --nc and --wc, or neither");
  for (int i = 0; opts.nc.empty() && i < cfg.runs; ++i) {
    nc.push_back(checkpoint_path(cfg, ModelKind::kBaseline, i));
    wc.push_back(checkpoint_path(cfg, ModelKind::kUttAttBiRNN, i));
  }
  if (nc.size() != wc.size()) throw UsageError("--nc and --wc need the same number of checkpoints");

  fs::create_directories(cfg.output_dir);
  auto summary = open_out(cfg.output_dir / "accuracy.csv");
  summary << "run,model,accuracy\n";
  for (std::size_t run = 0; run < nc.size(); ++run) {
    const Scored a = score(nc[run], test_set);
    const Scored b = score(wc[run], test_set);
    if (!(a.ckpt.tags == b.ckpt.tags)) {
      throw CheckpointError("tag vocabularies differ between " + nc[run].string() + " and " +
                            wc[run].string());
    }
    const auto records = make_eval_records(b.windows, a.preds, b.preds, b.ckpt.tags, test_set);
    const fs::path rec_path = nc.size() == 1 ? cfg.output_dir / "records.jsonl"
                                             : cfg.output_dir / ("records.run" + std::to_string(run) + ".jsonl");
    write_records(records, rec_path);
    const auto acc = accuracy(records);
    out << fmt::format("run {}: {} records -> {}\n", run, records.size(), rec_path.string());
    out << fmt::format("  NC ({}): {:.2f}%\n", to_string(a.ckpt.model->kind()), acc.nc);
    out << fmt::format("  WC ({}): {:.2f}%\n", to_string(b.ckpt.model->kind()), acc.wc);
    summary << fmt::format("{},nc,{:.2f}\n{},wc,{:.2f}\n", run, acc.nc, run, acc.wc);
  }

  if (!opts.ensemble.empty()) {
    std::vector<Scored> members;
    for (const auto& p : opts.ensemble) members.push_back(score(p, test_set));
    for (const auto& m : members) {
      if (!(m.ckpt.tags == members.front().ckpt.tags)) {
        throw CheckpointError("tag vocabularies differ among ensemble checkpoints");
      }
    }
    std::vector<Prediction> averaged;
    for (std::size_t i = 0; i < members.front().windows.size(); ++i) {
      std::vector<Prediction> row;
      for (const auto& m : members) row.push_back(m.preds[i]);
      averaged.push_back(ensemble_average(row));
    }
    const double acc = accuracy_of(averaged, members.front().windows);
    out << fmt::format("ensemble of {} checkpoints: {:.2f}%\n", members.size(), acc);
    summary << fmt::format("all,ensemble,{:.2f}\n", acc);
  }
}

void cmd_analyze(const RunConfig& cfg, const AnalyzeOptions& opts, std::ostream& out) {
  std::vector<fs::path> files = opts.records;
  if (files.empty()) {
    for (int i = 0; i < cfg.runs; ++i) files.push_back(records_path(cfg, i));
  }
  std::vector<std::vector<EvalRecord>> runs;
  for (const auto& f : files) {
    if (!fs::exists(f)) throw AnalysisInputError("records file not found: " + f.string());
    try {
      runs.push_back(load_records(f));
    } catch (const ParseError& e) {
      throw AnalysisInputError(e.what());
    }
    if (runs.back().empty()) throw AnalysisInputError("records file is empty: " + f.string());
  }
  const auto& records = runs.front();
  fs::create_directories(cfg.output_dir);

  const auto acc = accuracy(records);
  out << fmt::format("records: {} (from {})\n", records.size(), files.front().string());
  out << fmt::format("accuracy NC {:.2f}%  WC {:.2f}%\n", acc.nc, acc.wc);

  const auto failures = failure_pairs(records);
  auto f_csv = open_out(cfg.output_dir / "failure_pairs.csv");
  write_pairs_csv(failures, f_csv);
  const auto rescue = rescue_pairs(records);
  auto r_csv = open_out(cfg.output_dir / "rescue_pairs.csv");
  write_pairs_csv(rescue.rows, r_csv);
  out << fmt::format("shared failures: {} groups\n", failures.size());
  out << fmt::format("rescued by context: {} samples ({:.2f}%)\n", rescue.total, rescue.pct);

  const auto conf = confidence_stats(records);
  auto c_csv = open_out(cfg.output_dir / "confidence.csv");
  write_confidence_csv(conf, c_csv);
  out << fmt::format("confidence NC mean {:.4f} median {:.4f}  WC mean {:.4f} median {:.4f}\n",
                     conf.nc_mean, conf.nc_median, conf.wc_mean, conf.wc_median);

  std::vector<double> profile;
  if (opts.attention) {
    try {
      profile = attention_profile_mean(std::span<const EvalRecord>(records));
      auto p_csv = open_out(cfg.output_dir / "attention_profile.csv");
      write_profile_csv(profile, p_csv);
      out << "attention profile (a_0 first):";
      for (double w : profile) out << fmt::format(" {:.4f}", w);
      out << '\n';
      if (runs.size() > 1) {
        const auto multi = attention_profile_mean(std::span<const std::vector<EvalRecord>>(runs));
        auto m_csv = open_out(cfg.output_dir / "attention_profile_runs.csv");
        write_profile_csv(multi, m_csv);
        out << fmt::format("attention profile averaged over {} runs:", runs.size());
        for (double w : multi) out << fmt::format(" {:.4f}", w);
        out << '\n';
      }
      const auto slice = short_utterance_slice(records, cfg.short_max_tokens);
      auto s_csv = open_out(cfg.output_dir / "short_slice.csv");
      s_csv << "slot,full,short\n";
      for (std::size_t k = 0; k < slice.full.size(); ++k) {
        s_csv << fmt::format("{},{:.6f},{}\n", k, slice.full[k],
                             slice.slice ? fmt::format("{:.6f}", (*slice.slice)[k]) : "");
      }
      if (slice.slice) {
        out << fmt::format("short utterances (<= {} tokens): {} records, a_1 {:.4f} vs {:.4f} overall\n",
                           cfg.short_max_tokens, slice.count,
                           slice.slice->size() > 1 ? (*slice.slice)[1] : 0.0,
                           slice.full.size() > 1 ? slice.full[1] : 0.0);
      } else {
        out << fmt::format("short utterances (<= {} tokens): none\n", cfg.short_max_tokens);
      }
    } catch (const UsageError& e) {
      throw AnalysisInputError(e.what());
    }
  }

  if (cfg.svg) {
    const std::size_t n = std::min<std::size_t>(30, conf.nc_series.size());
    const LineSeries series[] = {
        {"NC", {conf.nc_series.begin(), conf.nc_series.begin() + static_cast<long>(n)}},
        {"WC", {conf.wc_series.begin(), conf.wc_series.begin() + static_cast<long>(n)}}};
    write_text(cfg.output_dir / "confidence.svg",
               line_chart_svg("Prediction confidence, first 30 test utterances", series));
    if (!profile.empty()) {
      std::vector<std::string> labels;
      for (std::size_t k = 0; k < profile.size(); ++k) labels.push_back("utt" + std::to_string(k));
      write_text(cfg.output_dir / "attention.svg",
                 bar_chart_svg("Mean attention weight per utterance", labels, profile));
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

spdlog::level::level_enum level_from_env() {
  const char* v = std::getenv("CTXDA_LOG");
  if (v == nullptr || *v == '\0') return spdlog::level::info;
  const auto level = spdlog::level::from_str(v);
  return level;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dialogue-act classification with context"};
  app.require_subcommand(1);
  Overrides o;
  std::string config;
  std::string model;
  std::string encoder;
  std::uint64_t seed = 0;
  std::string out_dir;
  int runs = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON run configuration");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--runs", runs, "number of seeded runs");
  };
  auto* prepare = app.add_subcommand("prepare", "canonicalize a corpus");
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  auto* train_cmd = app.add_subcommand("train", "train a model");
  auto* eval = app.add_subcommand("eval", "score the test corpus");
  auto* analyze = app.add_subcommand("analyze", "tables, confidence and attention analysis");
  for (auto* sub : {prepare, synth, train_cmd, eval, analyze}) add_common(sub);
  for (auto* sub : {prepare, train_cmd}) {
    sub->add_option("--encoder", encoder, "word | char | concat | precomputed");
  }
  train_cmd->add_option("--model", model, "baseline | uttattbirnn");
  EvalOptions eval_opts;
  std::vector<std::string> nc, wc, ens, recs;
  eval->add_option("--nc", nc, "no-context checkpoint(s)");
  eval->add_option("--wc", wc, "context checkpoint(s)");
  eval->add_option("--ensemble", ens, "checkpoints whose predictions are averaged");
  AnalyzeOptions analyze_opts;
  bool no_attention = false;
  analyze->add_option("--records", recs, "evaluation record file(s), one per run");
  analyze->add_flag("--no-attention", no_attention, "skip attention analysis");

  std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_tail.begin(), argv_tail.end());
  try {
    app.parse(argv_tail);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  auto& log_ptr = logger_slot();
  auto console = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  console->set_pattern("[%l] %v");
  log_ptr = std::make_shared<spdlog::logger>("ctxda", console);
  log_ptr->set_level(level_from_env());

  CLI::App* active = app.get_subcommands().front();
  try {
    if (!config.empty()) o.config = config;
    if (!model.empty()) o.model = model;
    if (!encoder.empty()) o.encoder = encoder;
    if (active->count("--seed") > 0) o.seed = seed;
    if (!out_dir.empty()) o.out = out_dir;
    if (active->count("--runs") > 0) o.runs = runs;
    if (o.config) require_exists(*o.config, "config file");
    const RunConfig cfg = resolve_config(o);

    fs::create_directories(cfg.output_dir);
    auto file_sink = std::make_shared<spdlog::sinks::basic_file_sink_mt>(
        (cfg.output_dir / "ctxda.log").string());
    file_sink->set_pattern("%Y-%m-%d %H:%M:%S.%e [%l] %v");
    file_sink->set_level(spdlog::level::debug);
    log_ptr->sinks().push_back(file_sink);
    log_ptr->info("{} (seed {}, output {})", active->get_name(), cfg.seed, cfg.output_dir.string());

    if (active == prepare) {
      cmd_prepare(cfg, out);
    } else if (active == synth) {
      cmd_synth(cfg, out);
    } else if (active == train_cmd) {
      cmd_train(cfg, out);
    } else if (active == eval) {
      eval_opts.nc.assign(nc.begin(), nc.end());
      eval_opts.wc.assign(wc.begin(), wc.end());
      eval_opts.ensemble.assign(ens.begin(), ens.end());
      cmd_eval(cfg, eval_opts, out);
    } else {
      analyze_opts.records.assign(recs.begin(), recs.end());
      analyze_opts.attention = !no_attention;
      cmd_analyze(cfg, analyze_opts, out);
    }
    log_ptr->flush();
    log_ptr->sinks().pop_back();
    return kOk;
  } catch (const DivergenceError& e) {
    err << "training failed in epoch " << e.epoch() << ": " << e.what() << '\n';
    return kTrainingFailure;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kCheckpointFailure;
  } catch (const AnalysisInputError& e) {
    err << "analysis input error: " << e.what() << '\n';
    return kAnalysisInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

}  // namespace ctxda::cli

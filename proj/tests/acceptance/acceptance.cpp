// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance                 run everything
//   acceptance --criterion N   run one criterion; exit 0 pass, 1 fail, 77 skip

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctxda/analysis.hpp"
#include "ctxda/corpus.hpp"
#include "ctxda/encoders.hpp"
#include "ctxda/model.hpp"
#include "ctxda/optim.hpp"
#include "fixture_records.hpp"
#include "test_support.hpp"

using namespace ctxda;
using namespace ctxda::testing;

namespace {

enum class Outcome { kPass, kFail, kSkip };

struct Verdict {
  Outcome outcome = Outcome::kFail;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;  // 0 = none
  std::function<Verdict()> run;
};

Verdict pass_if(bool ok, std::string detail) {
  return {ok ? Outcome::kPass : Outcome::kFail, std::move(detail)};
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. gradients

Verdict gradients() {
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto windows = random_windows(4, 5, 6, 5, seed);
    UttAttBiRNN att(6, 5, UttAttConfig{4, 8, 0.0, false, OutputHead::kAttention});
    BaselineMLP mlp(6, 5, BaselineConfig{8, 6, 0.0});
    Rng rng(seed);
    att.init(rng);
    mlp.init(rng);
    for (Classifier* m : {static_cast<Classifier*>(&att), static_cast<Classifier*>(&mlp)}) {
      const auto g = check_gradients(*m, windows, 1e-5);
      checked += g.checked;
      if (g.max_rel > worst) {
        worst = g.max_rel;
        where = to_string(m->kind()) + " " + g.worst;
      }
    }
  }
  return pass_if(worst < 1e-4, "max rel err " + fmt("%.3g", worst) + " over " +
                                   std::to_string(checked) + " entries (worst " + where +
                                   "), limit 1e-4");
}

// ---------------------------------------------------------------------------
// 2. simplex invariants

Verdict simplex() {
  std::size_t passes = 0;
  double att_dev = 0.0, pred_dev = 0.0;
  bool in_range = true;
  auto check = [&](const std::vector<double>& v, double& dev) {
    double s = 0.0;
    for (double x : v) {
      s += x;
      in_range = in_range && x >= 0.0 && x <= 1.0;
    }
    dev = std::max(dev, std::abs(s - 1.0));
  };
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const auto windows = random_windows(300, 5, 8, 42, seed * 7);
    UttAttBiRNN att(8, 42, UttAttConfig{6, 0, 0.2, seed % 2 == 0, OutputHead::kAttention});
    BaselineMLP mlp(8, 42, BaselineConfig{10, 6, 0.0});
    att.init(rng);
    mlp.init(rng);
    // Scale weights up so some softmaxes saturate.
    const double scale = 1.0 + static_cast<double>(seed % 5) * 2.0;
    for (Parameter* p : att.parameters())
      for (double& v : p->value.values()) v *= scale;
    for (const auto& p : att.predict(windows)) {
      check(p.probs, pred_dev);
      check(p.attention->weights, att_dev);
      ++passes;
    }
    for (const auto& p : mlp.predict(windows)) {
      check(p.probs, pred_dev);
      ++passes;
    }
  }
  return pass_if(passes >= 10000 && att_dev < 1e-6 && pred_dev < 1e-9 && in_range,
                 std::to_string(passes) + " passes, attention |sum-1| " + fmt("%.2g", att_dev) +
                     " (limit 1e-6), prediction |sum-1| " + fmt("%.2g", pred_dev) +
                     " (limit 1e-9), entries in [0,1]: " + (in_range ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 3. hand oracles

Verdict hand_oracles() {
  std::vector<std::string> failed;
  auto near = [&](const char* what, double got, double want) {
    if (!(std::abs(got - want) <= 1e-9)) failed.push_back(what);
  };

  {
    RNNDirectionParams p("f", 1, 1);
    p.w_u.value(0, 0) = 0.5;
    p.w_h.value(0, 0) = 0.5;
    p.b_h.value(0, 0) = 0.5;
    const FeatureVector seq[] = {FeatureVector(std::vector<double>{1.0}),
                                 FeatureVector(std::vector<double>{-1.0})};
    const auto h = rnn_direction(seq, p, false);
    near("rnn h1", h[0][0], 0.7615941559557649);
    near("rnn h2", h[1][0], 0.3633994843890525);  // tanh(0.5 * tanh(1))
  }
  {
    const MLSTMParams p(3, 2);
    const MLSTMState prev{Tensor2D(2, 1), Tensor2D::from_rows({{0.8}, {-0.6}})};
    Tensor2D x(3, 1);
    x(0, 0) = 1.0;
    const auto s = mlstm_step(x, prev, p);
    near("mlstm c0", s.c[0], 0.4);
    near("mlstm c1", s.c[1], -0.3);
    near("mlstm h0", s.h[0], 0.5 * std::tanh(0.4));
    near("mlstm h1", s.h[1], 0.5 * std::tanh(-0.3));
  }
  {
    Parameter w("w", 1, 1);
    w.value(0, 0) = 0.5;
    Parameter* ps[] = {&w};
    AdamState st(ps, 1e-4);
    w.grad(0, 0) = 1.0;
    adam_step(ps, st);
    near("adam t=1", w.value(0, 0), 0.5 - 1e-4 / (1.0 + 1e-8));
    const double before = w.value(0, 0);
    w.grad(0, 0) = 0.5;
    adam_step(ps, st);
    // m = 0.09 + 0.05, v = 0.000999 + 0.00025, bias corrections 0.19 and 0.001999.
    const double mhat = 0.14 / 0.19;
    const double vhat = 0.001249 / 0.001999;
    near("adam t=2", w.value(0, 0), before - 1e-4 * mhat / (std::sqrt(vhat) + 1e-8));
  }
  {
    Prediction u;
    u.probs.assign(42, 1.0 / 42.0);
    const double ce = cross_entropy(u, 0);
    if (!(std::abs(ce - 3.737670) <= 1e-6)) failed.push_back("ce ln42");
    near("ce ln42 exact", ce, 3.7376696182833684);
    Prediction q;
    q.probs = {0.25, 0.75};
    near("ce ln4", cross_entropy(q, 0), 1.3862943611198906);
  }

  std::string detail = failed.empty() ? "rnn, mlstm, adam t=1/t=2, cross-entropy within 1e-9"
                                      : "mismatch:";
  for (const auto& f : failed) detail += " " + f;
  return pass_if(failed.empty(), detail);
}

// ---------------------------------------------------------------------------
// Synthetic experiments

struct Dataset {
  std::vector<ContextWindow> train;
  std::vector<ContextWindow> test;
  std::vector<Conversation> test_convs;
  double bayes = 0.0;
};

Dataset synthetic_dataset(LabelRule rule, std::size_t conversations, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.rule = rule;
  spec.num_conversations = conversations;
  spec.conversation_length = 10;
  spec.seed = seed;
  auto train_convs = generate_synthetic(spec);
  SyntheticSpec test_spec = spec;
  test_spec.num_conversations = 20;
  test_spec.seed = seed + 1000003;
  Dataset d;
  d.test_convs = generate_synthetic(test_spec);

  auto table = std::make_shared<EmbeddingTable>(synthetic_embeddings(spec, 16, seed + 7));
  const WordMeanEncoder enc(table);
  std::vector<std::string> tags;
  for (std::size_t k = 0; k < spec.num_classes; ++k) tags.push_back(synthetic_tag(k));
  const TagVocabulary vocab(tags);
  d.train = build_windows(train_convs, 4, enc, vocab);
  d.test = build_windows(d.test_convs, 4, enc, vocab);
  if (rule == LabelRule::kPreviousClass) d.bayes = bayes_no_context_accuracy(spec);
  return d;
}

TrainConfig desk_config(std::uint64_t seed, int max_epochs, int patience) {
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_epochs = max_epochs;
  cfg.learning_rate = 0.01;
  cfg.dropout = 0.0;
  cfg.patience = patience;
  cfg.seed = seed;
  return cfg;
}

struct PairRun {
  double nc_acc = 0.0;
  double wc_acc = 0.0;
  double nc_conf = 0.0;
  double wc_conf = 0.0;
  std::vector<double> profile;  // mean attention, a_0 first
};

struct WcSetup {
  std::size_t hidden = 32;
  double dropout = 0.0;
  bool mask_pads = false;
};

PairRun train_pair(const Dataset& d, std::uint64_t seed, WcSetup setup, int max_epochs,
                   int patience) {
  const TrainConfig cfg = desk_config(seed, max_epochs, patience);
  Rng rng(seed);
  BaselineMLP nc(16, 6, BaselineConfig{64, 32, 0.0});
  UttAttBiRNN wc(16, 6,
                 UttAttConfig{setup.hidden, 0, setup.dropout, setup.mask_pads, OutputHead::kAttention});
  nc.init(rng);
  wc.init(rng);
  train(nc, d.train, cfg);
  train(wc, d.train, cfg);

  PairRun r;
  const auto np = nc.predict(d.test);
  const auto wp = wc.predict(d.test);
  r.profile.assign(5, 0.0);
  std::size_t nc_ok = 0, wc_ok = 0;
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    nc_ok += np[i].argmax() == d.test[i].label;
    wc_ok += wp[i].argmax() == d.test[i].label;
    r.nc_conf += np[i].confidence();
    r.wc_conf += wp[i].confidence();
    for (std::size_t k = 0; k < 5; ++k) r.profile[k] += wp[i].attention->weights[k];
  }
  const double n = static_cast<double>(d.test.size());
  r.nc_acc = 100.0 * static_cast<double>(nc_ok) / n;
  r.wc_acc = 100.0 * static_cast<double>(wc_ok) / n;
  r.nc_conf /= n;
  r.wc_conf /= n;
  for (double& a : r.profile) a /= n;
  return r;
}

// ---------------------------------------------------------------------------
// 4. overfit

struct Reached {};

Verdict overfit() {
  SyntheticSpec spec;
  spec.num_conversations = 2;
  spec.conversation_length = 10;
  spec.seed = 4;
  const auto convs = generate_synthetic(spec);
  auto table = std::make_shared<EmbeddingTable>(synthetic_embeddings(spec, 16, 5));
  const WordMeanEncoder enc(table);
  const auto windows = build_windows(convs, 4, enc, TagVocabulary::build(convs));

  TrainConfig cfg = desk_config(1, 500, 500);
  cfg.batch_size = 20;
  cfg.lr_decay = 1.0;
  std::string detail = std::to_string(windows.size()) + " windows;";
  bool ok = windows.size() == 20;
  const std::size_t classes = TagVocabulary::build(convs).size();
  BaselineMLP nc(16, classes, BaselineConfig{64, 32, 0.0});
  UttAttBiRNN wc(16, classes, UttAttConfig{16, 0, 0.0});
  Rng rng(2);
  nc.init(rng);
  wc.init(rng);
  for (Classifier* m : {static_cast<Classifier*>(&nc), static_cast<Classifier*>(&wc)}) {
    int reached = 0;
    try {
      train(*m, windows, windows, cfg, [&](const EpochRecord& e) {
        if (reached == 0 && e.train_accuracy == 100.0) {
          reached = e.epoch;
          throw Reached{};
        }
      });
    } catch (const Reached&) {
    }
    ok = ok && reached > 0;
    detail += " " + to_string(m->kind()) + " " +
              (reached ? "100% at epoch " + std::to_string(reached) : std::string("never 100%"));
  }
  return pass_if(ok, detail + " (limit 500)");
}

// ---------------------------------------------------------------------------
// 5. context effect

Verdict context_effect() {
  const auto d = synthetic_dataset(LabelRule::kPreviousClass, 100, 11);
  const auto r = train_pair(d, 11, WcSetup{}, 150, 30);
  const bool ok = r.wc_acc - r.nc_acc >= 20.0 && r.wc_acc > d.bayes;
  return pass_if(ok, "WC " + fmt("%.2f", r.wc_acc) + "%, NC " + fmt("%.2f", r.nc_acc) +
                         "%, gap " + fmt("%.2f", r.wc_acc - r.nc_acc) + " (need >= 20), Bayes NC " +
                         fmt("%.2f", d.bayes) + "%");
}

// ---------------------------------------------------------------------------
// 6 and 7 share ten seeded runs on the previous-class corpus. Pads are
// masked out of the attention softmax here: unmasked, the end slots carry the
// full-window BiRNN summaries and soak up weight (reported alongside).

constexpr WcSetup kMasked{32, 0.2, true};
constexpr WcSetup kUnmasked{32, 0.2, false};

std::vector<PairRun> seeded_runs(LabelRule rule, WcSetup setup, std::uint64_t first) {
  std::vector<PairRun> out;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto d = synthetic_dataset(rule, 100, first + s);
    out.push_back(train_pair(d, first + s, setup, 150, 30));
  }
  return out;
}

const std::vector<PairRun>& previous_rule_runs() {
  static const std::vector<PairRun> runs = seeded_runs(LabelRule::kPreviousClass, kMasked, 100);
  return runs;
}

std::vector<double> mean_profile(const std::vector<PairRun>& runs) {
  std::vector<double> m(5, 0.0);
  for (const auto& r : runs)
    for (std::size_t k = 0; k < 5; ++k) m[k] += r.profile[k] / static_cast<double>(runs.size());
  return m;
}

std::string profile_text(const std::vector<double>& p) {
  std::string s = "[";
  for (std::size_t k = 0; k < p.size(); ++k) s += (k ? " " : "") + fmt("%.3f", p[k]);
  return s + "]";
}

Verdict attention_ordering() {
  const auto prev = mean_profile(previous_rule_runs());
  const bool prev_ok = prev[1] > prev[2] && prev[1] > prev[3] && prev[1] > prev[4];

  const auto cur = mean_profile(seeded_runs(LabelRule::kCurrentClass, kMasked, 200));
  bool cur_ok = true;
  for (std::size_t k = 1; k < 5; ++k) cur_ok = cur_ok && cur[0] > cur[k];
  const auto unmasked = mean_profile(seeded_runs(LabelRule::kPreviousClass, kUnmasked, 100));
  return pass_if(prev_ok && cur_ok, "pads masked, 10 runs each; previous-class a = " +
                                        profile_text(prev) + " (a1 largest of a1..a4: " +
                                        (prev_ok ? "yes" : "no") + "); current-class a = " +
                                        profile_text(cur) + " (a0 largest: " +
                                        (cur_ok ? "yes" : "no") +
                                        "); unmasked previous-class a = " + profile_text(unmasked));
}

Verdict confidence_effect() {
  int wins = 0;
  std::string per_run;
  for (const auto& r : previous_rule_runs()) {
    wins += r.wc_conf > r.nc_conf;
    per_run += " " + fmt("%.2f", r.wc_conf) + "/" + fmt("%.2f", r.nc_conf);
  }
  return pass_if(wins >= 8, "WC more confident in " + std::to_string(wins) +
                                "/10 runs (need >= 8); WC/NC mean max-prob:" + per_run);
}

// ---------------------------------------------------------------------------
// 8. analysis arithmetic

Verdict analysis_arithmetic() {
  const auto records = reference_fixture();
  const auto fail = failure_pairs(records);
  const auto rescue = rescue_pairs(records);
  std::map<std::string, double> pct;
  for (const auto& r : fail) pct["fail " + r.gt + "/" + r.nc + "/" + r.wc] = r.pct;
  for (const auto& r : rescue.rows) pct["rescue " + r.gt + "/" + r.nc + "/" + r.wc] = r.pct;

  struct Want {
    std::string key;
    double value;
  };
  // Printed values of the reference tables.
  const std::vector<Want> wants = {
      {"fail sv/sd/sd", 4.73},   {"fail sd/sv/sv", 1.22},  {"rescue ny/b/ny", 0.79},
      {"rescue aa/b/aa", 0.69},  {"rescue aa/sd/aa", 0.28}, {"rescue b/aa/b", 0.55},
      {"rescue b/%/b", 0.38},
  };
  bool ok = records.size() == kReferenceTotal;
  std::string detail;
  for (const auto& w : wants) {
    const double got = pct.count(w.key) ? pct[w.key] : -1.0;
    const bool hit = std::abs(got - w.value) < 0.005 / 2;
    ok = ok && hit;
    if (!hit) detail += " " + w.key + " got " + fmt("%.2f", got) + " want " + fmt("%.2f", w.value) + ";";
  }
  const bool total_ok = rescue.total == 330 && std::abs(rescue.pct - 7.88) < 0.0025;
  ok = ok && total_ok;
  if (!total_ok) detail += " rescue total " + std::to_string(rescue.total) + " " + fmt("%.2f", rescue.pct) + ";";
  return pass_if(ok, ok ? "all 7 rows and rescue total 330 -> 7.88% match"
                        : "mismatch:" + detail);
}

// ---------------------------------------------------------------------------
// 9. SwDA corpus statistics

Verdict swda_stats() {
  const char* dir = std::getenv("CTXDA_SWDA_DIR");
  const char* map = std::getenv("CTXDA_SWDA_TAG_MAP");
  const char* ids = std::getenv("CTXDA_SWDA_TEST_IDS");
  if (!dir || !map || !ids) {
    return {Outcome::kSkip,
            "SwDA not available (set CTXDA_SWDA_DIR, CTXDA_SWDA_TAG_MAP, CTXDA_SWDA_TEST_IDS)"};
  }
  const auto convs = load_swda_csv(dir, TagMap::load(map));
  const auto test_ids = load_id_list(ids);
  const auto [train_set, test_set] = split_by_ids(convs, test_ids);
  const auto tr = corpus_stats(train_set);
  const auto te = corpus_stats(test_set);
  const auto tags = TagVocabulary::build(convs);
  const double maj = majority_baseline(all_tags(train_set), all_tags(test_set));
  const bool ok = tr.conversations == 1115 && tr.utterances == 196258 && te.conversations == 19 &&
                  te.utterances == 4186 && tags.size() == 42 && round2(maj) == 31.50;
  return pass_if(ok, "train " + std::to_string(tr.conversations) + "/" + std::to_string(tr.utterances) +
                         ", test " + std::to_string(te.conversations) + "/" +
                         std::to_string(te.utterances) + ", " + std::to_string(tags.size()) +
                         " tags, majority " + fmt("%.2f", maj) + "%");
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "gradient correctness", 30, gradients},
      {2, "simplex invariants", 60, simplex},
      {3, "hand-oracle equivalence", 0, hand_oracles},
      {4, "overfit sanity", 120, overfit},
      {5, "context effect", 600, context_effect},
      {6, "attention ordering", 0, attention_ordering},
      {7, "confidence effect", 0, confidence_effect},
      {8, "analysis arithmetic", 0, analysis_arithmetic},
      {9, "SwDA corpus statistics", 0, swda_stats},
  };
  return all;
}

Outcome run_one(const Criterion& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = c.run();
  } catch (const std::exception& e) {
    v = {Outcome::kFail, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (v.outcome == Outcome::kPass && c.time_limit_s > 0 && secs > c.time_limit_s) {
    v.outcome = Outcome::kFail;
    v.detail += "; over time limit " + fmt("%.0f", c.time_limit_s) + " s";
  }
  const char* tag = v.outcome == Outcome::kPass ? "PASS" : v.outcome == Outcome::kSkip ? "SKIP" : "FAIL";
  std::printf("[%s] criterion %d (%s): %s [%.1f s]\n", tag, c.id, c.name, v.detail.c_str(), secs);
  std::fflush(stdout);
  return v.outcome;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("ctxda acceptance suite");
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  int failed = 0, skipped = 0, ran = 0;
  for (const auto& c : criteria()) {
    if (only && c.id != only) continue;
    ++ran;
    const Outcome o = run_one(c);
    failed += o == Outcome::kFail;
    skipped += o == Outcome::kSkip;
  }
  if (failed) return 1;
  if (ran == skipped) return 77;
  return 0;
}

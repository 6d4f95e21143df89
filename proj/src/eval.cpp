// SPDX-License-Identifier: Apache-2.0
#include "pdiff/eval.hpp"

#include "pdiff/parallel.hpp"
#include "pdiff/rng.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace pdiff::eval {

using features::FeatureKind;

std::string classifier_name(Classifier c) {
  switch (c) {
    case Classifier::GbtWindow: return "gbt_window";
    case Classifier::GbtAvg: return "gbt_avg";
    case Classifier::DeepGru: return "deepgru";
  }
  throw InternalError("unknown classifier");
}

Classifier classifier_from_name(const std::string& name) {
  for (auto c : {Classifier::GbtWindow, Classifier::GbtAvg, Classifier::DeepGru})
    if (classifier_name(c) == name) return c;
  throw UsageError("unknown classifier '" + name + "' (expected gbt_window, gbt_avg or deepgru)");
}

std::vector<PreparedScore> prepare_corpus(const std::vector<score::LabeledScore>& corpus, const PrepareOptions& opts) {
  bool need_dp = false, need_hmm = false;
  for (auto k : opts.kinds) {
    need_dp |= features::uses_dp(k);
    need_hmm |= features::uses_hmm(k);
  }
  for (const auto* given : {opts.dp_assignments, opts.hmm_assignments})
    if (given && given->size() != corpus.size())
      throw DataError("fingering archive has " + std::to_string(given->size()) + " entries for " +
                      std::to_string(corpus.size()) + " scores");
  std::vector<PreparedScore> out(corpus.size());
  parallel_for(corpus.size(), opts.jobs, [&](std::size_t i) {
    const auto& ls = corpus[i];
    std::optional<fingering::FingeringAssignment> dp, hmm;
    if (need_dp)
      dp = opts.dp_assignments ? (*opts.dp_assignments)[i] : fingering::dp::assign_fingers_dp(ls.score, opts.dp);
    if (need_hmm)
      hmm = opts.hmm_assignments ? (*opts.hmm_assignments)[i] : fingering::hmm::assign_fingers_hmm(ls.score, opts.hmm);
    auto& p = out[i];
    p.id = ls.score.id;
    p.label = ls.label;
    for (auto k : opts.kinds)
      p.matrices.emplace(k, features::build_feature_matrix(ls.score, k, dp ? &*dp : nullptr, hmm ? &*hmm : nullptr));
  });
  return out;
}

int test_count(int n, double test_fraction) { return static_cast<int>(std::floor(n * test_fraction + 0.5)); }

Split split_corpus(std::span<const int> classes, std::uint64_t seed, double train_fraction) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw UsageError("train fraction must be in (0, 1)");
  auto rng = SplitMix64::named(seed, "eval-split");
  Split s;
  for (int c = 1; c <= 3; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == c) members.push_back(i);
    if (members.size() < 2)
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                      " scores; a train/test split needs at least 2");
    rng.shuffle(members);
    const int n = static_cast<int>(members.size());
    const int t = std::clamp(test_count(n, 1.0 - train_fraction), 1, n - 1);
    s.test.insert(s.test.end(), members.begin(), members.begin() + t);
    s.train.insert(s.train.end(), members.begin() + t, members.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

// --- spec ------------------------------------------------------------------------

ExperimentSpec ExperimentSpec::desk() {
  ExperimentSpec s;
  for (std::uint64_t i = 0; i < 10; ++i) s.seeds.push_back(i);
  s.search.n_configs = 20;
  s.search.window_thinning = 32;
  s.gru = gru::GruNetConfig::desk();
  return s;
}

ExperimentSpec ExperimentSpec::full() {
  ExperimentSpec s;
  for (std::uint64_t i = 0; i < 50; ++i) s.seeds.push_back(i);
  s.search.n_configs = 50;
  s.search.window_thinning = 1;
  s.gru = gru::GruNetConfig::full();
  return s;
}

void ExperimentSpec::validate() const {
  if (kinds.empty()) throw UsageError("experiment needs at least one feature kind");
  if (classifiers.empty()) throw UsageError("experiment needs at least one classifier");
  if (seeds.empty()) throw UsageError("experiment needs at least one seed");
  if (!(train_fraction > 0 && train_fraction < 1)) throw UsageError("train fraction must be in (0, 1)");
  if (window < 1 || stride < 1) throw UsageError("window and stride must be positive");
  if (search.n_configs < 1 || search.folds < 2 || search.window_thinning < 1)
    throw UsageError("invalid hyperparameter search settings");
  gru.validate();
}

nlohmann::ordered_json ExperimentSpec::to_json() const {
  nlohmann::ordered_json j;
  auto ks = nlohmann::ordered_json::array();
  for (auto k : kinds) ks.push_back(features::kind_name(k));
  auto cs = nlohmann::ordered_json::array();
  for (auto c : classifiers) cs.push_back(classifier_name(c));
  j["features"] = ks;
  j["classifiers"] = cs;
  j["seeds"] = seeds;
  j["train_fraction"] = train_fraction;
  j["window"] = window;
  j["stride"] = stride;
  j["search"] = {{"n_configs", search.n_configs}, {"folds", search.folds}, {"window_thinning", search.window_thinning}};
  j["deepgru"] = gru.to_json();
  return j;
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::ordered_json& j, const ExperimentSpec& base) {
  ExperimentSpec s = base;
  try {
    if (j.contains("features")) {
      s.kinds.clear();
      for (const auto& k : j.at("features")) s.kinds.push_back(features::kind_from_name(k.get<std::string>()));
    }
    if (j.contains("classifiers")) {
      s.classifiers.clear();
      for (const auto& c : j.at("classifiers")) s.classifiers.push_back(classifier_from_name(c.get<std::string>()));
    }
    if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    s.train_fraction = j.value("train_fraction", s.train_fraction);
    s.window = j.value("window", s.window);
    s.stride = j.value("stride", s.stride);
    if (j.contains("search")) {
      const auto& q = j.at("search");
      s.search.n_configs = q.value("n_configs", s.search.n_configs);
      s.search.folds = q.value("folds", s.search.folds);
      s.search.window_thinning = q.value("window_thinning", s.search.window_thinning);
    }
    if (j.contains("deepgru")) {
      auto merged = s.gru.to_json();
      for (const auto& [k, v] : j.at("deepgru").items()) merged[k] = v;
      s.gru = gru::GruNetConfig::from_json(merged);
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("experiment config: ") + e.what());
  }
  s.validate();
  return s;
}

// --- metrics per seed --------------------------------------------------------------

Ranking rank_correlations(std::span<const metrics::Probs> probs, std::span<const score::DifficultyLabel> labels) {
  Ranking r;
  std::vector<double> expected, bartok, henle_expected, henle;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double e = metrics::expected_class(probs[i]);
    expected.push_back(e);
    bartok.push_back(labels[i].bartok_index);
    if (labels[i].henle_grade) {
      henle_expected.push_back(e);
      henle.push_back(*labels[i].henle_grade);
    }
  }
  try {
    r.bartok = metrics::spearman(expected, bartok);
  } catch (const DataError&) {
  }
  try {
    if (henle.size() >= 2) r.henle = metrics::spearman(henle_expected, henle);
  } catch (const DataError&) {
  }
  return r;
}

void CellReport::summarize() {
  std::vector<double> tr, te, b, h;
  failures = 0;
  for (const auto& s : seeds) {
    if (!s.error.empty()) ++failures;
    if (s.train_accuracy) tr.push_back(*s.train_accuracy);
    if (s.test_accuracy) te.push_back(*s.test_accuracy);
    if (s.spearman_bartok) b.push_back(*s.spearman_bartok);
    if (s.spearman_henle) h.push_back(*s.spearman_henle);
  }
  train = metrics::mean_std(tr);
  test = metrics::mean_std(te);
  bartok = metrics::mean_std(b);
  henle = metrics::mean_std(h);
}

namespace {

struct GbtOutcome {
  SeedResult window, avg;
};

gbt::Dataset windows_of(const std::vector<PreparedScore>& corpus, std::span<const std::size_t> idx, FeatureKind kind,
                        int w, int s) {
  const int width = w * features::kind_width(kind);
  gbt::Dataset d(width);
  for (std::size_t i : idx) {
    const auto& p = corpus[i];
    for (const auto& seg : features::window_segments(p.matrices.at(kind), w, s, p.id, p.label.class3))
      d.add_row(features::flatten(seg), p.label.class3, static_cast<int>(i));
  }
  return d;
}

GbtOutcome run_gbt(const ExperimentSpec& spec, const std::vector<PreparedScore>& corpus, const Split& split,
                   FeatureKind kind, std::uint64_t seed) {
  GbtOutcome out;
  out.window.seed = out.avg.seed = seed;
  const auto train = windows_of(corpus, split.train, kind, spec.window, spec.stride);
  const auto test = windows_of(corpus, split.test, kind, spec.window, spec.stride);
  const auto search = gbt::random_search(train, spec.search, seed);
  const auto model = gbt::fit_gbt(train, search.configs[search.best].hyper, seed);

  const auto evaluate = [&](const gbt::Dataset& d, std::span<const std::size_t> scores, SeedResult& win, SeedResult& avg,
                            bool rank) {
    const auto probs = gbt::predict_dataset(model, d);
    std::vector<int> pred;
    for (const auto& p : probs) pred.push_back(metrics::argmax_class(p));
    const double wacc = metrics::balanced_accuracy(d.labels, pred);
    std::map<int, std::vector<metrics::Probs>> per_score;
    for (std::size_t r = 0; r < d.size(); ++r) per_score[d.groups[r]].push_back(probs[r]);
    std::vector<metrics::Probs> score_probs;
    std::vector<int> truth, spred;
    std::vector<score::DifficultyLabel> labels;
    for (std::size_t i : scores) {
      score_probs.push_back(gbt::average_probs(per_score.at(static_cast<int>(i))));
      truth.push_back(corpus[i].label.class3);
      spred.push_back(metrics::argmax_class(score_probs.back()));
      labels.push_back(corpus[i].label);
    }
    (rank ? win.test_accuracy : win.train_accuracy) = wacc;
    (rank ? avg.test_accuracy : avg.train_accuracy) = metrics::balanced_accuracy(truth, spred);
    if (rank) {
      const auto r = rank_correlations(score_probs, labels);
      avg.spearman_bartok = r.bartok;
      avg.spearman_henle = r.henle;
    }
  };
  evaluate(train, split.train, out.window, out.avg, false);
  evaluate(test, split.test, out.window, out.avg, true);
  return out;
}

SeedResult run_gru(const ExperimentSpec& spec, const std::vector<PreparedScore>& corpus, const Split& split,
                   FeatureKind kind, std::uint64_t seed) {
  SeedResult out;
  out.seed = seed;
  std::vector<gru::LabeledSequence> train;
  for (std::size_t i : split.train) train.push_back({&corpus[i].matrices.at(kind), corpus[i].label.class3});
  auto cfg = spec.gru;
  cfg.seed = seed;
  const auto model = gru::train_deepgru(train, cfg);
  const auto score_set = [&](std::span<const std::size_t> idx, bool rank) {
    std::vector<const features::FeatureMatrix*> mats;
    for (std::size_t i : idx) mats.push_back(&corpus[i].matrices.at(kind));
    std::vector<metrics::Probs> probs;
    std::vector<int> truth, pred;
    std::vector<score::DifficultyLabel> labels;
    const std::size_t chunk = static_cast<std::size_t>(cfg.batch);
    for (std::size_t s = 0; s < mats.size(); s += chunk) {
      const std::vector<const features::FeatureMatrix*> part(mats.begin() + static_cast<std::ptrdiff_t>(s),
                                                             mats.begin() + static_cast<std::ptrdiff_t>(std::min(mats.size(), s + chunk)));
      for (const auto& p : gru::forward_batch(model, part)) probs.push_back(p.probs);
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      truth.push_back(corpus[idx[k]].label.class3);
      pred.push_back(metrics::argmax_class(probs[k]));
      labels.push_back(corpus[idx[k]].label);
    }
    (rank ? out.test_accuracy : out.train_accuracy) = metrics::balanced_accuracy(truth, pred);
    if (rank) {
      const auto r = rank_correlations(probs, labels);
      out.spearman_bartok = r.bartok;
      out.spearman_henle = r.henle;
    }
  };
  score_set(split.train, false);
  score_set(split.test, true);
  return out;
}

std::string describe(const std::exception& e) { return e.what(); }

}  // namespace

EvaluationReport run_experiment(const ExperimentSpec& spec, const std::vector<PreparedScore>& corpus,
                                const Progress& progress) {
  spec.validate();
  if (corpus.empty()) throw DataError("experiment corpus is empty");
  for (const auto& p : corpus)
    for (auto k : spec.kinds)
      if (!p.matrices.count(k))
        throw DataError("score '" + p.id + "' has no " + features::kind_name(k) + " matrix");
  std::vector<int> classes;
  for (const auto& p : corpus) classes.push_back(p.label.class3);
  std::vector<Split> splits;
  for (auto seed : spec.seeds) splits.push_back(split_corpus(classes, seed, spec.train_fraction));

  const auto wants = [&](Classifier c) {
    return std::find(spec.classifiers.begin(), spec.classifiers.end(), c) != spec.classifiers.end();
  };
  const bool want_gbt = wants(Classifier::GbtWindow) || wants(Classifier::GbtAvg);
  const bool want_gru = wants(Classifier::DeepGru);

  struct Task {
    std::size_t seed_index;
    FeatureKind kind;
    bool gru;
  };
  std::vector<Task> tasks;
  for (std::size_t si = 0; si < spec.seeds.size(); ++si)
    for (auto k : spec.kinds) {
      if (want_gbt) tasks.push_back({si, k, false});
      if (want_gru) tasks.push_back({si, k, true});
    }
  std::vector<GbtOutcome> gbt_out(tasks.size());
  std::vector<SeedResult> gru_out(tasks.size());
  std::mutex progress_mutex;
  parallel_for(tasks.size(), spec.jobs, [&](std::size_t t) {
    const auto& task = tasks[t];
    const auto seed = spec.seeds[task.seed_index];
    const auto& split = splits[task.seed_index];
    const auto fail = [&](const std::string& msg) {
      if (task.gru) {
        gru_out[t] = SeedResult{seed, {}, {}, {}, {}, msg};
      } else {
        gbt_out[t].window = SeedResult{seed, {}, {}, {}, {}, msg};
        gbt_out[t].avg = gbt_out[t].window;
      }
    };
    try {
      if (task.gru)
        gru_out[t] = run_gru(spec, corpus, split, task.kind, seed);
      else
        gbt_out[t] = run_gbt(spec, corpus, split, task.kind, seed);
    } catch (const std::exception& e) {
      fail(describe(e));
    }
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(std::string(task.gru ? "deepgru" : "gbt") + " " + features::kind_name(task.kind) + " seed " +
               std::to_string(seed) + " done");
    }
  });

  EvaluationReport report;
  report.spec = spec;
  for (auto k : spec.kinds)
    for (auto c : spec.classifiers) {
      CellReport cell;
      cell.kind = k;
      cell.classifier = c;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t].kind != k || tasks[t].gru != (c == Classifier::DeepGru)) continue;
        if (c == Classifier::DeepGru)
          cell.seeds.push_back(gru_out[t]);
        else
          cell.seeds.push_back(c == Classifier::GbtWindow ? gbt_out[t].window : gbt_out[t].avg);
      }
      cell.summarize();
      report.cells.push_back(std::move(cell));
    }
  return report;
}

AblationReport window_ablation(const ExperimentSpec& spec, const std::vector<PreparedScore>& corpus, FeatureKind kind,
                               const std::vector<int>& sizes, const Progress& progress) {
  if (sizes.empty()) throw UsageError("window ablation needs at least one size");
  AblationReport out;
  out.spec = spec;
  out.kind = kind;
  out.sizes = sizes;
  for (int w : sizes) {
    auto s = spec;
    s.kinds = {kind};
    s.classifiers = {Classifier::GbtAvg};
    s.window = w;
    if (progress) progress("window " + std::to_string(w));
    auto rep = run_experiment(s, corpus, progress);
    out.rows.push_back(rep.cells.front());
  }
  return out;
}

// --- report output -------------------------------------------------------------------

const CellReport& EvaluationReport::cell(FeatureKind kind, Classifier classifier) const {
  for (const auto& c : cells)
    if (c.kind == kind && c.classifier == classifier) return c;
  throw UsageError("report has no cell for " + features::kind_name(kind) + " / " + classifier_name(classifier));
}

int EvaluationReport::failures() const {
  int n = 0;
  for (const auto& c : cells) n += c.failures;
  return n;
}

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); }

std::optional<double> opt_from(const nlohmann::ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

nlohmann::ordered_json summary_json(const metrics::MeanStd& m) {
  return {{"mean", m.n ? nlohmann::ordered_json(m.mean) : nlohmann::ordered_json()},
          {"std", m.n ? nlohmann::ordered_json(m.std) : nlohmann::ordered_json()},
          {"n", m.n}};
}

nlohmann::ordered_json cell_json(const CellReport& c) {
  nlohmann::ordered_json j;
  j["feature"] = features::kind_name(c.kind);
  j["classifier"] = classifier_name(c.classifier);
  j["summary"] = {{"train_accuracy", summary_json(c.train)},
                  {"test_accuracy", summary_json(c.test)},
                  {"spearman_bartok", summary_json(c.bartok)},
                  {"spearman_henle", summary_json(c.henle)},
                  {"failures", c.failures}};
  auto seeds = nlohmann::ordered_json::array();
  for (const auto& s : c.seeds) {
    nlohmann::ordered_json sj = {{"seed", s.seed},
                                 {"train_accuracy", opt(s.train_accuracy)},
                                 {"test_accuracy", opt(s.test_accuracy)},
                                 {"spearman_bartok", opt(s.spearman_bartok)},
                                 {"spearman_henle", opt(s.spearman_henle)}};
    if (!s.error.empty()) sj["error"] = s.error;
    seeds.push_back(std::move(sj));
  }
  j["seeds"] = std::move(seeds);
  return j;
}

CellReport cell_from_json(const nlohmann::ordered_json& j) {
  CellReport c;
  c.kind = features::kind_from_name(j.at("feature").get<std::string>());
  c.classifier = classifier_from_name(j.at("classifier").get<std::string>());
  for (const auto& sj : j.at("seeds")) {
    SeedResult s;
    s.seed = sj.at("seed").get<std::uint64_t>();
    s.train_accuracy = opt_from(sj, "train_accuracy");
    s.test_accuracy = opt_from(sj, "test_accuracy");
    s.spearman_bartok = opt_from(sj, "spearman_bartok");
    s.spearman_henle = opt_from(sj, "spearman_henle");
    s.error = sj.value("error", std::string());
    c.seeds.push_back(std::move(s));
  }
  c.summarize();
  return c;
}

std::string fmt(const char* f, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string pct(const metrics::MeanStd& m) { return m.n ? fmt("%.1f ± %.1f", 100 * m.mean, 100 * m.std) : "n/a"; }
std::string rho(const metrics::MeanStd& m) { return m.n ? fmt("%.2f ± %.2f", m.mean, m.std) : "n/a"; }

std::string with_failures(const CellReport& c, std::string text) {
  if (c.failures) text += " (" + std::to_string(c.failures) + "/" + std::to_string(c.seeds.size()) + " failed)";
  return text;
}

}  // namespace

nlohmann::ordered_json EvaluationReport::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "pdiff-eval";
  j["version"] = 1;
  j["spec"] = spec.to_json();
  auto cs = nlohmann::ordered_json::array();
  for (const auto& c : cells) cs.push_back(cell_json(c));
  j["cells"] = std::move(cs);
  return j;
}

EvaluationReport EvaluationReport::from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("format") != "pdiff-eval") throw FormatError("not an evaluation report");
    EvaluationReport r;
    r.spec = ExperimentSpec::from_json(j.at("spec"), ExperimentSpec::desk());
    for (const auto& c : j.at("cells")) r.cells.push_back(cell_from_json(c));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("evaluation report: ") + e.what());
  }
}

std::string EvaluationReport::to_markdown() const {
  std::ostringstream md;
  md << "## Test balanced accuracy (%), mean ± std over " << spec.seeds.size() << " seeds\n\n| feature |";
  for (auto c : spec.classifiers) md << " " << classifier_name(c) << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < spec.classifiers.size(); ++i) md << "---|";
  md << "\n";
  for (auto k : spec.kinds) {
    md << "| " << features::kind_name(k) << " |";
    for (auto c : spec.classifiers) {
      const auto& cell = this->cell(k, c);
      md << " " << with_failures(cell, pct(cell.test)) << " |";
    }
    md << "\n";
  }
  std::vector<Classifier> ranked;
  for (auto c : spec.classifiers)
    if (c != Classifier::GbtWindow) ranked.push_back(c);
  if (!ranked.empty()) {
    md << "\n## Spearman rank correlation of expected class, mean ± std\n\n| feature |";
    for (auto c : ranked) md << " " << classifier_name(c) << " Bartók | " << classifier_name(c) << " Henle |";
    md << "\n|---|";
    for (std::size_t i = 0; i < ranked.size(); ++i) md << "---|---|";
    md << "\n";
    for (auto k : spec.kinds) {
      md << "| " << features::kind_name(k) << " |";
      for (auto c : ranked) {
        const auto& cell = this->cell(k, c);
        md << " " << rho(cell.bartok) << " | " << rho(cell.henle) << " |";
      }
      md << "\n";
    }
  }
  md << "\n## Train balanced accuracy (%)\n\n| feature |";
  for (auto c : spec.classifiers) md << " " << classifier_name(c) << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < spec.classifiers.size(); ++i) md << "---|";
  md << "\n";
  for (auto k : spec.kinds) {
    md << "| " << features::kind_name(k) << " |";
    for (auto c : spec.classifiers) md << " " << pct(this->cell(k, c).train) << " |";
    md << "\n";
  }
  return md.str();
}

nlohmann::ordered_json AblationReport::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "pdiff-ablation";
  j["version"] = 1;
  j["feature"] = features::kind_name(kind);
  j["classifier"] = classifier_name(Classifier::GbtAvg);
  j["spec"] = spec.to_json();
  auto rs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto r = cell_json(rows[i]);
    r["window"] = sizes[i];
    r["default"] = sizes[i] == 9;
    rs.push_back(std::move(r));
  }
  j["rows"] = std::move(rs);
  return j;
}

std::string AblationReport::to_markdown() const {
  std::ostringstream md;
  md << "## Window size ablation, " << classifier_name(Classifier::GbtAvg) << " on " << features::kind_name(kind) << ", "
     << spec.seeds.size() << " seeds\n\n| window size | 3-class acc (%) | Bartók rank | Henle rank |\n|---|---|---|---|\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    md << "| w=" << sizes[i] << (sizes[i] == 9 ? " (default)" : "") << " | " << with_failures(rows[i], pct(rows[i].test))
       << " | " << rho(rows[i].bartok) << " | " << rho(rows[i].henle) << " |\n";
  return md.str();
}

}  // namespace pdiff::eval

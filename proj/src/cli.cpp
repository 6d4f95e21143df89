// SPDX-License-Identifier: Apache-2.0
#include "pdiff/cli.hpp"

#include "pdiff/eval.hpp"
#include "pdiff/parallel.hpp"
#include "pdiff/report.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <unistd.h>

namespace pdiff::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using features::FeatureKind;
using fingering::Engine;
using fingering::FingeringAssignment;

namespace {

// --- files ----------------------------------------------------------------------------

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

void write_atomic(const fs::path& p, const std::string& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

void write_json(const fs::path& p, const json& j) { write_atomic(p, j.dump(2) + "\n"); }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out.empty() ? "score" : out;
}

json provenance(const std::string& command, const json& config, const std::vector<std::uint64_t>& seeds) {
  return {{"tool", "pdiff"}, {"version", std::string(kToolVersion)}, {"command", command}, {"config", config},
          {"seeds", seeds}};
}

// --- corpus archive ---------------------------------------------------------------------

constexpr const char* kCorpusFormat = "pdiff-corpus";

json corpus_to_json(const std::vector<score::LabeledScore>& corpus, const json& prov) {
  json j;
  j["format"] = kCorpusFormat;
  j["version"] = 1;
  j["provenance"] = prov;
  auto arr = json::array();
  for (const auto& ls : corpus) arr.push_back({{"score", score::score_to_json(ls.score)}, {"label", score::label_to_json(ls.label)}});
  j["scores"] = std::move(arr);
  return j;
}

std::vector<score::LabeledScore> load_corpus(const fs::path& p) {
  const auto j = read_json(p);
  if (j.value("format", "") != kCorpusFormat) throw FormatError(p.string() + " is not a corpus archive");
  std::vector<score::LabeledScore> out;
  try {
    for (const auto& e : j.at("scores"))
      out.push_back({score::score_from_json(e.at("score")), score::label_from_json(e.at("label"))});
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
  if (out.empty()) throw DataError(p.string() + " contains no scores");
  return out;
}

struct ClassStats {
  std::vector<double> notes, bars, tempo;
};

json stats_json(const std::vector<score::LabeledScore>& corpus, std::ostream& out) {
  std::map<int, ClassStats> by;
  for (const auto& ls : corpus) {
    auto& s = by[ls.label.class3];
    s.notes.push_back(static_cast<double>(ls.score.events.size()));
    s.bars.push_back(ls.score.bars);
    s.tempo.push_back(ls.score.tempo_bpm);
  }
  json j = json::array();
  out << "| class | n scores | n notes | n bars | tempo |\n|---|---|---|---|---|\n";
  const auto cell = [](const metrics::MeanStd& m) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << m.mean << " ± " << m.std;
    return s.str();
  };
  for (const auto& [c, s] : by) {
    const auto n = metrics::mean_std(s.notes), b = metrics::mean_std(s.bars), t = metrics::mean_std(s.tempo);
    j.push_back({{"class", c},
                 {"scores", s.notes.size()},
                 {"notes", {{"mean", n.mean}, {"std", n.std}}},
                 {"bars", {{"mean", b.mean}, {"std", b.std}}},
                 {"tempo", {{"mean", t.mean}, {"std", t.std}}}});
    out << "| " << c << " | " << s.notes.size() << " | " << cell(n) << " | " << cell(b) << " | " << cell(t) << " |\n";
  }
  return j;
}

// --- shared options -----------------------------------------------------------------------

struct Common {
  std::string config_path;
  std::string profile = "desk";
  std::uint64_t seed = 0;
  int seeds = 0;  // 0: profile default
  int jobs = 1;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c, bool experiment) {
  app->add_option("--config", c.config_path, "JSON file with overrides")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "base seed");
  app->add_option("--jobs", c.jobs, "parallel jobs")->check(CLI::PositiveNumber);
  app->add_flag("-q,--quiet", c.quiet, "no progress output");
  if (experiment) {
    app->add_option("--profile", c.profile, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    app->add_option("--seeds", c.seeds, "number of seeds (default from profile)")->check(CLI::NonNegativeNumber);
  }
}

json config_file(const Common& c) { return c.config_path.empty() ? json::object() : read_json(c.config_path); }

struct Engines {
  std::string dp_archive, hmm_archive, hmm_params;
};

void add_engines(CLI::App* app, Engines& e) {
  app->add_option("--dp-fingering", e.dp_archive, "DP fingering archive from `finger`")->check(CLI::ExistingFile);
  app->add_option("--hmm-fingering", e.hmm_archive, "HMM fingering archive from `finger`")->check(CLI::ExistingFile);
  app->add_option("--hmm-params", e.hmm_params, "HMM parameter JSON")->check(CLI::ExistingFile);
}

fingering::dp::DpConfig dp_config(const json& cfg) {
  auto base = fingering::dp::DpConfig::defaults().to_json();
  if (cfg.contains("dp"))
    for (const auto& [k, v] : cfg.at("dp").items()) base[k] = v;
  try {
    return fingering::dp::DpConfig::from_json(base);
  } catch (const json::exception& e) {
    throw UsageError(std::string("dp config: ") + e.what());
  }
}

fingering::hmm::HmmParams hmm_params(const std::string& path, std::ostream& err, bool quiet) {
  if (path.empty()) {
    if (!quiet) err << "warning: no HMM parameters given; using the default prior\n";
    return fingering::hmm::default_prior_params();
  }
  return fingering::hmm::HmmParams::from_json(read_json(path));
}

json engine_config_json(Engine e, const fingering::dp::DpConfig& dp, const fingering::hmm::HmmParams& hmm) {
  return e == Engine::DP ? dp.to_json() : hmm.to_json();
}

std::vector<FingeringAssignment> load_fingering(const fs::path& p, const std::vector<score::LabeledScore>& corpus,
                                                Engine want) {
  const auto j = read_json(p);
  if (j.value("format", "") != "pdiff-fingering") throw FormatError(p.string() + " is not a fingering archive");
  std::map<std::string, FingeringAssignment> by_id;
  for (const auto& e : j.at("assignments")) by_id[e.at("id").get<std::string>()] = fingering::assignment_from_json(e.at("fingering"));
  std::vector<FingeringAssignment> out;
  for (const auto& ls : corpus) {
    const auto it = by_id.find(ls.score.id);
    if (it == by_id.end()) throw DataError(p.string() + " has no fingering for score '" + ls.score.id + "'");
    if (it->second.engine != want)
      throw UsageError(p.string() + " holds " + fingering::engine_name(it->second.engine) + " fingerings, expected " +
                       fingering::engine_name(want));
    fingering::check_assignment(ls.score, it->second);
    out.push_back(it->second);
  }
  return out;
}

// Computes one engine over the corpus, reusing $PDIFF_CACHE_DIR entries when set.
std::vector<FingeringAssignment> compute_fingering(Engine e, const std::vector<score::LabeledScore>& corpus,
                                                   const fingering::dp::DpConfig& dp,
                                                   const fingering::hmm::HmmParams& hmm, int jobs) {
  const char* cache_env = std::getenv("PDIFF_CACHE_DIR");
  const fs::path cache = cache_env && *cache_env ? fs::path(cache_env) / "fingering" : fs::path();
  const std::string engine_key = std::string(kToolVersion) + fingering::engine_name(e) + engine_config_json(e, dp, hmm).dump();
  std::vector<FingeringAssignment> out(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t i) {
    const auto& s = corpus[i].score;
    fs::path file;
    if (!cache.empty()) {
      file = cache / (hex(fnv1a(engine_key + score::score_to_json(s).dump())) + ".json");
      if (fs::exists(file)) {
        try {
          out[i] = fingering::assignment_from_json(json::parse(read_file(file)));
          fingering::check_assignment(s, out[i]);
          return;
        } catch (const std::exception&) {
          // stale or corrupt entry: recompute
        }
      }
    }
    out[i] = e == Engine::DP ? fingering::dp::assign_fingers_dp(s, dp) : fingering::hmm::assign_fingers_hmm(s, hmm);
    if (!file.empty()) write_atomic(file, fingering::assignment_to_json(out[i]).dump());
  });
  return out;
}

struct Fingerings {
  std::optional<std::vector<FingeringAssignment>> dp, hmm;
  json config;
};

Fingerings resolve_fingerings(const std::vector<FeatureKind>& kinds, const std::vector<score::LabeledScore>& corpus,
                              const Engines& eng, const json& cfg, int jobs, std::ostream& err, bool quiet) {
  bool need_dp = false, need_hmm = false;
  for (auto k : kinds) need_dp |= features::uses_dp(k), need_hmm |= features::uses_hmm(k);
  Fingerings f;
  f.config = json::object();
  if (need_dp) {
    if (!eng.dp_archive.empty()) {
      f.dp = load_fingering(eng.dp_archive, corpus, Engine::DP);
      f.config["dp"] = {{"archive", eng.dp_archive}};
    } else {
      const auto c = dp_config(cfg);
      f.dp = compute_fingering(Engine::DP, corpus, c, {}, jobs);
      f.config["dp"] = c.to_json();
    }
  }
  if (need_hmm) {
    if (!eng.hmm_archive.empty()) {
      f.hmm = load_fingering(eng.hmm_archive, corpus, Engine::HMM);
      f.config["hmm"] = {{"archive", eng.hmm_archive}};
    } else {
      const auto p = hmm_params(eng.hmm_params, err, quiet);
      f.hmm = compute_fingering(Engine::HMM, corpus, {}, p, jobs);
      f.config["hmm"] = {{"params", eng.hmm_params.empty() ? json("default-prior") : json(eng.hmm_params)}};
    }
  }
  return f;
}

std::vector<eval::PreparedScore> prepare(const std::vector<FeatureKind>& kinds,
                                         const std::vector<score::LabeledScore>& corpus, const Fingerings& f, int jobs) {
  eval::PrepareOptions po;
  po.kinds = kinds;
  po.jobs = jobs;
  po.dp_assignments = f.dp ? &*f.dp : nullptr;
  po.hmm_assignments = f.hmm ? &*f.hmm : nullptr;
  return eval::prepare_corpus(corpus, po);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

eval::ExperimentSpec resolve_spec(const Common& c, const json& cfg, const std::string& features_csv,
                                  const std::string& classifiers_csv) {
  auto spec = c.profile == "full" ? eval::ExperimentSpec::full() : eval::ExperimentSpec::desk();
  if (cfg.contains("experiment")) spec = eval::ExperimentSpec::from_json(cfg.at("experiment"), spec);
  if (c.seeds > 0 || c.seed != 0) {
    const std::size_t n = c.seeds > 0 ? static_cast<std::size_t>(c.seeds) : spec.seeds.size();
    spec.seeds.clear();
    for (std::size_t i = 0; i < n; ++i) spec.seeds.push_back(c.seed + i);
  }
  if (!features_csv.empty()) {
    spec.kinds.clear();
    for (const auto& k : split_list(features_csv)) spec.kinds.push_back(features::kind_from_name(k));
  }
  if (!classifiers_csv.empty()) {
    spec.classifiers.clear();
    for (const auto& k : split_list(classifiers_csv)) spec.classifiers.push_back(eval::classifier_from_name(k));
  }
  spec.jobs = c.jobs;
  spec.validate();
  return spec;
}

eval::Progress progress_to(std::ostream& err, bool quiet) {
  if (quiet) return {};
  return [&err](const std::string& m) { err << m << "\n" << std::flush; };
}

// --- models ----------------------------------------------------------------------------------

struct LoadedModel {
  std::string classifier;  // gbt or deepgru
  FeatureKind kind = FeatureKind::PV;
  int window = 9, stride = 1;
  std::optional<gbt::GbtModel> gbt;
  std::optional<gru::GruNetModel> gru;
};

LoadedModel load_model(const fs::path& p) {
  const auto bytes = read_file(p);
  LoadedModel m;
  json meta;
  if (bytes.starts_with("PDGR")) {
    m.gru = gru::GruNetModel::from_binary(bytes);
    meta = m.gru->metadata;
    m.classifier = "deepgru";
  } else {
    json j;
    try {
      j = json::parse(bytes);
    } catch (const json::exception& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
    m.gbt = gbt::GbtModel::from_json(j);
    meta = j.value("metadata", json::object());
    m.classifier = "gbt";
  }
  if (!meta.is_object() || !meta.contains("feature"))
    throw FormatError(p.string() + " lacks the feature metadata written by `pdiff train`");
  m.kind = features::kind_from_name(meta.at("feature").get<std::string>());
  m.window = meta.value("window", 9);
  m.stride = meta.value("stride", 1);
  return m;
}

metrics::Probs score_probs(const LoadedModel& m, const features::FeatureMatrix& mat) {
  if (m.gru) return gru::forward(*m.gru, mat).probs;
  std::vector<std::vector<double>> rows;
  for (const auto& seg : features::window_segments(mat, m.window, m.stride)) rows.push_back(features::flatten(seg));
  return gbt::predict_score_avg(*m.gbt, rows);
}

std::vector<metrics::Probs> window_probs(const LoadedModel& m, const features::FeatureMatrix& mat) {
  std::vector<metrics::Probs> out;
  for (const auto& seg : features::window_segments(mat, m.window, m.stride)) {
    if (m.gbt) {
      out.push_back(gbt::predict_proba(*m.gbt, features::flatten(seg)));
    } else {
      features::FeatureMatrix sub;
      sub.kind = mat.kind;
      sub.rows = seg.rows;
      sub.cols = seg.cols;
      sub.cells = features::flatten(seg);
      out.push_back(gru::forward(*m.gru, sub).probs);
    }
  }
  return out;
}

// --- subcommands -------------------------------------------------------------------------------

int cmd_synth(const std::string& out_path, std::uint64_t seed, int per_class, std::ostream& out) {
  if (per_class < 2) throw UsageError("--per-class must be at least 2");
  const auto corpus = score::generate_synthetic_corpus(seed, per_class);
  const json cfg = {{"per_class", per_class}, {"seed", seed}};
  write_json(out_path, corpus_to_json(corpus, provenance("synth", cfg, {seed})));
  stats_json(corpus, out);
  return 0;
}

int cmd_ingest(const std::string& manifest_path, std::string dir, const std::string& out_path, std::ostream& out,
               std::ostream& err) {
  if (dir.empty()) dir = fs::path(manifest_path).parent_path().string();
  if (!fs::is_directory(dir.empty() ? "." : dir)) throw DataError("score directory " + dir + " does not exist");
  const auto manifest = score::load_manifest(read_file(manifest_path), dir.empty() ? fs::path(".") : fs::path(dir));
  for (const auto& p : manifest.problems) err << "error: " << manifest_path << ":" << p.line << ": " << p.file << ": " << p.message << "\n";
  if (manifest.entries.empty()) throw DataError("no score could be ingested from " + manifest_path);
  const json cfg = {{"manifest", manifest_path}, {"dir", dir}};
  auto j = corpus_to_json(manifest.entries, provenance("ingest", cfg, {}));
  j["stats"] = stats_json(manifest.entries, out);
  auto problems = json::array();
  for (const auto& p : manifest.problems) problems.push_back({{"line", p.line}, {"file", p.file}, {"message", p.message}});
  j["problems"] = problems;
  write_json(out_path, j);
  return manifest.problems.empty() ? 0 : 2;
}

int cmd_finger(const std::string& corpus_path, const std::string& engine_name, const Engines& eng, const Common& c,
               const std::string& out_path, std::ostream& out, std::ostream& err) {
  const Engine e = fingering::engine_from_name(engine_name);
  const auto corpus = load_corpus(corpus_path);
  const json cfg = config_file(c);
  const auto dp = dp_config(cfg);
  fingering::hmm::HmmParams hmm;
  if (e == Engine::HMM) hmm = hmm_params(eng.hmm_params, err, c.quiet);
  std::vector<std::optional<FingeringAssignment>> got(corpus.size());
  std::vector<std::string> errors(corpus.size());
  parallel_for(corpus.size(), c.jobs, [&](std::size_t i) {
    try {
      const auto& s = corpus[i].score;
      got[i] = e == Engine::DP ? fingering::dp::assign_fingers_dp(s, dp) : fingering::hmm::assign_fingers_hmm(s, hmm);
    } catch (const Error& ex) {
      errors[i] = ex.what();
    }
  });
  json j;
  j["format"] = "pdiff-fingering";
  j["version"] = 1;
  json resolved = {{"corpus", corpus_path}, {"engine", fingering::engine_name(e)}};
  resolved["engine_config"] = e == Engine::DP ? dp.to_json() : json{{"params", eng.hmm_params.empty() ? json("default-prior") : json(eng.hmm_params)}};
  j["provenance"] = provenance("finger", resolved, {});
  j["engine"] = fingering::engine_name(e);
  auto arr = json::array();
  std::map<int, std::vector<double>> per_class;
  int failed = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!got[i]) {
      err << "error: " << corpus[i].score.id << ": " << errors[i] << "\n";
      ++failed;
      continue;
    }
    arr.push_back({{"id", corpus[i].score.id}, {"fingering", fingering::assignment_to_json(*got[i])}});
    double s = 0;
    for (double x : got[i]->scalars) s += fingering::feature_value(e, x);
    if (!got[i]->scalars.empty()) per_class[corpus[i].label.class3].push_back(s / static_cast<double>(got[i]->scalars.size()));
  }
  j["assignments"] = std::move(arr);
  auto summary = json::array();
  out << "| class | scores | mean " << (e == Engine::DP ? "velocity feature" : "transition probability") << " |\n|---|---|---|\n";
  for (const auto& [cls, v] : per_class) {
    const auto m = metrics::mean_std(v);
    summary.push_back({{"class", cls}, {"scores", v.size()}, {"mean_scalar", m.mean}, {"std_scalar", m.std}});
    out << "| " << cls << " | " << v.size() << " | " << std::fixed << std::setprecision(4) << m.mean << " ± " << m.std
        << " |\n";
  }
  j["summary"] = std::move(summary);
  write_json(out_path, j);
  return failed ? 2 : 0;
}

int cmd_features(const std::string& corpus_path, const std::string& kind_name, const Engines& eng, const Common& c,
                 const std::string& out_path, std::ostream& err) {
  const auto kind = features::kind_from_name(kind_name);
  const auto corpus = load_corpus(corpus_path);
  const json cfg = config_file(c);
  const auto f = resolve_fingerings({kind}, corpus, eng, cfg, c.jobs, err, c.quiet);
  const auto prepared = prepare({kind}, corpus, f, c.jobs);
  json j;
  j["format"] = "pdiff-features";
  j["version"] = 1;
  j["provenance"] = provenance("features", {{"corpus", corpus_path}, {"feature", kind_name}, {"fingering", f.config}}, {});
  auto arr = json::array();
  for (const auto& p : prepared) arr.push_back({{"id", p.id}, {"matrix", features::matrix_to_json(p.matrices.at(kind))}});
  j["matrices"] = std::move(arr);
  write_json(out_path, j);
  return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& kind_name, const std::string& classifier,
              const Engines& eng, const Common& c, const std::string& out_path, std::ostream& out, std::ostream& err) {
  if (classifier != "gbt" && classifier != "deepgru") throw UsageError("--classifier must be gbt or deepgru");
  const auto kind = features::kind_from_name(kind_name);
  const auto corpus = load_corpus(corpus_path);
  const json cfg = config_file(c);
  auto spec = resolve_spec(c, cfg, kind_name, "");
  const auto f = resolve_fingerings({kind}, corpus, eng, cfg, c.jobs, err, c.quiet);
  const auto prepared = prepare({kind}, corpus, f, c.jobs);
  json resolved = {{"corpus", corpus_path},  {"feature", kind_name}, {"classifier", classifier},
                   {"profile", c.profile},   {"window", spec.window}, {"stride", spec.stride},
                   {"fingering", f.config}};
  json meta = {{"feature", kind_name}, {"window", spec.window}, {"stride", spec.stride}};
  if (classifier == "gbt") {
    gbt::Dataset d(spec.window * features::kind_width(kind));
    for (std::size_t i = 0; i < prepared.size(); ++i)
      for (const auto& seg : features::window_segments(prepared[i].matrices.at(kind), spec.window, spec.stride))
        d.add_row(features::flatten(seg), prepared[i].label.class3, static_cast<int>(i));
    const auto search = gbt::random_search(d, spec.search, c.seed);
    const auto& best = search.configs[search.best];
    gbt::FitReport rep;
    const auto model = gbt::fit_gbt(d, best.hyper, c.seed, &rep);
    for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
    resolved["search"] = {{"n_configs", spec.search.n_configs}, {"folds", spec.search.folds},
                          {"window_thinning", spec.search.window_thinning}};
    meta["provenance"] = provenance("train", resolved, {c.seed});
    meta["cv_accuracy"] = best.mean_accuracy;
    auto j = model.to_json();
    j["metadata"] = meta;
    write_json(out_path, j);
    out << "gbt on " << kind_name << ": cv balanced accuracy " << std::fixed << std::setprecision(4) << best.mean_accuracy
        << ", train loss " << (rep.train_loss.empty() ? 0.0 : rep.train_loss.back()) << "\n";
  } else {
    auto gcfg = spec.gru;
    gcfg.seed = c.seed;
    std::vector<gru::LabeledSequence> seqs;
    for (const auto& p : prepared) seqs.push_back({&p.matrices.at(kind), p.label.class3});
    gru::TrainReport rep;
    auto model = gru::train_deepgru(seqs, gcfg, &rep);
    resolved["deepgru"] = gcfg.to_json();
    meta["provenance"] = provenance("train", resolved, {c.seed});
    model.metadata = meta;
    write_atomic(out_path, model.to_binary());
    out << "deepgru on " << kind_name << ": final training loss " << std::fixed << std::setprecision(4)
        << (rep.epoch_loss.empty() ? rep.initial_loss : rep.epoch_loss.back()) << "\n";
  }
  return 0;
}

int cmd_run(const std::string& corpus_path, const std::string& features_csv, const std::string& classifiers_csv,
            const Engines& eng, const Common& c, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const auto corpus = load_corpus(corpus_path);
  const json cfg = config_file(c);
  const auto spec = resolve_spec(c, cfg, features_csv, classifiers_csv);
  const auto f = resolve_fingerings(spec.kinds, corpus, eng, cfg, c.jobs, err, c.quiet);
  const auto prepared = prepare(spec.kinds, corpus, f, c.jobs);
  const auto rep = eval::run_experiment(spec, prepared, progress_to(err, c.quiet));
  auto j = rep.to_json();
  json resolved = {{"corpus", corpus_path}, {"profile", c.profile}, {"experiment", spec.to_json()}, {"fingering", f.config}};
  j["provenance"] = provenance("run", resolved, spec.seeds);
  const auto md = rep.to_markdown();
  write_json(fs::path(out_dir) / "report.json", j);
  write_atomic(fs::path(out_dir) / "report.md", md);
  out << md;
  if (rep.failures()) {
    err << "error: " << rep.failures() << " cell run(s) failed; see report.json\n";
    return 3;
  }
  return 0;
}

int cmd_ablate(const std::string& corpus_path, const std::string& kind_name, const std::string& sizes_csv,
               const Engines& eng, const Common& c, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const auto kind = features::kind_from_name(kind_name);
  const auto corpus = load_corpus(corpus_path);
  const json cfg = config_file(c);
  const auto spec = resolve_spec(c, cfg, kind_name, "gbt_avg");
  std::vector<int> sizes = eval::kAblationSizes;
  if (!sizes_csv.empty()) {
    sizes.clear();
    for (const auto& s : split_list(sizes_csv)) {
      try {
        sizes.push_back(std::stoi(s));
      } catch (const std::exception&) {
        throw UsageError("bad window size '" + s + "'");
      }
      if (sizes.back() < 1) throw UsageError("window sizes must be positive");
    }
  }
  const auto f = resolve_fingerings({kind}, corpus, eng, cfg, c.jobs, err, c.quiet);
  const auto prepared = prepare({kind}, corpus, f, c.jobs);
  const auto rep = eval::window_ablation(spec, prepared, kind, sizes, progress_to(err, c.quiet));
  auto j = rep.to_json();
  json resolved = {{"corpus", corpus_path}, {"profile", c.profile}, {"experiment", spec.to_json()}, {"sizes", sizes},
                   {"fingering", f.config}};
  j["provenance"] = provenance("ablate", resolved, spec.seeds);
  const auto md = rep.to_markdown();
  write_json(fs::path(out_dir) / "ablation.json", j);
  write_atomic(fs::path(out_dir) / "ablation.md", md);
  out << md;
  int failures = 0;
  for (const auto& r : rep.rows) failures += r.failures;
  return failures ? 3 : 0;
}

int cmd_rank(const std::string& corpus_path, const std::string& model_path, const Engines& eng, const Common& c,
             const std::string& out_path, std::ostream& out, std::ostream& err) {
  const auto corpus = load_corpus(corpus_path);
  const auto model = load_model(model_path);
  const json cfg = config_file(c);
  const auto f = resolve_fingerings({model.kind}, corpus, eng, cfg, c.jobs, err, c.quiet);
  const auto prepared = prepare({model.kind}, corpus, f, c.jobs);
  std::vector<metrics::Probs> probs(prepared.size());
  parallel_for(prepared.size(), c.jobs, [&](std::size_t i) { probs[i] = score_probs(model, prepared[i].matrices.at(model.kind)); });
  std::vector<score::DifficultyLabel> labels;
  for (const auto& p : prepared) labels.push_back(p.label);
  const auto r = eval::rank_correlations(probs, labels);
  std::vector<std::size_t> order(prepared.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return metrics::expected_class(probs[a]) < metrics::expected_class(probs[b]);
  });
  json j;
  j["format"] = "pdiff-ranking";
  j["version"] = 1;
  j["provenance"] = provenance("rank", {{"corpus", corpus_path}, {"model", model_path}, {"feature", features::kind_name(model.kind)}, {"fingering", f.config}}, {});
  j["spearman_bartok"] = r.bartok ? json(*r.bartok) : json();
  j["spearman_henle"] = r.henle ? json(*r.henle) : json();
  auto arr = json::array();
  out << "| rank | score | expected class | Bartók | Henle |\n|---|---|---|---|---|\n";
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto i = order[k];
    const double e = metrics::expected_class(probs[i]);
    arr.push_back({{"rank", k + 1}, {"id", prepared[i].id}, {"expected_class", e}, {"probs", probs[i]},
                   {"bartok_index", labels[i].bartok_index},
                   {"henle_grade", labels[i].henle_grade ? json(*labels[i].henle_grade) : json()}});
    out << "| " << k + 1 << " | " << prepared[i].id << " | " << std::fixed << std::setprecision(3) << e << " | "
        << labels[i].bartok_index << " | " << (labels[i].henle_grade ? std::to_string(*labels[i].henle_grade) : "-")
        << " |\n";
  }
  j["ranking"] = std::move(arr);
  out << "Spearman vs Bartók: " << (r.bartok ? std::to_string(*r.bartok) : "n/a")
      << ", vs Henle: " << (r.henle ? std::to_string(*r.henle) : "n/a") << "\n";
  write_json(out_path, j);
  return 0;
}

int cmd_feedback(const std::string& corpus_path, const std::string& model_path, const std::string& mode,
                 const std::string& ids_csv, const Engines& eng, const Common& c, const std::string& out_dir,
                 std::ostream& out, std::ostream& err) {
  const auto corpus_all = load_corpus(corpus_path);
  const auto model = load_model(model_path);
  if (mode == "attention" && !model.gru) throw UsageError("attention feedback needs a deepgru model");
  std::vector<score::LabeledScore> corpus;
  const auto wanted = split_list(ids_csv);
  for (const auto& ls : corpus_all)
    if (wanted.empty() || std::find(wanted.begin(), wanted.end(), ls.score.id) != wanted.end()) corpus.push_back(ls);
  for (const auto& w : wanted)
    if (std::none_of(corpus.begin(), corpus.end(), [&](const auto& ls) { return ls.score.id == w; }))
      throw DataError("score '" + w + "' is not in " + corpus_path);
  const json cfg = config_file(c);
  const auto f = resolve_fingerings({model.kind}, corpus, eng, cfg, c.jobs, err, c.quiet);
  const auto prepared = prepare({model.kind}, corpus, f, c.jobs);
  const json prov = provenance("feedback", {{"corpus", corpus_path}, {"model", model_path}, {"mode", mode},
                                            {"feature", features::kind_name(model.kind)}, {"fingering", f.config}}, {});
  parallel_for(prepared.size(), c.jobs, [&](std::size_t i) {
    const auto& mat = prepared[i].matrices.at(model.kind);
    report::FeedbackAnnotation a;
    a.score_id = prepared[i].id;
    if (mode == "window") {
      for (const auto& p : report::aggregate_onset_probs(window_probs(model, mat), mat.rows, model.window, model.stride))
        a.onsets.push_back({p, std::nullopt});
    } else {
      const auto pred = gru::forward(*model.gru, mat);
      for (double w : pred.attention) a.onsets.push_back({pred.probs, w});
    }
    auto j = a.to_json();
    j["mode"] = mode;
    j["provenance"] = prov;
    const auto base = fs::path(out_dir) / safe_name(prepared[i].id);
    write_json(base.string() + ".annotation.json", j);
    write_atomic(base.string() + ".html", report::render_report(corpus[i].score, a));
  });
  out << "wrote " << prepared.size() << " report(s) to " << out_dir << "\n";
  return 0;
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::Usage: return 1;
    case ErrorCategory::Data: return 2;
    case ErrorCategory::Runtime: return 3;
  }
  return 3;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Piano score difficulty classification from fingering features", "pdiff"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Common common;
  Engines eng;
  std::string corpus, out_path, out_dir, kind = "PV", engine, classifier, features_csv, classifiers_csv, sizes, model,
                                         mode = "window", ids, manifest, dir;
  int per_class = 30;

  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  synth->add_option("--out", out_path, "corpus archive to write")->required();
  synth->add_option("--seed", common.seed, "generator seed");
  synth->add_option("--per-class", per_class, "scores per class");
  synth->add_flag("-q,--quiet", common.quiet, "no stats table");

  auto* ingest = app.add_subcommand("ingest", "parse MusicXML scores listed in a manifest");
  ingest->add_option("--manifest", manifest, "CSV manifest: file,bartok_index,henle_grade")->required()->check(CLI::ExistingFile);
  ingest->add_option("--dir", dir, "score directory (default: the manifest's)");
  ingest->add_option("--out", out_path, "corpus archive to write")->required();
  ingest->add_flag("-q,--quiet", common.quiet, "no stats table");

  auto* finger = app.add_subcommand("finger", "assign fingerings with the dp or hmm engine");
  finger->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  finger->add_option("--engine", engine, "dp or hmm")->required();
  finger->add_option("--hmm-params", eng.hmm_params, "HMM parameter JSON")->check(CLI::ExistingFile);
  finger->add_option("--out", out_path)->required();
  add_common(finger, common, false);

  auto* feats = app.add_subcommand("features", "build feature matrices");
  feats->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  feats->add_option("--feature", kind, "K, PF, PV, NF or NP");
  feats->add_option("--out", out_path)->required();
  add_engines(feats, eng);
  add_common(feats, common, false);

  auto* train = app.add_subcommand("train", "train one classifier on the whole corpus");
  train->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  train->add_option("--feature", kind, "K, PF, PV, NF or NP");
  train->add_option("--classifier", classifier, "gbt or deepgru")->required();
  train->add_option("--out", out_path, "model file")->required();
  add_engines(train, eng);
  add_common(train, common, true);

  auto* runc = app.add_subcommand("run", "evaluate classifiers over seeded train/test splits");
  runc->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  runc->add_option("--features", features_csv, "comma-separated feature kinds (default all)");
  runc->add_option("--classifiers", classifiers_csv, "comma-separated: gbt_window,gbt_avg,deepgru (default all)");
  runc->add_option("--out-dir", out_dir)->required();
  add_engines(runc, eng);
  add_common(runc, common, true);

  auto* ablate = app.add_subcommand("ablate", "window size ablation for gbt_avg");
  ablate->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  ablate->add_option("--feature", kind, "feature kind (default PV)");
  ablate->add_option("--sizes", sizes, "comma-separated window sizes (default 1,3,5,9,13,19)");
  ablate->add_option("--out-dir", out_dir)->required();
  add_engines(ablate, eng);
  add_common(ablate, common, true);

  auto* rank = app.add_subcommand("rank", "rank scores by expected difficulty class");
  rank->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  rank->add_option("--model", model)->required()->check(CLI::ExistingFile);
  rank->add_option("--out", out_path)->required();
  add_engines(rank, eng);
  add_common(rank, common, false);

  auto* feedback = app.add_subcommand("feedback", "render local difficulty feedback as HTML");
  feedback->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  feedback->add_option("--model", model)->required()->check(CLI::ExistingFile);
  feedback->add_option("--mode", mode, "window or attention")->check(CLI::IsMember({"window", "attention"}));
  feedback->add_option("--ids", ids, "comma-separated score ids (default all)");
  feedback->add_option("--out-dir", out_dir)->required();
  add_engines(feedback, eng);
  add_common(feedback, common, false);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    std::ostream silent(nullptr);
    if (*synth) return cmd_synth(out_path, common.seed, per_class, common.quiet ? silent : out);
    if (*ingest) return cmd_ingest(manifest, dir, out_path, common.quiet ? silent : out, err);
    if (*finger) return cmd_finger(corpus, engine, eng, common, out_path, out, err);
    if (*feats) return cmd_features(corpus, kind, eng, common, out_path, err);
    if (*train) return cmd_train(corpus, kind, classifier, eng, common, out_path, out, err);
    if (*runc) return cmd_run(corpus, features_csv, classifiers_csv, eng, common, out_dir, out, err);
    if (*ablate) return cmd_ablate(corpus, kind, sizes, eng, common, out_dir, out, err);
    if (*rank) return cmd_rank(corpus, model, eng, common, out_path, out, err);
    if (*feedback) return cmd_feedback(corpus, model, mode, ids, eng, common, out_dir, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

}  // namespace pdiff::cli

// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL/SKIPPED line per criterion.
#include "pdiff/cli.hpp"
#include "pdiff/deepgru.hpp"
#include "pdiff/eval.hpp"
#include "pdiff/features.hpp"
#include "pdiff/fingering_dp.hpp"
#include "pdiff/fingering_hmm.hpp"
#include "pdiff/gbt.hpp"
#include "pdiff/metrics.hpp"
#include "pdiff/rng.hpp"
#include "test_helpers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace pdiff;
using features::FeatureKind;

namespace {

enum class Status { Pass, Fail, Skipped };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Clock {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// odometer over {1..5}^n; returns false after the last tuple
bool next_tuple(std::vector<int>& f) {
  std::size_t k = f.size();
  while (k > 0 && f[k - 1] == 5) f[--k] = 1;
  if (k == 0) return false;
  ++f[k - 1];
  return true;
}

// ---------------------------------------------------------------- 1. Viterbi

fingering::hmm::HmmParams random_hmm(SplitMix64& rng) {
  fingering::hmm::HmmParams p;
  for (auto* h : {&p.left, &p.right}) {
    double z = 0;
    for (double& x : h->initial) z += x = std::exp(rng.normal());
    for (double& x : h->initial) x /= z;
    for (auto& row : h->trans) {
      z = 0;
      for (auto& to : row)
        for (double& x : to) z += x = std::exp(rng.normal());
      for (auto& to : row)
        for (double& x : to) x /= z;
    }
  }
  return p;
}

Outcome viterbi_oracle() {
  Clock clock;
  SplitMix64 rng(0xacce55);
  int mismatched = 0;
  double worst = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const auto params = random_hmm(rng);
    const Hand hand = inst % 2 ? Hand::Left : Hand::Right;
    const auto& hp = params.hand(hand);
    const int n = static_cast<int>(rng.uniform_int(1, 8));
    std::vector<int> pitches{static_cast<int>(rng.uniform_int(40, 80))};
    while (static_cast<int>(pitches.size()) < n)
      pitches.push_back(std::clamp(pitches.back() + static_cast<int>(rng.uniform_int(-20, 20)), 21, 108));

    const auto ll = [&](const std::vector<int>& f) {
      double s = std::log(hp.initial[static_cast<std::size_t>(f[0] - 1)]);
      for (std::size_t t = 1; t < f.size(); ++t) {
        const int d = std::clamp(pitches[t] - pitches[t - 1], -15, 15) + 15;
        s += std::log(hp.trans[static_cast<std::size_t>(f[t - 1] - 1)][static_cast<std::size_t>(f[t] - 1)]
                              [static_cast<std::size_t>(d)]);
      }
      return s;
    };
    std::vector<int> f(static_cast<std::size_t>(n), 1), best_f;
    double best = -std::numeric_limits<double>::infinity();
    do {
      const double v = ll(f);
      if (v > best) best = v, best_f = f;
    } while (next_tuple(f));

    const auto d = fingering::hmm::viterbi_decode(params, pitches, hand);
    if (d.fingers != best_f) ++mismatched;
    worst = std::max(worst, std::abs(d.log_likelihood - best));
  }
  const double t = clock.seconds();
  Outcome o;
  o.status = mismatched == 0 && worst <= 1e-10 && t < 30 ? Status::Pass : Status::Fail;
  o.detail = fmt("200 instances, %d argmax mismatches, max |dLL| %.2e, %.1f s", mismatched, worst, t);
  return o;
}

// ---------------------------------------------------------------- 2. DP fingering

// independent restatement of the default velocity cost
double oracle_key(int pitch) {
  static constexpr bool kBlack[12] = {false, true, false, true, false, false, true, false, true, false, true, false};
  int whites = 0;
  for (int p = 21; p < pitch; ++p) whites += !kBlack[p % 12];
  return kBlack[pitch % 12] ? whites - 0.5 : whites;
}

double oracle_cost(int f0, int p0, int f1, int p1, double dt, Hand hand) {
  if (f0 == f1 && p0 == p1) return 0.0;
  static constexpr int kSpan[5][5][2] = {
      {{0, 0}, {-5, 8}, {-4, 11}, {-3, 13}, {-1, 15}},
      {{0, 0}, {0, 0}, {1, 5}, {1, 7}, {2, 10}},
      {{0, 0}, {0, 0}, {0, 0}, {1, 4}, {1, 7}},
      {{0, 0}, {0, 0}, {0, 0}, {0, 0}, {1, 5}},
      {{0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}},
  };
  const int d = hand == Hand::Right ? p1 - p0 : p0 - p1;
  int lo = 0, hi = 0;
  if (f0 < f1) {
    lo = kSpan[f0 - 1][f1 - 1][0];
    hi = kSpan[f0 - 1][f1 - 1][1];
  } else if (f0 > f1) {
    lo = -kSpan[f1 - 1][f0 - 1][1];
    hi = -kSpan[f1 - 1][f0 - 1][0];
  }
  const int outside = d < lo ? lo - d : d > hi ? d - hi : 0;
  double keys = std::abs(oracle_key(p1) - oracle_key(p0)) * (1.0 + 0.25 * outside);
  if ((f0 == 1 && f1 != 1 && d < 0) || (f1 == 1 && f0 != 1 && d > 0)) keys += 1.0;
  return keys / std::max(dt, 0.05);
}

Outcome dp_oracle() {
  Clock clock;
  SplitMix64 rng(0xd9);
  auto cfg = fingering::dp::DpConfig::defaults();
  cfg.beam = 15625;  // 5^6
  double worst = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const Hand hand = inst % 3 == 0 ? Hand::Left : Hand::Right;
    const int n = static_cast<int>(rng.uniform_int(1, 6));
    score::Score s;
    s.id = "dp-oracle";
    s.tempo_bpm = rng.uniform(50, 200);
    std::vector<int> pitches;
    std::vector<double> beats;
    Rational t{0};
    int p = static_cast<int>(rng.uniform_int(40, 85));
    for (int i = 0; i < n; ++i) {
      pitches.push_back(p);
      beats.push_back(to_double(t));
      s.events.push_back({p, t, Rational(1), hand, 1, 1});
      t += Rational(rng.uniform_int(1, 8), 4);
      p = std::clamp(p + static_cast<int>(rng.uniform_int(-12, 12)), 21, 108);
    }
    s.normalize();
    const auto res = fingering::dp::assign_fingers_dp(s, hand, cfg);
    double total = 0;
    for (double c : res.costs) total += c;

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> f(static_cast<std::size_t>(n), 1);
    do {
      double c = 0;
      for (std::size_t i = 1; i < f.size(); ++i)
        c += oracle_cost(f[i - 1], pitches[i - 1], f[i], pitches[i], (beats[i] - beats[i - 1]) * 60.0 / s.tempo_bpm, hand);
      best = std::min(best, c);
    } while (next_tuple(f));
    worst = std::max(worst, std::abs(total - best));
  }
  const double t = clock.seconds();
  return {worst <= 1e-9 && t < 60 ? Status::Pass : Status::Fail,
          fmt("100 sequences, max |cost - exhaustive| %.2e, %.1f s", worst, t)};
}

// ---------------------------------------------------------------- 3. gradients

double softmax_nll(const gbt::Probs& z, int y) {
  const double m = std::max({z[0], z[1], z[2]});
  return m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m) + std::exp(z[2] - m)) - z[static_cast<std::size_t>(y - 1)];
}

Outcome gradient_checks() {
  Clock clock;
  SplitMix64 rng(0x97ad);
  double gbt_worst = 0;
  const double h = 1e-5;
  for (int trial = 0; trial < 500; ++trial) {
    const gbt::Probs z = {rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)};
    const int y = static_cast<int>(rng.uniform_int(1, 3));
    const auto gh = gbt::softmax_grad_hess(z, y);
    for (std::size_t c = 0; c < 3; ++c) {
      auto up = z, dn = z;
      up[c] += h;
      dn[c] -= h;
      const double g = (softmax_nll(up, y) - softmax_nll(dn, y)) / (2 * h);
      const double dg = (gbt::softmax_grad_hess(up, y).grad[c] - gbt::softmax_grad_hess(dn, y).grad[c]) / (2 * h);
      const auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}); };
      gbt_worst = std::max({gbt_worst, rel(g, gh.grad[c]), rel(dg, gh.hess[c])});
    }
  }

  double gru_worst = 0;
  for (int inst = 0; inst < 20; ++inst) {
    gru::GruNetConfig c;
    const int in = static_cast<int>(rng.uniform_int(1, 4));
    c.layer_widths.clear();
    for (int l = 0, L = static_cast<int>(rng.uniform_int(1, 3)); l < L; ++l)
      c.layer_widths.push_back(static_cast<int>(rng.uniform_int(1, 6)));
    c.fc_width = static_cast<int>(rng.uniform_int(2, 5));
    c.seed = static_cast<std::uint64_t>(inst);
    auto p = gru::init_model(c, in).params.cast<double>();
    for (auto b : p.blocks())
      for (double& x : b) x += 0.3 * rng.uniform(-1, 1);
    std::vector<gru::Mat<double>> xs;
    std::vector<int> ys;
    for (int b = 0, B = static_cast<int>(rng.uniform_int(1, 3)); b < B; ++b) {
      gru::Mat<double> x(in, static_cast<int>(rng.uniform_int(1, 6)));
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
      xs.push_back(std::move(x));
      ys.push_back(static_cast<int>(rng.uniform_int(1, 3)));
    }
    gru_worst = std::max(gru_worst, gru::gradient_check(p, xs, ys).max_relative_error);
  }
  const double t = clock.seconds();
  return {gbt_worst < 1e-6 && gru_worst < 1e-4 && t < 60 ? Status::Pass : Status::Fail,
          fmt("gbt max rel %.2e (500 logits), deepgru max rel %.2e (20 nets), %.1f s", gbt_worst, gru_worst, t)};
}

// ---------------------------------------------------------------- 4. metrics

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> counting_ranks(const std::vector<double>& x) {
  std::vector<double> r;
  for (double v : x) {
    int less = 0, equal = 0;
    for (double u : x) less += u < v, equal += u == v;
    r.push_back(less + (equal + 1) / 2.0);
  }
  return r;
}

Outcome metric_oracles() {
  Clock clock;
  SplitMix64 rng(0x5e);
  long checked = 0;
  double worst = 0;
  for (int n = 2; n <= 6; ++n) {
    std::vector<int> digits(static_cast<std::size_t>(n), 0);
    for (;;) {
      std::vector<double> a(digits.begin(), digits.end()), b(static_cast<std::size_t>(n));
      for (auto& v : b) v = static_cast<double>(rng.uniform_int(0, n - 1));
      std::set<double> da(a.begin(), a.end()), db(b.begin(), b.end());
      if (da.size() > 1 && db.size() > 1) {
        worst = std::max(worst, std::abs(metrics::spearman(a, b) - pearson(counting_ranks(a), counting_ranks(b))));
        ++checked;
      }
      std::size_t k = digits.size();
      while (k > 0 && digits[k - 1] == n - 1) digits[--k] = 0;
      if (k == 0) break;
      ++digits[k - 1];
    }
  }
  const std::vector<int> truth = {1, 1, 2, 2, 3, 3}, pred = {1, 1, 2, 2, 3, 1};
  const bool bacc = metrics::balanced_accuracy(truth, pred) == 5.0 / 6.0 &&
                    metrics::balanced_accuracy(truth, std::vector<int>(6, 2)) == 1.0 / 3.0;
  const bool ec = metrics::expected_class({1, 0, 0}) == 1.0 && metrics::expected_class({0, 0, 1}) == 3.0 &&
                  metrics::expected_class({0.5, 0, 0.5}) == 2.0 && metrics::expected_class({0.25, 0.5, 0.25}) == 2.0;
  return {worst <= 1e-12 && bacc && ec ? Status::Pass : Status::Fail,
          fmt("spearman %ld patterns max err %.1e, balanced accuracy %s, expected class %s, %.1f s", checked, worst,
              bacc ? "exact" : "WRONG", ec ? "exact" : "WRONG", clock.seconds())};
}

// ---------------------------------------------------------------- 5. matrix/window invariants

Outcome matrix_invariants() {
  Clock clock;
  std::vector<std::string> problems;
  const auto fail = [&](const std::string& m) {
    if (problems.size() < 5) problems.push_back(m);
  };
  long cells = 0;
  for (int i = 0; i < 100; ++i) {
    const auto syn = score::generate_synthetic_score(static_cast<std::uint64_t>(7000 + i), 1 + i % 3);
    const auto& s = syn.score;
    const auto dp = fingering::dp::assign_fingers_dp(s);
    const auto hmm = fingering::hmm::assign_fingers_hmm(s, fingering::hmm::default_prior_params());

    // rows from the events directly
    std::vector<std::vector<std::size_t>> rows;
    for (std::size_t e = 0; e < s.events.size(); ++e) {
      if (e == 0 || s.events[e].onset != s.events[e - 1].onset) rows.emplace_back();
      rows.back().push_back(e);
    }
    const int I = static_cast<int>(rows.size());
    if (I != syn.info.onset_count) fail(s.id + ": onset count");

    std::map<FeatureKind, features::FeatureMatrix> m;
    for (auto k : features::kAllKinds) {
      m[k] = features::build_feature_matrix(s, k, &dp, &hmm);
      if (m[k].rows != I || m[k].cols != features::kind_width(k) ||
          m[k].cells.size() != static_cast<std::size_t>(I * m[k].cols))
        fail(s.id + ": shape " + features::kind_name(k));
      cells += static_cast<long>(m[k].cells.size());
    }
    for (int r = 0; r < I; ++r) {
      std::set<int> keys, dp_cols, hmm_cols;
      for (std::size_t e : rows[static_cast<std::size_t>(r)]) {
        keys.insert(s.events[e].pitch - 21);
        dp_cols.insert(dp.fingers[e] < 0 ? dp.fingers[e] + 5 : dp.fingers[e] + 4);
        hmm_cols.insert(hmm.fingers[e] < 0 ? hmm.fingers[e] + 5 : hmm.fingers[e] + 4);
      }
      for (int c = 0; c < 88; ++c)
        if (m[FeatureKind::K].at(r, c) != (keys.count(c) ? 1.0 : 0.0)) fail(s.id + ": K cell");
      for (int c = 0; c < 10; ++c) {
        const double pf = m[FeatureKind::PF].at(r, c), pv = m[FeatureKind::PV].at(r, c);
        const double nf = m[FeatureKind::NF].at(r, c), np = m[FeatureKind::NP].at(r, c);
        if (pf != (dp_cols.count(c) ? 1.0 : 0.0)) fail(s.id + ": PF cell");
        if (nf != (hmm_cols.count(c) ? 1.0 : 0.0)) fail(s.id + ": NF cell");
        if (!(pv >= 0 && pv < 1) || (pf == 0 && pv != 0)) fail(s.id + ": PV cell");
        if (!(np >= 0 && np <= 1) || ((nf != 0) != (np != 0))) fail(s.id + ": NP cell");
      }
    }
    for (int w : {1, 3, 5, 9, 13, 19}) {
      if (features::window_count(I, w, 1) != std::max(1, I - w + 1)) fail(s.id + ": window count");
      if (static_cast<int>(features::window_segments(m[FeatureKind::PV], w, 1).size()) != std::max(1, I - w + 1))
        fail(s.id + ": segments");
      std::vector<int> brute(static_cast<std::size_t>(I), 0);
      for (int k = 0; k < std::max(1, I - w + 1); ++k)
        for (int r = k; r < std::min(I, k + w); ++r) ++brute[static_cast<std::size_t>(r)];
      if (features::coverage_counts(I, w) != brute) fail(s.id + ": coverage");
    }
  }
  std::string detail = fmt("100 scores, %ld cells, windows w in {1,3,5,9,13,19}, %.1f s", cells, clock.seconds());
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty() ? Status::Pass : Status::Fail, detail};
}

// ---------------------------------------------------------------- 6/7. synthetic experiments

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Experiments {
  double pv_seconds = 0;
  eval::EvaluationReport pv, rest;
  std::string error;
};

const eval::CellReport* find_cell(const Experiments& x, FeatureKind k, eval::Classifier c) {
  for (const auto* r : {&x.pv, &x.rest})
    for (const auto& cell : r->cells)
      if (cell.kind == k && cell.classifier == c) return &cell;
  return nullptr;
}

Experiments run_synthetic() {
  Experiments x;
  try {
    Clock clock;
    const auto corpus = score::generate_synthetic_corpus(2024, 30);
    eval::PrepareOptions po;
    po.kinds = {FeatureKind::PV};
    po.jobs = static_cast<int>(jobs());
    auto spec = eval::ExperimentSpec::desk();
    spec.jobs = static_cast<int>(jobs());
    spec.kinds = {FeatureKind::PV};
    x.pv = eval::run_experiment(spec, eval::prepare_corpus(corpus, po));
    x.pv_seconds = clock.seconds();

    po.kinds = {FeatureKind::K, FeatureKind::PF, FeatureKind::NF, FeatureKind::NP};
    spec.kinds = po.kinds;
    x.rest = eval::run_experiment(spec, eval::prepare_corpus(corpus, po));
  } catch (const std::exception& e) {
    x.error = e.what();
  }
  return x;
}

double test_mean(const eval::CellReport* c) { return c && c->test.n > 0 ? c->test.mean : std::nan(""); }

Outcome synthetic_end_to_end(const Experiments& x) {
  if (!x.error.empty()) return {Status::Fail, "experiment error: " + x.error};
  const double gru = test_mean(find_cell(x, FeatureKind::PV, eval::Classifier::DeepGru));
  const double avg = test_mean(find_cell(x, FeatureKind::PV, eval::Classifier::GbtAvg));
  const bool ok = gru >= 0.85 && avg >= 0.70 && x.pv_seconds < 600 && x.pv.failures() == 0;
  return {ok ? Status::Pass : Status::Fail,
          fmt("90 scores, 10 seeds: deepgru PV %.3f (>= 0.85), gbt_avg PV %.3f (>= 0.70), %d failed seeds, %.0f s "
              "on %u thread(s) (< 600 s)",
              gru, avg, x.pv.failures(), x.pv_seconds, jobs())};
}

Outcome orderings(const std::vector<const eval::EvaluationReport*>& reports, const std::string& label) {
  const auto mean = [&](FeatureKind k, eval::Classifier c) {
    for (const auto* r : reports)
      for (const auto& cell : r->cells)
        if (cell.kind == k && cell.classifier == c && cell.test.n > 0) return cell.test.mean;
    return std::nan("");
  };
  using C = eval::Classifier;
  bool ok = true;
  std::string d = label + ":";

  // (a) pooled over the features, per-feature deltas shown for reference
  double avg = 0, win = 0;
  std::string per;
  for (auto k : features::kAllKinds) {
    avg += mean(k, C::GbtAvg) / 5;
    win += mean(k, C::GbtWindow) / 5;
    per += fmt(" %s%+.3f", features::kind_name(k).c_str(), mean(k, C::GbtAvg) - mean(k, C::GbtWindow));
  }
  ok &= avg > win;
  d += fmt(" (a) gbt_avg %.3f vs gbt_window %.3f [per feature:%s]", avg, win, per.c_str());

  const double k = mean(FeatureKind::K, C::DeepGru);
  d += fmt("; (b) deepgru K %.3f <", k);
  for (auto f : {FeatureKind::PF, FeatureKind::PV, FeatureKind::NF, FeatureKind::NP}) {
    ok &= mean(f, C::DeepGru) > k;
    d += fmt(" %s %.3f", features::kind_name(f).c_str(), mean(f, C::DeepGru));
  }
  const double pv = mean(FeatureKind::PV, C::GbtAvg), pf = mean(FeatureKind::PF, C::GbtAvg);
  const double np = mean(FeatureKind::NP, C::GbtAvg), nf = mean(FeatureKind::NF, C::GbtAvg);
  ok &= pv > pf && np > nf;
  d += fmt("; (c) gbt_avg PV %.3f > PF %.3f, NP %.3f > NF %.3f", pv, pf, np, nf);
  return {ok ? Status::Pass : Status::Fail, d};
}

// ---------------------------------------------------------------- 8. real data

fs::path real_data_dir() {
  if (const char* env = std::getenv("PDIFF_MIKROKOSMOS_DIR")) return env;
  return fs::path(PDIFF_SOURCE_DIR) / "data" / "mikrokosmos";
}

struct RealData {
  bool present = false;
  std::string error;
  eval::EvaluationReport report;
};

RealData run_real() {
  RealData r;
  const auto dir = real_data_dir();
  const auto manifest = dir / "manifest.csv";
  if (!fs::exists(manifest)) return r;
  r.present = true;
  try {
    std::ifstream in(manifest);
    std::stringstream text;
    text << in.rdbuf();
    const auto m = score::load_manifest(text.str(), dir);
    if (!m.problems.empty()) throw DataError(std::to_string(m.problems.size()) + " manifest problems");
    eval::PrepareOptions po;
    po.jobs = static_cast<int>(jobs());
    auto spec = eval::ExperimentSpec::desk();
    spec.jobs = static_cast<int>(jobs());
    r.report = eval::run_experiment(spec, eval::prepare_corpus(m.entries, po));
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

Outcome real_thresholds(const RealData& r) {
  if (!r.present) return {Status::Skipped, "no corpus at " + real_data_dir().string()};
  if (!r.error.empty()) return {Status::Fail, "error: " + r.error};
  const auto& c = r.report.cell(FeatureKind::PV, eval::Classifier::DeepGru);
  const bool ok = c.test.n > 0 && c.bartok.n > 0 && c.test.mean >= 0.60 && c.bartok.mean >= 0.60;
  return {ok ? Status::Pass : Status::Fail,
          fmt("deepgru PV accuracy %.3f (>= 0.60), Spearman vs Bartok %.3f (>= 0.60)", c.test.mean, c.bartok.mean)};
}

// ---------------------------------------------------------------- 9. determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  Clock clock;
  const fs::path root = fs::temp_directory_path() / ("pdiff_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root / "xml");
  {
    using testing::note_xml;
    std::ofstream(root / "xml" / "a.musicxml")
        << testing::musicxml(note_xml('C', 4, 1) + note_xml('E', 4, 1) + note_xml('G', 4, 2) + note_xml('C', 3, 4, 2));
    std::ofstream(root / "xml" / "b.musicxml") << testing::musicxml(note_xml('D', 5, 2) + note_xml('F', 5, 2, 1, false, 1));
    std::ofstream(root / "xml" / "m.csv") << "file,bartok_index,henle_grade\na.musicxml,1,1\nb.musicxml,100,4\n";
    std::ofstream(root / "small.json")
        << R"({"experiment": {"search": {"n_configs": 3, "folds": 2, "window_thinning": 4},
               "deepgru": {"layer_widths": [8, 8], "fc_width": 8, "epochs": 4}}})";
  }
  int compared = 0;
  std::vector<std::string> diffs;
  // both passes run in the same directory so paths recorded in provenance agree
  const auto pass = [&](const std::string& tag, int jobs_n) {
    const fs::path d = root / "work";
    fs::create_directories(d);
    const std::string j = std::to_string(jobs_n), c = (root / "corpus.json").string(), cfg = (root / "small.json").string();
    const std::vector<std::vector<std::string>> steps = {
        {"ingest", "--manifest", (root / "xml" / "m.csv").string(), "--out", (d / "ingested.json").string()},
        {"finger", "--corpus", c, "--engine", "dp", "--out", (d / "dp.json").string(), "--jobs", j},
        {"finger", "--corpus", c, "--engine", "hmm", "--out", (d / "hmm.json").string(), "--jobs", j},
        {"features", "--corpus", c, "--feature", "K", "--out", (d / "k.json").string(), "--jobs", j},
        {"features", "--corpus", c, "--feature", "PF", "--out", (d / "pf.json").string(), "--jobs", j},
        {"features", "--corpus", c, "--feature", "PV", "--out", (d / "pv.json").string(), "--jobs", j},
        {"features", "--corpus", c, "--feature", "NF", "--out", (d / "nf.json").string(), "--jobs", j},
        {"features", "--corpus", c, "--feature", "NP", "--out", (d / "np.json").string(), "--jobs", j},
        {"train", "--corpus", c, "--feature", "PV", "--classifier", "gbt", "--config", cfg, "--out",
         (d / "gbt.json").string(), "--jobs", j},
        {"train", "--corpus", c, "--feature", "PV", "--classifier", "deepgru", "--config", cfg, "--out",
         (d / "gru.bin").string(), "--jobs", j},
        {"rank", "--corpus", c, "--model", (d / "gbt.json").string(), "--out", (d / "rank.json").string()},
        {"feedback", "--corpus", c, "--model", (d / "gbt.json").string(), "--out-dir", (d / "fb_window").string()},
        {"feedback", "--corpus", c, "--model", (d / "gru.bin").string(), "--mode", "attention", "--out-dir",
         (d / "fb_attention").string()},
        {"run", "--corpus", c, "--config", cfg, "--seeds", "2", "--out-dir", (d / "run").string(), "--jobs", j},
        {"ablate", "--corpus", c, "--config", cfg, "--seeds", "1", "--sizes", "3,9", "--out-dir",
         (d / "ablate").string(), "--jobs", j},
    };
    for (auto args : steps) {
      args.push_back("-q");
      std::ostringstream out, err;
      const int code = cli::run(args, out, err);
      if (code != 0) throw std::runtime_error(args[0] + " exited " + std::to_string(code) + ": " + err.str());
    }
    fs::rename(d, root / tag);
  };
  try {
    for (const char* tag : {"s1", "s2"}) {
      std::ostringstream out, err;
      const auto path = (root / (std::string(tag) + ".json")).string();
      if (cli::run({"synth", "--out", path, "--per-class", "4", "--seed", "11"}, out, err) != 0)
        throw std::runtime_error("synth failed: " + err.str());
    }
    ++compared;
    if (slurp(root / "s1.json") != slurp(root / "s2.json")) diffs.push_back("synth");
    fs::copy_file(root / "s1.json", root / "corpus.json");
    pass("a", 1);
    pass("b", static_cast<int>(std::max(2u, jobs())));
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
      if (!e.is_regular_file()) continue;
      const auto rel = fs::relative(e.path(), root / "a");
      ++compared;
      if (slurp(e.path()) != slurp(root / "b" / rel)) diffs.push_back(rel.string());
    }
  } catch (const std::exception& ex) {
    fs::remove_all(root);
    return {Status::Fail, std::string("pipeline error: ") + ex.what()};
  }
  fs::remove_all(root);
  std::string detail = fmt("%d artifacts compared across two runs (jobs 1 vs %u), %zu differ, %.1f s", compared,
                           std::max(2u, jobs()), diffs.size(), clock.seconds());
  for (const auto& d : diffs) detail += "; " + d;
  return {diffs.empty() && compared > 20 ? Status::Pass : Status::Fail, detail};
}

}  // namespace

// optional arguments select criteria by number
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };
  int fails = 0, passes = 0, skipped = 0;
  const auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIPPED";
    (o.status == Status::Pass ? passes : o.status == Status::Fail ? fails : skipped)++;
    std::printf("%-7s [%d] %s: %s\n", tag, id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "viterbi-oracle", viterbi_oracle);
  report(2, "dp-fingering-oracle", dp_oracle);
  report(3, "gradient-checks", gradient_checks);
  report(4, "metric-oracles", metric_oracles);
  report(5, "matrix-window-invariants", matrix_invariants);

  const auto synthetic = wanted(6) || wanted(7) ? run_synthetic() : Experiments{};
  report(6, "synthetic-end-to-end", [&] { return synthetic_end_to_end(synthetic); });
  const auto real = wanted(7) || wanted(8) ? run_real() : RealData{};
  report(7, "trend-orderings", [&] {
    if (!synthetic.error.empty()) return Outcome{Status::Fail, "experiment error: " + synthetic.error};
    auto o = orderings({&synthetic.pv, &synthetic.rest}, "synthetic");
    if (real.present) {
      const auto r = real.error.empty() ? orderings({&real.report}, "mikrokosmos")
                                        : Outcome{Status::Fail, "mikrokosmos error: " + real.error};
      if (r.status == Status::Fail) o.status = Status::Fail;
      o.detail += " | " + r.detail;
    }
    return o;
  });
  report(8, "real-data-thresholds", [&] { return real_thresholds(real); });
  report(9, "determinism", determinism);

  std::printf("acceptance: %d passed, %d failed, %d skipped\n", passes, fails, skipped);
  return fails == 0 ? 0 : 1;
}

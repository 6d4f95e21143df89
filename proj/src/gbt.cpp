// SPDX-License-Identifier: Apache-2.0
#include "pdiff/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace pdiff::gbt {

void GbtHyperParams::validate() const {
  if (rounds < 1) throw UsageError("gbt rounds must be >= 1");
  if (max_depth < 0) throw UsageError("gbt max_depth must be >= 0");
  if (!(learning_rate > 0)) throw UsageError("gbt learning_rate must be positive");
  if (!(min_child_weight >= 0)) throw UsageError("gbt min_child_weight must be >= 0");
  if (!(subsample > 0 && subsample <= 1)) throw UsageError("gbt subsample must be in (0, 1]");
  if (!(colsample > 0 && colsample <= 1)) throw UsageError("gbt colsample must be in (0, 1]");
  if (!(l2_lambda >= 0)) throw UsageError("gbt l2_lambda must be >= 0");
}

nlohmann::ordered_json GbtHyperParams::to_json() const {
  return {{"rounds", rounds},
          {"max_depth", max_depth},
          {"learning_rate", learning_rate},
          {"min_child_weight", min_child_weight},
          {"subsample", subsample},
          {"colsample", colsample},
          {"l2_lambda", l2_lambda}};
}

GbtHyperParams GbtHyperParams::from_json(const nlohmann::ordered_json& j) {
  GbtHyperParams h;
  try {
    h.rounds = j.value("rounds", h.rounds);
    h.max_depth = j.value("max_depth", h.max_depth);
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.min_child_weight = j.value("min_child_weight", h.min_child_weight);
    h.subsample = j.value("subsample", h.subsample);
    h.colsample = j.value("colsample", h.colsample);
    h.l2_lambda = j.value("l2_lambda", h.l2_lambda);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("gbt hyperparameters: ") + e.what());
  }
  h.validate();
  return h;
}

void Dataset::add_row(std::span<const double> dense, int label, int group) {
  if (static_cast<int>(dense.size()) != width)
    throw ShapeError("row width " + std::to_string(dense.size()) + " does not match dataset width " + std::to_string(width));
  if (label < 1 || label > 3) throw LabelError("class label outside 1..3");
  for (std::size_t j = 0; j < dense.size(); ++j)
    if (dense[j] != 0.0) {
      col.push_back(static_cast<int>(j));
      val.push_back(dense[j]);
    }
  row_ptr.push_back(col.size());
  labels.push_back(label);
  groups.push_back(group);
}

double Dataset::value(std::size_t row, int feature) const {
  const auto b = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[row]);
  const auto e = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[row + 1]);
  const auto it = std::lower_bound(b, e, feature);
  return it != e && *it == feature ? val[static_cast<std::size_t>(it - col.begin())] : 0.0;
}

std::vector<double> Dataset::dense_row(std::size_t row) const {
  std::vector<double> out(static_cast<std::size_t>(width), 0.0);
  for (std::size_t k = row_ptr[row]; k < row_ptr[row + 1]; ++k) out[static_cast<std::size_t>(col[k])] = val[k];
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out(width);
  for (std::size_t r : rows) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      out.col.push_back(col[k]);
      out.val.push_back(val[k]);
    }
    out.row_ptr.push_back(out.col.size());
    out.labels.push_back(labels[r]);
    out.groups.push_back(groups[r]);
  }
  return out;
}

Probs softmax(const Probs& z) {
  const double m = std::max({z[0], z[1], z[2]});
  Probs p;
  double s = 0;
  for (std::size_t c = 0; c < 3; ++c) s += p[c] = std::exp(z[c] - m);
  for (double& x : p) x /= s;
  return p;
}

GradHess softmax_grad_hess(const Probs& logits, int label) {
  if (label < 1 || label > 3) throw LabelError("class label outside 1..3");
  const auto p = softmax(logits);
  GradHess gh;
  for (std::size_t c = 0; c < 3; ++c) {
    gh.grad[c] = p[c] - (static_cast<int>(c) + 1 == label ? 1.0 : 0.0);
    gh.hess[c] = p[c] * (1.0 - p[c]);
  }
  return gh;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    best = std::max(best, d[n]);
    if (nodes[n].feature >= 0) {
      d[static_cast<std::size_t>(nodes[n].left)] = d[n] + 1;
      d[static_cast<std::size_t>(nodes[n].right)] = d[n] + 1;
    }
  }
  return best;
}

namespace {

struct Column {
  std::vector<double> v;         // ascending
  std::vector<std::uint32_t> r;  // parallel row ids
  std::size_t first_positive = 0;
};

std::vector<Column> build_columns(const Dataset& d) {
  std::vector<std::vector<std::pair<double, std::uint32_t>>> tmp(static_cast<std::size_t>(d.width));
  for (std::size_t r = 0; r < d.size(); ++r)
    for (std::size_t k = d.row_ptr[r]; k < d.row_ptr[r + 1]; ++k)
      tmp[static_cast<std::size_t>(d.col[k])].emplace_back(d.val[k], static_cast<std::uint32_t>(r));
  std::vector<Column> cols(tmp.size());
  for (std::size_t j = 0; j < tmp.size(); ++j) {
    std::sort(tmp[j].begin(), tmp[j].end());
    auto& c = cols[j];
    c.v.reserve(tmp[j].size());
    c.r.reserve(tmp[j].size());
    for (const auto& [v, r] : tmp[j]) {
      c.v.push_back(v);
      c.r.push_back(r);
    }
    c.first_positive = static_cast<std::size_t>(std::upper_bound(c.v.begin(), c.v.end(), 0.0) - c.v.begin());
  }
  return cols;
}

struct Best {
  double gain = 0;
  int feature = -1;
  double threshold = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& d, const std::vector<Column>& cols, const GbtHyperParams& h)
      : d_(d), cols_(cols), h_(h) {}

  /// Grows one tree; `leaf_of_row` receives the leaf node reached by every row.
  Tree build(const std::vector<double>& g, const std::vector<double>& hs, const std::vector<char>& sampled,
             const std::vector<int>& features, std::vector<int>& leaf_of_row, FitReport* report) {
    const std::size_t n = d_.size();
    Tree tree;
    tree.nodes.emplace_back();
    std::vector<int> frontier = {0};
    pos_.assign(n, 0);  // position in frontier, -1 once the row's leaf is final
    leaf_of_row.assign(n, 0);
    rows_.resize(n);
    for (std::size_t r = 0; r < n; ++r) rows_[r] = {g[r], hs[r], -1};

    for (int depth = 0;; ++depth) {
      const std::size_t f = frontier.size();
      G_.assign(f, 0);
      H_.assign(f, 0);
      C_.assign(f, 0);
      for (std::size_t r = 0; r < n; ++r) {
        rows_[r].pos = sampled[r] ? pos_[r] : -1;
        if (rows_[r].pos >= 0) {
          const auto p = static_cast<std::size_t>(pos_[r]);
          G_[p] += g[r];
          H_[p] += hs[r];
          C_[p] += 1;
        }
      }
      if (depth >= h_.max_depth) {
        finish(tree, frontier, leaf_of_row);
        break;
      }
      std::vector<Best> best(f);
      prepare_parents();
      // nodes too light for two children stay out of the column scans
      for (std::size_t r = 0; r < n; ++r)
        if (rows_[r].pos >= 0 && H_[static_cast<std::size_t>(rows_[r].pos)] < 2 * h_.min_child_weight) rows_[r].pos = -1;
      for (int j : features) scan(j, best);

      std::vector<int> next;
      std::vector<int> child(f, -1);
      for (std::size_t p = 0; p < f; ++p) {
        auto& node = tree.nodes[static_cast<std::size_t>(frontier[p])];
        if (best[p].feature < 0) {
          node.value = leaf_value(G_[p], H_[p]);
          continue;
        }
        if (best[p].gain < 0) throw InternalError("accepted a split with negative gain");
        if (report) {
          report->min_split_gain = report->splits == 0 ? best[p].gain : std::min(report->min_split_gain, best[p].gain);
          ++report->splits;
        }
        node.feature = best[p].feature;
        node.threshold = best[p].threshold;
        node.left = static_cast<int>(tree.nodes.size());
        node.right = node.left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        child[p] = static_cast<int>(next.size());
        next.push_back(node.left);
        next.push_back(node.right);
      }
      for (std::size_t r = 0; r < n; ++r) {
        if (pos_[r] < 0) continue;
        const auto p = static_cast<std::size_t>(pos_[r]);
        if (child[p] < 0) {
          leaf_of_row[r] = frontier[p];
          pos_[r] = -1;
          continue;
        }
        const auto& node = tree.nodes[static_cast<std::size_t>(frontier[p])];
        pos_[r] = child[p] + (d_.value(r, node.feature) < node.threshold ? 0 : 1);
      }
      if (next.empty()) break;
      frontier = std::move(next);
    }
    return tree;
  }

 private:
  double leaf_value(double G, double H) const {
    const double den = H + h_.l2_lambda;
    return den > 0 ? -h_.learning_rate * G / den : 0.0;
  }

  void finish(Tree& tree, const std::vector<int>& frontier, std::vector<int>& leaf_of_row) {
    for (std::size_t p = 0; p < frontier.size(); ++p)
      tree.nodes[static_cast<std::size_t>(frontier[p])].value = leaf_value(G_[p], H_[p]);
    for (std::size_t r = 0; r < pos_.size(); ++r)
      if (pos_[r] >= 0) leaf_of_row[r] = frontier[static_cast<std::size_t>(pos_[r])];
  }

  struct Acc {
    double g = 0, h = 0, c = 0, last = 0;
    bool started = false;
  };

  void consider(std::size_t p, int feature, double threshold, double GR, double HR, Best& best) const {
    if (HR < h_.min_child_weight) return;
    const double GL = G_[p] - GR, HL = H_[p] - HR;
    if (HL < h_.min_child_weight) return;
    const double l = h_.l2_lambda;
    if (HL + l <= 0 || HR + l <= 0 || !parent_ok_[p]) return;
    const double gain = 0.5 * (GL * GL / (HL + l) + GR * GR / (HR + l) - parent_[p]);
    if (gain > best.gain) {
      best.gain = gain;
      best.feature = feature;
      best.threshold = threshold;
    }
  }

  void prepare_parents() {
    const std::size_t f = G_.size();
    parent_.assign(f, 0);
    parent_ok_.assign(f, 0);
    for (std::size_t p = 0; p < f; ++p) {
      const double den = H_[p] + h_.l2_lambda;
      if (den > 0) {
        parent_[p] = G_[p] * G_[p] / den;
        parent_ok_[p] = 1;
      }
    }
  }

  // Descending scan accumulating the right-hand side. Stored entries are the
  // nonzeros; the implicit zero block is inserted between positives and negatives.
  void scan(int j, std::vector<Best>& best) {
    const auto& c = cols_[static_cast<std::size_t>(j)];
    const std::size_t f = G_.size();
    acc_.assign(f, Acc{});
    const auto step = [&](std::size_t k) {
      const std::uint32_t r = c.r[k];
      const auto& row = rows_[r];
      const int pp = row.pos;
      if (pp < 0) return;
      const auto p = static_cast<std::size_t>(pp);
      auto& a = acc_[p];
      const double v = c.v[k];
      if (a.started && v < a.last) consider(p, j, 0.5 * (v + a.last), a.g, a.h, best[p]);
      a.g += row.g;
      a.h += row.h;
      a.c += 1;
      a.last = v;
      a.started = true;
    };
    for (std::size_t k = c.v.size(); k > c.first_positive; --k) step(k - 1);
    if (c.first_positive > 0) {
      // negative values exist: fold the zero block in explicitly
      std::vector<double> gn(f, 0), hn(f, 0), cn(f, 0);
      for (std::size_t k = 0; k < c.first_positive; ++k) {
        const std::uint32_t r = c.r[k];
        if (rows_[r].pos < 0) continue;
        const auto p = static_cast<std::size_t>(rows_[r].pos);
        gn[p] += rows_[r].g;
        hn[p] += rows_[r].h;
        cn[p] += 1;
      }
      for (std::size_t p = 0; p < f; ++p) {
        auto& a = acc_[p];
        const double zc = C_[p] - a.c - cn[p];
        if (zc <= 0) continue;
        if (a.started) consider(p, j, 0.5 * a.last, a.g, a.h, best[p]);
        a.g = G_[p] - gn[p];
        a.h = H_[p] - hn[p];
        a.c = C_[p] - cn[p];
        a.last = 0;
        a.started = true;
      }
      for (std::size_t k = c.first_positive; k > 0; --k) step(k - 1);
    } else {
      for (std::size_t p = 0; p < f; ++p) {
        const auto& a = acc_[p];
        if (a.started && C_[p] - a.c > 0) consider(p, j, 0.5 * a.last, a.g, a.h, best[p]);
      }
    }
  }

  const Dataset& d_;
  const std::vector<Column>& cols_;
  const GbtHyperParams& h_;
  struct RowState {
    double g, h;
    int pos;  // frontier slot, -1 when the row is outside this round's sample or its node cannot split
  };
  std::vector<int> pos_;
  std::vector<RowState> rows_;
  std::vector<double> G_, H_, C_, parent_;
  std::vector<char> parent_ok_;
  std::vector<Acc> acc_;
};

double mean_log_loss(const std::vector<Probs>& logits, const std::vector<int>& labels) {
  double s = 0;
  for (std::size_t r = 0; r < logits.size(); ++r) {
    const auto& z = logits[r];
    const double m = std::max({z[0], z[1], z[2]});
    const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m) + std::exp(z[2] - m));
    s += lse - z[static_cast<std::size_t>(labels[r] - 1)];
  }
  return s / static_cast<double>(logits.size());
}

}  // namespace

GbtModel fit_gbt(const Dataset& data, const GbtHyperParams& hyper, std::uint64_t seed, FitReport* report) {
  hyper.validate();
  if (data.size() == 0) throw DataError("cannot fit gradient-boosted trees on an empty training set");
  if (data.width < 1) throw ShapeError("training rows have zero width");
  const std::size_t n = data.size();

  GbtModel model;
  model.width = data.width;
  model.hyper = hyper;
  model.seed = seed;

  Probs counts{};
  for (int y : data.labels) counts[static_cast<std::size_t>(y - 1)] += 1;
  int present = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    model.base_score[c] = std::log(std::max(counts[c] / static_cast<double>(n), 1e-6));
    present += counts[c] > 0;
  }
  if (report && present == 1) report->warnings.push_back("training set contains a single class");

  const auto cols = build_columns(data);
  TreeBuilder builder(data, cols, hyper);
  auto row_rng = SplitMix64::named(seed, "gbt-rows");
  auto col_rng = SplitMix64::named(seed, "gbt-cols");
  const int ncols = std::max(1, static_cast<int>(std::floor(hyper.colsample * data.width + 0.5)));

  std::vector<Probs> logits(n, model.base_score);
  if (report) report->train_loss.push_back(mean_log_loss(logits, data.labels));
  std::vector<char> sampled(n, 1);
  std::array<std::vector<double>, 3> g, h;
  for (auto& v : g) v.resize(n);
  for (auto& v : h) v.resize(n);
  std::vector<int> all_features(static_cast<std::size_t>(data.width));
  std::iota(all_features.begin(), all_features.end(), 0);
  std::array<std::vector<int>, 3> leaf_of_row;

  for (int round = 0; round < hyper.rounds; ++round) {
    if (hyper.subsample < 1)
      for (auto& s : sampled) s = row_rng.bernoulli(hyper.subsample);
    for (std::size_t r = 0; r < n; ++r) {
      const auto gh = softmax_grad_hess(logits[r], data.labels[r]);
      for (std::size_t c = 0; c < 3; ++c) {
        g[c][r] = gh.grad[c];
        h[c][r] = gh.hess[c];
      }
    }
    std::array<Tree, 3> trees;
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<int> features = all_features;
      if (ncols < data.width) {
        col_rng.shuffle(features);
        features.resize(static_cast<std::size_t>(ncols));
        std::sort(features.begin(), features.end());
      }
      trees[c] = builder.build(g[c], h[c], sampled, features, leaf_of_row[c], report);
    }
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < 3; ++c)
        logits[r][c] += trees[c].nodes[static_cast<std::size_t>(leaf_of_row[c][r])].value;
    model.trees.push_back(std::move(trees));
    if (report) report->train_loss.push_back(mean_log_loss(logits, data.labels));
  }
  return model;
}

namespace {

template <typename Lookup>
Probs predict_with(const GbtModel& model, Lookup&& x) {
  Probs z = model.base_score;
  for (const auto& round : model.trees)
    for (std::size_t c = 0; c < 3; ++c) z[c] += round[c].predict(x);
  return softmax(z);
}

}  // namespace

Probs predict_proba(const GbtModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.width)
    throw ShapeError("input width " + std::to_string(x.size()) + " does not match model width " +
                     std::to_string(model.width));
  return predict_with(model, [&](int j) { return x[static_cast<std::size_t>(j)]; });
}

Probs predict_row(const GbtModel& model, const Dataset& data, std::size_t row) {
  if (data.width != model.width)
    throw ShapeError("dataset width " + std::to_string(data.width) + " does not match model width " +
                     std::to_string(model.width));
  thread_local std::vector<double> dense;
  dense.assign(static_cast<std::size_t>(data.width), 0.0);
  for (std::size_t k = data.row_ptr[row]; k < data.row_ptr[row + 1]; ++k) dense[data.col[k]] = data.val[k];
  return predict_with(model, [&](int j) { return dense[static_cast<std::size_t>(j)]; });
}

std::vector<Probs> predict_dataset(const GbtModel& model, const Dataset& data) {
  std::vector<Probs> out;
  out.reserve(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) out.push_back(predict_row(model, data, r));
  return out;
}

Probs average_probs(std::span<const Probs> rows) {
  if (rows.empty()) throw DataError("cannot average an empty list of window predictions");
  Probs m{};
  for (const auto& p : rows)
    for (std::size_t c = 0; c < 3; ++c) m[c] += p[c];
  for (double& x : m) x /= static_cast<double>(rows.size());
  return m;
}

Probs predict_score_avg(const GbtModel& model, const std::vector<std::vector<double>>& windows) {
  std::vector<Probs> rows;
  rows.reserve(windows.size());
  for (const auto& w : windows) rows.push_back(predict_proba(model, w));
  return average_probs(rows);
}

// --- serialization ------------------------------------------------------------

namespace {

nlohmann::ordered_json node_json(const Tree& t, std::size_t n) {
  const auto& node = t.nodes[n];
  if (node.feature < 0) return {{"leaf", node.value}};
  return {{"feature", node.feature},
          {"threshold", node.threshold},
          {"left", node_json(t, static_cast<std::size_t>(node.left))},
          {"right", node_json(t, static_cast<std::size_t>(node.right))}};
}

int node_from_json(const nlohmann::ordered_json& j, Tree& t, int width) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  if (j.contains("leaf")) {
    t.nodes[static_cast<std::size_t>(id)].value = j.at("leaf").get<double>();
    return id;
  }
  const int feature = j.at("feature").get<int>();
  if (feature < 0 || feature >= width) throw FormatError("tree split feature " + std::to_string(feature) + " out of range");
  const double thr = j.at("threshold").get<double>();
  const int l = node_from_json(j.at("left"), t, width);
  const int r = node_from_json(j.at("right"), t, width);
  auto& node = t.nodes[static_cast<std::size_t>(id)];
  node.feature = feature;
  node.threshold = thr;
  node.left = l;
  node.right = r;
  return id;
}

}  // namespace

nlohmann::ordered_json GbtModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "pdiff-gbt";
  j["version"] = 1;
  j["width"] = width;
  j["seed"] = seed;
  j["hyper"] = hyper.to_json();
  j["base_score"] = base_score;
  auto rounds = nlohmann::ordered_json::array();
  for (const auto& round : trees) {
    auto per_class = nlohmann::ordered_json::array();
    for (const auto& t : round) per_class.push_back(node_json(t, 0));
    rounds.push_back(std::move(per_class));
  }
  j["trees"] = std::move(rounds);
  return j;
}

GbtModel GbtModel::from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("format") != "pdiff-gbt") throw FormatError("not a gbt model file");
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported gbt model version");
    GbtModel m;
    m.width = j.at("width").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.hyper = GbtHyperParams::from_json(j.at("hyper"));
    m.base_score = j.at("base_score").get<Probs>();
    for (const auto& round : j.at("trees")) {
      if (round.size() != 3) throw FormatError("each boosting round needs one tree per class");
      std::array<Tree, 3> trees;
      for (std::size_t c = 0; c < 3; ++c) node_from_json(round[c], trees[c], m.width);
      m.trees.push_back(std::move(trees));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("gbt model: ") + e.what());
  }
}

// --- search -----------------------------------------------------------------------

GbtHyperParams sample_hyper(SplitMix64& rng) {
  GbtHyperParams h;
  h.rounds = static_cast<int>(rng.uniform_int(20, 300));
  h.max_depth = static_cast<int>(rng.uniform_int(1, 8));
  h.learning_rate = std::exp(rng.uniform(std::log(0.02), std::log(0.5)));
  h.min_child_weight = rng.uniform(0.5, 8.0);
  h.subsample = rng.uniform(0.5, 1.0);
  h.colsample = rng.uniform(0.3, 1.0);
  h.l2_lambda = rng.uniform(0.0, 5.0);
  return h;
}

std::vector<int> assign_folds(std::span<const int> group_labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw UsageError("need at least two folds");
  auto rng = SplitMix64::named(seed, "gbt-folds");
  std::vector<int> fold(group_labels.size(), -1);
  int offset = 0;
  for (int c = 1; c <= 3; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t g = 0; g < group_labels.size(); ++g)
      if (group_labels[g] == c) members.push_back(g);
    if (static_cast<int>(members.size()) < folds)
      throw FoldError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                      " training scores; " + std::to_string(folds) + "-fold cross-validation needs at least " +
                      std::to_string(folds));
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i) fold[members[i]] = (offset + static_cast<int>(i)) % folds;
    offset += static_cast<int>(members.size());
  }
  return fold;
}

SearchReport random_search(const Dataset& train, const SearchOptions& opts, std::uint64_t seed) {
  if (opts.n_configs < 1) throw UsageError("random search needs at least one config");
  if (opts.window_thinning < 1) throw UsageError("window thinning must be >= 1");
  if (train.size() == 0) throw DataError("random search on an empty training set");

  std::map<int, int> group_label;
  for (std::size_t r = 0; r < train.size(); ++r) {
    const auto [it, fresh] = group_label.emplace(train.groups[r], train.labels[r]);
    if (!fresh && it->second != train.labels[r]) throw LabelError("windows of one score carry different labels");
  }
  const int max_group = group_label.rbegin()->first;
  if (group_label.begin()->first < 0) throw DataError("score group ids must be nonnegative");
  std::vector<int> labels_by_group(static_cast<std::size_t>(max_group + 1), 0);
  for (const auto& [gid, y] : group_label) labels_by_group[static_cast<std::size_t>(gid)] = y;

  SearchReport out;
  out.fold_of_group = assign_folds(labels_by_group, opts.folds, seed);

  std::vector<std::vector<std::size_t>> fit_rows(static_cast<std::size_t>(opts.folds)),
      val_rows(static_cast<std::size_t>(opts.folds));
  std::map<int, int> seen;
  for (std::size_t r = 0; r < train.size(); ++r) {
    const int gid = train.groups[r];
    if (seen[gid]++ % opts.window_thinning != 0) continue;
    const int f = out.fold_of_group[static_cast<std::size_t>(gid)];
    for (int k = 0; k < opts.folds; ++k) (k == f ? val_rows : fit_rows)[static_cast<std::size_t>(k)].push_back(r);
  }
  std::vector<Dataset> fit_sets, val_sets;
  for (int k = 0; k < opts.folds; ++k) {
    fit_sets.push_back(train.subset(fit_rows[static_cast<std::size_t>(k)]));
    val_sets.push_back(train.subset(val_rows[static_cast<std::size_t>(k)]));
  }

  auto rng = SplitMix64::named(seed, "gbt-search");
  for (int i = 0; i < opts.n_configs; ++i) {
    ConfigResult cr;
    cr.hyper = sample_hyper(rng);
    for (int k = 0; k < opts.folds; ++k) {
      const auto model = fit_gbt(fit_sets[static_cast<std::size_t>(k)], cr.hyper, seed + static_cast<std::uint64_t>(k));
      const auto& val = val_sets[static_cast<std::size_t>(k)];
      std::vector<int> pred;
      pred.reserve(val.size());
      for (std::size_t r = 0; r < val.size(); ++r) pred.push_back(metrics::argmax_class(predict_row(model, val, r)));
      cr.fold_accuracy.push_back(metrics::balanced_accuracy(val.labels, pred));
    }
    cr.mean_accuracy = metrics::mean_std(cr.fold_accuracy).mean;
    out.configs.push_back(std::move(cr));
    if (out.configs.back().mean_accuracy > out.configs[out.best].mean_accuracy) out.best = out.configs.size() - 1;
  }
  return out;
}

}  // namespace pdiff::gbt

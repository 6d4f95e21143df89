// SPDX-License-Identifier: Apache-2.0
#include "pdiff/deepgru.hpp"

#include "pdiff/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

namespace pdiff::gru {

// --- config -------------------------------------------------------------------

GruNetConfig GruNetConfig::desk() { return GruNetConfig{}; }

GruNetConfig GruNetConfig::full() {
  GruNetConfig c;
  c.layer_widths = {512, 512, 256, 256, 128};
  c.fc_width = 256;
  return c;
}

void GruNetConfig::validate() const {
  if (layer_widths.empty()) throw UsageError("GRU needs at least one layer");
  for (int w : layer_widths)
    if (w < 1) throw UsageError("GRU layer widths must be positive");
  if (fc_width < 1) throw UsageError("fc_width must be positive");
  if (classes != 3) throw UsageError("classes must be 3");
  if (!(dropout >= 0 && dropout < 1)) throw UsageError("dropout must be in [0, 1)");
  if (epochs < 0) throw UsageError("epochs must be >= 0");
  if (!(lr > 0)) throw UsageError("learning rate must be positive");
  if (batch < 1) throw UsageError("batch size must be positive");
}

nlohmann::ordered_json GruNetConfig::to_json() const {
  return {{"layer_widths", layer_widths}, {"fc_width", fc_width}, {"classes", classes}, {"dropout", dropout},
          {"epochs", epochs},             {"lr", lr},             {"batch", batch},     {"seed", seed}};
}

GruNetConfig GruNetConfig::from_json(const nlohmann::ordered_json& j) {
  GruNetConfig c;
  try {
    c.layer_widths = j.value("layer_widths", c.layer_widths);
    c.fc_width = j.value("fc_width", c.fc_width);
    c.classes = j.value("classes", c.classes);
    c.dropout = j.value("dropout", c.dropout);
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.batch = j.value("batch", c.batch);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("GRU config: ") + e.what());
  }
  c.validate();
  return c;
}

// --- parameters -----------------------------------------------------------------

namespace {

template <typename M>
auto span_of(M& m) {
  return std::span(m.data(), static_cast<std::size_t>(m.size()));
}

}  // namespace

template <typename T>
std::vector<std::span<T>> GruParams<T>::blocks() {
  std::vector<std::span<T>> out;
  for (auto& l : layers) {
    out.push_back(span_of(l.wx));
    out.push_back(span_of(l.u));
    out.push_back(span_of(l.b));
  }
  out.push_back(span_of(attn));
  out.push_back(span_of(ln_gain));
  out.push_back(span_of(ln_bias));
  out.push_back(span_of(fc1));
  out.push_back(span_of(fc1_b));
  out.push_back(span_of(fc2));
  out.push_back(span_of(fc2_b));
  return out;
}

template <typename T>
std::vector<std::span<const T>> GruParams<T>::blocks() const {
  auto mut = const_cast<GruParams<T>*>(this)->blocks();
  return {mut.begin(), mut.end()};
}

template <typename T>
std::size_t GruParams<T>::size() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += b.size();
  return n;
}

template <typename T>
GruParams<T> GruParams<T>::zeros_like() const {
  GruParams<T> z = *this;
  for (auto b : z.blocks()) std::fill(b.begin(), b.end(), T(0));
  return z;
}

template <typename T>
template <typename U>
GruParams<U> GruParams<T>::cast() const {
  GruParams<U> out;
  for (const auto& l : layers) out.layers.push_back({l.wx.template cast<U>(), l.u.template cast<U>(), l.b.template cast<U>()});
  out.attn = attn.template cast<U>();
  out.ln_gain = ln_gain.template cast<U>();
  out.ln_bias = ln_bias.template cast<U>();
  out.fc1 = fc1.template cast<U>();
  out.fc1_b = fc1_b.template cast<U>();
  out.fc2 = fc2.template cast<U>();
  out.fc2_b = fc2_b.template cast<U>();
  return out;
}

template struct GruParams<float>;
template struct GruParams<double>;
template GruParams<double> GruParams<float>::cast<double>() const;
template GruParams<float> GruParams<double>::cast<float>() const;

std::vector<float> fit_input_scale(const std::vector<const features::FeatureMatrix*>& corpus, int width) {
  std::vector<double> ss(static_cast<std::size_t>(width), 0.0), n(static_cast<std::size_t>(width), 0.0);
  for (const auto* m : corpus) {
    if (m->cols != width) throw ShapeError("feature matrices differ in width");
    for (int r = 0; r < m->rows; ++r)
      for (int c = 0; c < width; ++c)
        if (const double x = m->at(r, c); x != 0.0) {
          ss[static_cast<std::size_t>(c)] += x * x;
          n[static_cast<std::size_t>(c)] += 1;
        }
  }
  std::vector<float> scale(static_cast<std::size_t>(width), 1.0f);
  for (std::size_t c = 0; c < scale.size(); ++c)
    if (n[c] > 0 && ss[c] > 0) scale[c] = static_cast<float>(1.0 / std::sqrt(ss[c] / n[c]));
  return scale;
}

GruNetModel init_model(const GruNetConfig& config, int input_width) {
  config.validate();
  if (input_width < 1) throw ShapeError("input width must be positive");
  auto rng = SplitMix64::named(config.seed, "gru-init");
  const auto fill = [&rng](auto& m, int fan_in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(-a, a));
  };
  GruNetModel model;
  model.config = config;
  model.input_width = input_width;
  model.input_scale.assign(static_cast<std::size_t>(input_width), 1.0f);
  auto& p = model.params;
  int in = input_width;
  for (int h : config.layer_widths) {
    GruLayer<float> l{Mat<float>(3 * h, in), Mat<float>(3 * h, h), Vec<float>(3 * h)};
    fill(l.wx, in);
    fill(l.u, h);
    fill(l.b, h);
    p.layers.push_back(std::move(l));
    in = h;
  }
  const int d = in;
  p.attn = Mat<float>(d, d);
  fill(p.attn, d);
  p.ln_gain = Vec<float>::Ones(2 * d);
  p.ln_bias = Vec<float>::Zero(2 * d);
  p.fc1 = Mat<float>(config.fc_width, 2 * d);
  fill(p.fc1, 2 * d);
  p.fc1_b = Vec<float>(config.fc_width);
  fill(p.fc1_b, 2 * d);
  p.fc2 = Mat<float>(config.classes, config.fc_width);
  fill(p.fc2, config.fc_width);
  p.fc2_b = Vec<float>(config.classes);
  fill(p.fc2_b, config.fc_width);
  return model;
}

// --- forward / backward ---------------------------------------------------------

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename T, typename E>
auto sigmoid(const E& x) {
  return (T(1) / (T(1) + (-x.array()).exp())).matrix();
}

template <typename T>
Vec<T> softmax_vec(const Vec<T>& u) {
  Vec<T> a = (u.array() - u.maxCoeff()).exp().matrix();
  return a / a.sum();
}

/// One packed batch: sequences sorted by length (descending) so that the
/// active sequences at step t are exactly the first n_t columns.
template <typename T>
class Pass {
 public:
  explicit Pass(const GruParams<T>& p) : p_(p) {}

  void forward(const std::vector<const Mat<T>*>& inputs, const std::vector<Vec<T>>* masks = nullptr) {
    const std::size_t B = inputs.size();
    order_.resize(B);
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return inputs[a]->cols() > inputs[b]->cols(); });
    lens_.clear();
    for (std::size_t k : order_) {
      if (inputs[k]->cols() < 1) throw DataError("cannot run the GRU on an empty sequence");
      if (inputs[k]->rows() != p_.layers.front().wx.cols())
        throw ShapeError("sequence width " + std::to_string(inputs[k]->rows()) + " does not match model input width " +
                         std::to_string(p_.layers.front().wx.cols()));
      lens_.push_back(inputs[k]->cols());
    }
    steps_ = lens_.front();
    nt_.assign(static_cast<std::size_t>(steps_), 0);
    off_.assign(static_cast<std::size_t>(steps_), 0);
    Eigen::Index s = 0;
    for (Eigen::Index t = 0; t < steps_; ++t) {
      Eigen::Index n = 0;
      while (n < static_cast<Eigen::Index>(B) && lens_[static_cast<std::size_t>(n)] > t) ++n;
      nt_[static_cast<std::size_t>(t)] = n;
      off_[static_cast<std::size_t>(t)] = s;
      s += n;
    }
    total_ = s;

    lc_.resize(p_.layers.size());
    Mat<T> x(inputs.front()->rows(), total_);
    for (Eigen::Index t = 0; t < steps_; ++t)
      for (Eigen::Index k = 0; k < nt_[static_cast<std::size_t>(t)]; ++k)
        x.col(off_[static_cast<std::size_t>(t)] + k) = inputs[order_[static_cast<std::size_t>(k)]]->col(t);
    for (std::size_t li = 0; li < p_.layers.size(); ++li) {
      const auto& L = p_.layers[li];
      auto& c = lc_[li];
      const Eigen::Index h = L.u.cols();
      c.x = std::move(x);
      c.a.noalias() = L.wx * c.x;
      c.a.colwise() += L.b;
      c.z.resize(h, total_);
      c.r.resize(h, total_);
      c.n.resize(h, total_);
      c.rh.resize(h, total_);
      c.h.resize(h, total_);
      for (Eigen::Index t = 0; t < steps_; ++t) {
        const Eigen::Index n = nt_[static_cast<std::size_t>(t)], o = off_[static_cast<std::size_t>(t)];
        const auto A = c.a.middleCols(o, n);
        if (t == 0) {
          c.z.middleCols(o, n) = sigmoid<T>(A.topRows(h));
          c.r.middleCols(o, n) = sigmoid<T>(A.middleRows(h, h));
          c.rh.middleCols(o, n).setZero();
          c.n.middleCols(o, n) = A.bottomRows(h).array().tanh().matrix();
          c.h.middleCols(o, n) = c.z.middleCols(o, n).cwiseProduct(c.n.middleCols(o, n));
          continue;
        }
        const auto hp = c.h.middleCols(off_[static_cast<std::size_t>(t - 1)], n);
        Mat<T> zr = A.topRows(2 * h);
        zr.noalias() += L.u.topRows(2 * h) * hp;
        c.z.middleCols(o, n) = sigmoid<T>(zr.topRows(h));
        c.r.middleCols(o, n) = sigmoid<T>(zr.bottomRows(h));
        c.rh.middleCols(o, n) = c.r.middleCols(o, n).cwiseProduct(hp);
        Mat<T> cand = A.bottomRows(h);
        cand.noalias() += L.u.bottomRows(h) * c.rh.middleCols(o, n);
        c.n.middleCols(o, n) = cand.array().tanh().matrix();
        c.h.middleCols(o, n) = hp + c.z.middleCols(o, n).cwiseProduct(c.n.middleCols(o, n) - hp);
      }
      x = c.h;
    }

    heads_.resize(B);
    const auto& top = lc_.back().h;
    for (std::size_t k = 0; k < B; ++k) {
      auto& hd = heads_[k];
      const Eigen::Index len = lens_[k];
      hd.H.resize(top.rows(), len);
      for (Eigen::Index t = 0; t < len; ++t) hd.H.col(t) = top.col(off_[static_cast<std::size_t>(t)] + static_cast<Eigen::Index>(k));
      hd.last = hd.H.col(len - 1);
      hd.q.noalias() = p_.attn * hd.last;
      hd.alpha = softmax_vec<T>(hd.H.transpose() * hd.q);
      hd.ctx.noalias() = hd.H * hd.alpha;
      const Eigen::Index d = top.rows();
      hd.v.resize(2 * d);
      hd.v << hd.ctx, hd.last;
      const T mu = hd.v.mean();
      const T var = (hd.v.array() - mu).square().mean();
      hd.inv_sigma = T(1) / std::sqrt(var + T(kLayerNormEps));
      hd.vhat = ((hd.v.array() - mu) * hd.inv_sigma).matrix();
      hd.y = p_.ln_gain.cwiseProduct(hd.vhat) + p_.ln_bias;
      hd.a1.noalias() = p_.fc1 * hd.y;
      hd.a1 += p_.fc1_b;
      hd.mask = masks ? (*masks)[order_[k]] : Vec<T>::Ones(hd.a1.size());
      hd.h1 = hd.a1.cwiseMax(T(0)).cwiseProduct(hd.mask);
      Vec<T> o = p_.fc2 * hd.h1 + p_.fc2_b;
      const T m = o.maxCoeff();
      const T lse = m + std::log((o.array() - m).exp().sum());
      hd.logp = (o.array() - lse).matrix();
    }
  }

  /// Probabilities and attention in the caller's original order.
  Vec<T> log_probs(std::size_t original) const { return heads_[sorted_index(original)].logp; }
  const Vec<T>& attention(std::size_t original) const { return heads_[sorted_index(original)].alpha; }

  /// Mean NLL over the batch; accumulates gradients into `g` when given.
  T backward(const std::vector<int>& labels, GruParams<T>* g) {
    const std::size_t B = heads_.size();
    T loss = 0;
    for (std::size_t k = 0; k < B; ++k) loss -= heads_[k].logp(labels[order_[k]] - 1);
    loss /= static_cast<T>(B);
    if (!g) return loss;

    const auto& top = lc_.back().h;
    const Eigen::Index d = top.rows();
    Mat<T> dh = Mat<T>::Zero(d, total_);
    for (std::size_t k = 0; k < B; ++k) {
      const auto& hd = heads_[k];
      Vec<T> dout = hd.logp.array().exp().matrix();
      dout(labels[order_[k]] - 1) -= T(1);
      dout /= static_cast<T>(B);
      g->fc2.noalias() += dout * hd.h1.transpose();
      g->fc2_b += dout;
      Vec<T> da1 = (p_.fc2.transpose() * dout).cwiseProduct(hd.mask);
      for (Eigen::Index i = 0; i < da1.size(); ++i)
        if (hd.a1(i) <= T(0)) da1(i) = T(0);
      g->fc1.noalias() += da1 * hd.y.transpose();
      g->fc1_b += da1;
      const Vec<T> dy = p_.fc1.transpose() * da1;
      g->ln_gain += dy.cwiseProduct(hd.vhat);
      g->ln_bias += dy;
      const Vec<T> dvhat = dy.cwiseProduct(p_.ln_gain);
      const T m1 = dvhat.mean();
      const T m2 = dvhat.cwiseProduct(hd.vhat).mean();
      const Vec<T> dv = (hd.inv_sigma * (dvhat.array() - m1 - hd.vhat.array() * m2)).matrix();
      const Vec<T> dctx = dv.head(d);
      Vec<T> dlast = dv.tail(d);

      Mat<T> dH = dctx * hd.alpha.transpose();
      const Vec<T> dalpha = hd.H.transpose() * dctx;
      const Vec<T> du = hd.alpha.cwiseProduct((dalpha.array() - hd.alpha.dot(dalpha)).matrix());
      dH.noalias() += hd.q * du.transpose();
      const Vec<T> dq = hd.H * du;
      g->attn.noalias() += dq * hd.last.transpose();
      dlast.noalias() += p_.attn.transpose() * dq;
      dH.col(dH.cols() - 1) += dlast;
      for (Eigen::Index t = 0; t < dH.cols(); ++t) dh.col(off_[static_cast<std::size_t>(t)] + static_cast<Eigen::Index>(k)) += dH.col(t);
    }

    for (std::size_t li = p_.layers.size(); li-- > 0;) {
      const auto& L = p_.layers[li];
      auto& G = g->layers[li];
      const auto& c = lc_[li];
      const Eigen::Index h = L.u.cols();
      Mat<T> da(3 * h, total_);
      for (Eigen::Index t = steps_ - 1; t >= 0; --t) {
        const Eigen::Index n = nt_[static_cast<std::size_t>(t)], o = off_[static_cast<std::size_t>(t)];
        const auto z = c.z.middleCols(o, n);
        const auto r = c.r.middleCols(o, n);
        const auto nn = c.n.middleCols(o, n);
        const Mat<T> dht = dh.middleCols(o, n);
        Mat<T> hp = t > 0 ? Mat<T>(c.h.middleCols(off_[static_cast<std::size_t>(t - 1)], n)) : Mat<T>::Zero(h, n);
        auto daz = da.block(0, o, h, n);
        auto dar = da.block(h, o, h, n);
        auto dan = da.block(2 * h, o, h, n);
        dan = (dht.cwiseProduct(z).array() * (T(1) - nn.array().square())).matrix();
        daz = (dht.cwiseProduct(nn - hp).array() * z.array() * (T(1) - z.array())).matrix();
        if (t == 0) {
          dar.setZero();  // the reset gate only acts on h_{-1} = 0
          continue;
        }
        const Mat<T> drh = L.u.bottomRows(h).transpose() * dan;
        dar = (drh.cwiseProduct(hp).array() * r.array() * (T(1) - r.array())).matrix();
        G.u.bottomRows(h).noalias() += dan * c.rh.middleCols(o, n).transpose();
        G.u.topRows(2 * h).noalias() += da.block(0, o, 2 * h, n) * hp.transpose();
        Mat<T> dhp = dht.cwiseProduct((T(1) - z.array()).matrix()) + drh.cwiseProduct(r);
        dhp.noalias() += L.u.topRows(2 * h).transpose() * da.block(0, o, 2 * h, n);
        dh.middleCols(off_[static_cast<std::size_t>(t - 1)], n) += dhp;
      }
      G.wx.noalias() += da * c.x.transpose();
      G.b += da.rowwise().sum();
      if (li > 0) dh = L.wx.transpose() * da;
    }
    return loss;
  }

 private:
  struct LayerCache {
    Mat<T> x, a, z, r, n, rh, h;
  };
  struct Head {
    Mat<T> H;
    Vec<T> last, q, alpha, ctx, v, vhat, y, a1, mask, h1, logp;
    T inv_sigma = 0;
  };

  std::size_t sorted_index(std::size_t original) const {
    return static_cast<std::size_t>(std::find(order_.begin(), order_.end(), original) - order_.begin());
  }

  const GruParams<T>& p_;
  std::vector<std::size_t> order_;
  std::vector<Eigen::Index> lens_, nt_, off_;
  Eigen::Index steps_ = 0, total_ = 0;
  std::vector<LayerCache> lc_;
  std::vector<Head> heads_;
};

template <typename T>
Mat<T> to_input(const features::FeatureMatrix& m, const std::vector<float>& scale) {
  Mat<T> x(m.cols, m.rows);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) x(c, r) = static_cast<T>(m.at(r, c) * scale[static_cast<std::size_t>(c)]);
  return x;
}

}  // namespace

template <typename T>
Mat<T> gru_forward(const GruParams<T>& params, const Mat<T>& x) {
  if (x.cols() < 1) throw DataError("cannot run the GRU on an empty sequence");
  if (x.rows() != params.layers.front().wx.cols()) throw ShapeError("sequence width does not match the first GRU layer");
  Mat<T> in = x;
  for (const auto& L : params.layers) {
    const Eigen::Index h = L.u.cols();
    Mat<T> out(h, in.cols());
    Vec<T> hp = Vec<T>::Zero(h);
    for (Eigen::Index t = 0; t < in.cols(); ++t) {
      const Vec<T> a = L.wx * in.col(t) + L.b;
      const Vec<T> z = sigmoid<T>(a.head(h) + L.u.topRows(h) * hp);
      const Vec<T> r = sigmoid<T>(a.segment(h, h) + L.u.middleRows(h, h) * hp);
      const Vec<T> n = (a.tail(h) + L.u.bottomRows(h) * r.cwiseProduct(hp)).array().tanh().matrix();
      hp = hp + z.cwiseProduct(n - hp);
      out.col(t) = hp;
    }
    in = std::move(out);
  }
  return in;
}

template Mat<float> gru_forward(const GruParams<float>&, const Mat<float>&);
template Mat<double> gru_forward(const GruParams<double>&, const Mat<double>&);

template <typename T>
Attention<T> global_attention(const Mat<T>& hiddens, const Vec<T>& last, const Mat<T>& proj) {
  if (hiddens.cols() < 1) throw DataError("attention over an empty sequence");
  Attention<T> a;
  a.weights = softmax_vec<T>(hiddens.transpose() * (proj * last));
  a.context = hiddens * a.weights;
  return a;
}

template Attention<float> global_attention(const Mat<float>&, const Vec<float>&, const Mat<float>&);
template Attention<double> global_attention(const Mat<double>&, const Vec<double>&, const Mat<double>&);

std::vector<Prediction> forward_batch(const GruNetModel& model, const std::vector<const features::FeatureMatrix*>& batch) {
  if (batch.empty()) return {};
  std::vector<Mat<float>> xs;
  std::vector<const Mat<float>*> ptrs;
  xs.reserve(batch.size());
  for (const auto* m : batch) {
    if (m->cols != model.input_width)
      throw ShapeError("feature width " + std::to_string(m->cols) + " does not match model input width " +
                       std::to_string(model.input_width));
    xs.push_back(to_input<float>(*m, model.input_scale));
  }
  for (const auto& x : xs) ptrs.push_back(&x);
  Pass<float> pass(model.params);
  pass.forward(ptrs);
  std::vector<Prediction> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    // renormalize in double so the three probabilities sum to 1 tightly
    const Vec<float> lp = pass.log_probs(i);
    double s = 0;
    for (int c = 0; c < 3; ++c) s += out[i].probs[static_cast<std::size_t>(c)] = std::exp(static_cast<double>(lp(c)));
    for (double& p : out[i].probs) p /= s;
    const auto& a = pass.attention(i);
    out[i].attention.assign(a.data(), a.data() + a.size());
  }
  return out;
}

Prediction forward(const GruNetModel& model, const features::FeatureMatrix& m) { return forward_batch(model, {&m}).front(); }

template <typename T>
T loss_and_gradient(const GruParams<T>& params, const std::vector<Mat<T>>& inputs, const std::vector<int>& labels,
                    GruParams<T>* grad) {
  if (inputs.size() != labels.size() || inputs.empty()) throw DataError("inputs and labels must align and be nonempty");
  std::vector<const Mat<T>*> ptrs;
  for (const auto& x : inputs) ptrs.push_back(&x);
  Pass<T> pass(params);
  pass.forward(ptrs);
  return pass.backward(labels, grad);
}

template float loss_and_gradient(const GruParams<float>&, const std::vector<Mat<float>>&, const std::vector<int>&,
                                 GruParams<float>*);
template double loss_and_gradient(const GruParams<double>&, const std::vector<Mat<double>>&, const std::vector<int>&,
                                  GruParams<double>*);

double mean_nll(const GruNetModel& model, const std::vector<LabeledSequence>& corpus) {
  if (corpus.empty()) throw DataError("mean NLL of an empty corpus");
  double total = 0;
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, model.config.batch));
  for (std::size_t s = 0; s < corpus.size(); s += chunk) {
    std::vector<Mat<float>> xs;
    std::vector<int> ys;
    for (std::size_t i = s; i < std::min(corpus.size(), s + chunk); ++i) {
      xs.push_back(to_input<float>(*corpus[i].matrix, model.input_scale));
      ys.push_back(corpus[i].label);
    }
    total += static_cast<double>(loss_and_gradient<float>(model.params, xs, ys, nullptr)) * static_cast<double>(xs.size());
  }
  return total / static_cast<double>(corpus.size());
}

GruNetModel train_deepgru(const std::vector<LabeledSequence>& corpus, const GruNetConfig& config, TrainReport* report) {
  config.validate();
  if (corpus.empty()) throw DataError("cannot train on an empty corpus");
  const int width = corpus.front().matrix->cols;
  std::array<int, 3> per_class{};
  for (const auto& ex : corpus) {
    if (ex.label < 1 || ex.label > 3) throw LabelError("class label outside 1..3");
    if (ex.matrix->cols != width) throw ShapeError("training sequences differ in width");
    if (ex.matrix->rows < 1) throw DataError("training sequence with no onsets");
    ++per_class[static_cast<std::size_t>(ex.label - 1)];
  }
  for (int c = 0; c < 3; ++c)
    if (per_class[static_cast<std::size_t>(c)] == 0)
      throw DataError("training corpus has no example of class " + std::to_string(c + 1));

  auto model = init_model(config, width);
  std::vector<const features::FeatureMatrix*> mats;
  for (const auto& ex : corpus) mats.push_back(ex.matrix);
  model.input_scale = fit_input_scale(mats, width);
  std::vector<Mat<float>> xs;
  xs.reserve(corpus.size());
  for (const auto& ex : corpus) xs.push_back(to_input<float>(*ex.matrix, model.input_scale));
  if (report) report->initial_loss = mean_nll(model, corpus);

  auto shuffle_rng = SplitMix64::named(config.seed, "gru-shuffle");
  auto dropout_rng = SplitMix64::named(config.seed, "gru-dropout");
  auto grad = model.params.zeros_like();
  auto m1 = model.params.zeros_like(), m2 = model.params.zeros_like();
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long step = 0;
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  const auto keep = static_cast<float>(1.0 - config.dropout);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t s = 0, bi = 0; s < order.size(); s += static_cast<std::size_t>(config.batch), ++bi) {
      const std::size_t e = std::min(order.size(), s + static_cast<std::size_t>(config.batch));
      std::vector<const Mat<float>*> ptrs;
      std::vector<int> ys;
      std::vector<Vec<float>> masks;
      for (std::size_t i = s; i < e; ++i) {
        ptrs.push_back(&xs[order[i]]);
        ys.push_back(corpus[order[i]].label);
        Vec<float> mask = Vec<float>::Ones(config.fc_width);
        if (config.dropout > 0)
          for (Eigen::Index k = 0; k < mask.size(); ++k) mask(k) = dropout_rng.bernoulli(keep) ? 1.0f / keep : 0.0f;
        masks.push_back(std::move(mask));
      }
      for (auto b : grad.blocks()) std::fill(b.begin(), b.end(), 0.0f);
      Pass<float> pass(model.params);
      pass.forward(ptrs, &masks);
      const float loss = pass.backward(ys, &grad);
      if (!std::isfinite(loss))
        throw TrainingError("GRU training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                            std::to_string(bi + 1));
      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      auto P = model.params.blocks();
      auto Gb = grad.blocks();
      auto M = m1.blocks();
      auto V = m2.blocks();
      for (std::size_t k = 0; k < P.size(); ++k)
        for (std::size_t i = 0; i < P[k].size(); ++i) {
          const double gi = Gb[k][i];
          M[k][i] = static_cast<float>(b1 * M[k][i] + (1 - b1) * gi);
          V[k][i] = static_cast<float>(b2 * V[k][i] + (1 - b2) * gi * gi);
          const double mh = M[k][i] / c1, vh = V[k][i] / c2;
          P[k][i] -= static_cast<float>(config.lr * mh / (std::sqrt(vh) + eps));
        }
    }
    if (report) report->epoch_loss.push_back(mean_nll(model, corpus));
  }
  return model;
}

GradientCheck gradient_check(const GruParams<double>& params, const std::vector<Mat<double>>& inputs,
                             const std::vector<int>& labels, double step) {
  auto grad = params.zeros_like();
  loss_and_gradient<double>(params, inputs, labels, &grad);
  GradientCheck out;
  auto probe = params;
  auto P = probe.blocks();
  const auto G = grad.blocks();
  for (std::size_t k = 0; k < P.size(); ++k)
    for (std::size_t i = 0; i < P[k].size(); ++i) {
      const double saved = P[k][i];
      P[k][i] = saved + step;
      const double up = loss_and_gradient<double>(probe, inputs, labels, nullptr);
      P[k][i] = saved - step;
      const double dn = loss_and_gradient<double>(probe, inputs, labels, nullptr);
      P[k][i] = saved;
      const double num = (up - dn) / (2 * step);
      const double ana = G[k][i];
      const double scale = std::max({std::abs(num), std::abs(ana), 1e-6});
      out.max_relative_error = std::max(out.max_relative_error, std::abs(num - ana) / scale);
      ++out.parameters;
    }
  return out;
}

// --- serialization -----------------------------------------------------------------

namespace {

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

}  // namespace

std::string GruNetModel::to_binary() const {
  nlohmann::ordered_json header;
  header["format"] = "pdiff-deepgru";
  header["input_width"] = input_width;
  header["config"] = config.to_json();
  auto sizes = nlohmann::ordered_json::array();
  for (const auto& b : params.blocks()) sizes.push_back(b.size());
  header["block_sizes"] = sizes;
  if (!metadata.is_null()) header["metadata"] = metadata;
  const std::string h = header.dump();
  std::string out = "PDGR";
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  for (float f : input_scale) put_u32(out, std::bit_cast<std::uint32_t>(f));
  for (const auto& b : params.blocks())
    for (float f : b) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

GruNetModel GruNetModel::from_binary(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "PDGR") throw FormatError("not a DeepGRU model file");
  if (get_u32(bytes, 4) != 1) throw FormatError("unsupported DeepGRU model version");
  const std::uint32_t hlen = get_u32(bytes, 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw FormatError("truncated DeepGRU model header");
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(bytes.substr(12, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("DeepGRU model header: ") + e.what());
  }
  auto model = init_model(GruNetConfig::from_json(header.at("config")), header.at("input_width").get<int>());
  if (header.contains("metadata")) model.metadata = header.at("metadata");
  auto blocks = model.params.blocks();
  const auto sizes = header.at("block_sizes");
  if (sizes.size() != blocks.size()) throw FormatError("DeepGRU block count does not match its config");
  std::size_t at = 12 + hlen;
  if (bytes.size() < at + 4 * model.input_scale.size()) throw FormatError("truncated DeepGRU input scale");
  for (float& f : model.input_scale) {
    f = std::bit_cast<float>(get_u32(bytes, at));
    at += 4;
  }
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (sizes[k].get<std::size_t>() != blocks[k].size()) throw FormatError("DeepGRU block shape does not match its config");
    if (bytes.size() < at + 4 * blocks[k].size()) throw FormatError("truncated DeepGRU parameters");
    for (float& f : blocks[k]) {
      f = std::bit_cast<float>(get_u32(bytes, at));
      at += 4;
    }
  }
  if (at != bytes.size()) throw FormatError("trailing bytes after DeepGRU parameters");
  return model;
}

}  // namespace pdiff::gru

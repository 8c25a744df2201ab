#pragma once

// Classification and metric heads: linear / cosine classifier heads for the
// whole-classification stage, and the nearest-centroid scorer (cosine or
// squared Euclidean) with a learnable temperature for episodic use.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fsmb/encoder.hpp"
#include "fsmb/episodes.hpp"
#include "fsmb/errors.hpp"
#include "fsmb/tensor.hpp"

namespace fsmb {

enum class Metric { cosine, sq_euclidean };

inline const char* metric_name(Metric m) {
  return m == Metric::cosine ? "cosine" : "sq_euclidean";
}

inline Metric metric_from_name(const std::string& s) {
  if (s == "cosine") return Metric::cosine;
  if (s == "sq_euclidean" || s == "euclidean" || s == "sqeuc") return Metric::sq_euclidean;
  throw ConfigError("unknown metric '" + s + "' (expected cosine or sq_euclidean)");
}

// Temperature init values: 10 for cosine, 0.1 for squared Euclidean.
inline constexpr float kCosineTauInit = 10.0f;
inline constexpr float kSqEuclideanTauInit = 0.1f;
// Lower clamp applied after every optimizer step; keeps tau positive.
inline constexpr float kTauFloor = 1e-4f;
// Added to norms under the cosine metric so zero embeddings stay finite.
inline constexpr double kNormEpsilon = 1e-12;

template <class S>
struct MetricConfigT {
  Metric metric = Metric::cosine;
  TensorT<S> tau;  // single-element, learnable during meta-training
  S tau_init = S(kCosineTauInit);
};

template <class S>
MetricConfigT<S> make_metric_config(Metric metric, std::optional<S> tau_init = std::nullopt) {
  MetricConfigT<S> cfg;
  cfg.metric = metric;
  cfg.tau_init =
      tau_init.value_or(metric == Metric::cosine ? S(kCosineTauInit) : S(kSqEuclideanTauInit));
  cfg.tau = TensorT<S>::scalar(cfg.tau_init).set_requires_grad(true);
  return cfg;
}

// Fixed-temperature config for evaluation (tau = 1 reproduces the unscaled
// probability form; accuracy is tau-independent either way).
template <class S>
MetricConfigT<S> fixed_metric_config(Metric metric, S tau_value) {
  MetricConfigT<S> cfg;
  cfg.metric = metric;
  cfg.tau_init = tau_value;
  cfg.tau = TensorT<S>::scalar(tau_value);
  return cfg;
}

// Rows scaled to unit norm: y_i = x_i / (||x_i|| + eps).
template <class S>
TensorT<S> normalize_rows(const TensorT<S>& x, S eps = S(kNormEpsilon)) {
  const std::size_t m = x.rows(), d = x.cols();
  const auto& xv = x.values();
  std::vector<S> out(m * d);
  std::vector<S> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    S sq = S(0);
    for (std::size_t k = 0; k < d; ++k) sq += xv[i * d + k] * xv[i * d + k];
    norms[i] = std::sqrt(sq);
    const S denom = norms[i] + eps;
    for (std::size_t k = 0; k < d; ++k) out[i * d + k] = xv[i * d + k] / denom;
  }
  std::vector<S> x_saved = xv;
  return make_op<S>(
      {m, d}, std::move(out), {x},
      [m, d, eps, norms = std::move(norms), x_saved = std::move(x_saved)](
          const std::vector<S>& g, const std::vector<std::vector<S>*>& parents) {
        auto& gx = *parents[0];
        for (std::size_t i = 0; i < m; ++i) {
          const S denom = norms[i] + eps;
          S dot = S(0);
          for (std::size_t k = 0; k < d; ++k) dot += g[i * d + k] * x_saved[i * d + k];
          const S n_safe = std::max(norms[i], S(1e-30));
          const S coef = dot / (denom * denom * n_safe);
          for (std::size_t k = 0; k < d; ++k) {
            gx[i * d + k] += g[i * d + k] / denom - coef * x_saved[i * d + k];
          }
        }
      });
}

// D[m, n] = ||q_m - w_n||^2.
template <class S>
TensorT<S> pairwise_sqdist(const TensorT<S>& q, const TensorT<S>& w) {
  if (q.cols() != w.cols()) {
    throw DimensionError("pairwise_sqdist: width mismatch " + shape_str(q.shape()) + " vs " +
                         shape_str(w.shape()));
  }
  const std::size_t m = q.rows(), n = w.rows(), d = q.cols();
  const auto& qv = q.values();
  const auto& wv = w.values();
  std::vector<S> out(m * n, S(0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      S acc = S(0);
      for (std::size_t k = 0; k < d; ++k) {
        const S diff = qv[i * d + k] - wv[j * d + k];
        acc += diff * diff;
      }
      out[i * n + j] = acc;
    }
  }
  std::vector<S> q_saved = qv, w_saved = wv;
  return make_op<S>(
      {m, n}, std::move(out), {q, w},
      [m, n, d, q_saved = std::move(q_saved), w_saved = std::move(w_saved)](
          const std::vector<S>& g, const std::vector<std::vector<S>*>& parents) {
        auto& gq = *parents[0];
        auto& gw = *parents[1];
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const S gij = g[i * n + j];
            for (std::size_t k = 0; k < d; ++k) {
              const S diff = q_saved[i * d + k] - w_saved[j * d + k];
              gq[i * d + k] += gij * S(2) * diff;
              gw[j * d + k] -= gij * S(2) * diff;
            }
          }
        }
      });
}

// Per-class mean of support embeddings; labels are within-task, [0, n_way).
template <class S>
TensorT<S> centroids(const TensorT<S>& support_embeddings, const std::vector<std::int32_t>& labels,
                     int n_way) {
  const std::size_t rows = support_embeddings.rows(), d = support_embeddings.cols();
  if (labels.size() != rows) {
    throw DimensionError("centroids: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " embeddings");
  }
  std::vector<std::uint32_t> counts(n_way, 0);
  for (std::int32_t y : labels) {
    if (y < 0 || y >= n_way) throw IndexError("centroid label " + std::to_string(y));
    ++counts[y];
  }
  for (int c = 0; c < n_way; ++c) {
    if (counts[c] == 0) throw ContractError("centroids: class " + std::to_string(c) + " is empty");
  }

  const auto& ev = support_embeddings.values();
  std::vector<S> out(static_cast<std::size_t>(n_way) * d, S(0));
  for (std::size_t i = 0; i < rows; ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    for (std::size_t k = 0; k < d; ++k) out[c * d + k] += ev[i * d + k];
  }
  for (int c = 0; c < n_way; ++c) {
    for (std::size_t k = 0; k < d; ++k) out[c * d + k] /= S(counts[c]);
  }

  return make_op<S>(
      {static_cast<std::size_t>(n_way), d}, std::move(out), {support_embeddings},
      [d, labels, counts](const std::vector<S>& g, const std::vector<std::vector<S>*>& parents) {
        auto& gs = *parents[0];
        for (std::size_t i = 0; i < labels.size(); ++i) {
          const auto c = static_cast<std::size_t>(labels[i]);
          for (std::size_t k = 0; k < d; ++k) {
            gs[i * d + k] += g[c * d + k] / S(counts[c]);
          }
        }
      });
}

// Metric logits for queries against centroids. cosine: tau * <q, w>;
// squared Euclidean: -tau * ||q - w||^2. Softmax over the class axis turns
// either into class probabilities.
template <class S>
TensorT<S> score(const TensorT<S>& query_embeddings, const TensorT<S>& class_centroids,
                 const MetricConfigT<S>& cfg) {
  if (query_embeddings.cols() != class_centroids.cols()) {
    throw DimensionError("score: embedding width " + shape_str(query_embeddings.shape()) +
                         " vs centroids " + shape_str(class_centroids.shape()));
  }
  if (cfg.metric == Metric::cosine) {
    auto sims = matmul(normalize_rows(query_embeddings), transpose(normalize_rows(class_centroids)));
    return mul(sims, cfg.tau);
  }
  return mul(neg(pairwise_sqdist(query_embeddings, class_centroids)), cfg.tau);
}

template <class S>
struct EpisodeForwardT {
  TensorT<S> loss;
  TensorT<S> logits;
  std::size_t query_correct = 0;
  std::size_t query_total = 0;
};

// One episodic pass: encode support and query in a single forward pass,
// build centroids from support, score the queries, cross-entropy on the
// query labels. Gradient reaches the encoder parameters and tau.
template <class S>
EpisodeForwardT<S> episode_forward(const EpisodeT<S>& ep, const EncoderT<S>& encoder,
                                   const MetricConfigT<S>& cfg) {
  const std::size_t nk = ep.support.rows(), nq = ep.query.rows(), dim = ep.support.cols();
  std::vector<S> combined;
  combined.reserve((nk + nq) * dim);
  combined.insert(combined.end(), ep.support.values().begin(), ep.support.values().end());
  combined.insert(combined.end(), ep.query.values().begin(), ep.query.values().end());
  TensorT<S> batch = TensorT<S>::from_values({nk + nq, dim}, std::move(combined));

  TensorT<S> embeddings = encoder.forward(batch);
  TensorT<S> support_emb = slice_rows(embeddings, 0, nk);
  TensorT<S> query_emb = slice_rows(embeddings, nk, nk + nq);
  TensorT<S> cents = centroids(support_emb, ep.support_labels, ep.n_way);

  EpisodeForwardT<S> out;
  out.logits = score(query_emb, cents, cfg);
  out.loss = softmax_cross_entropy(out.logits, ep.query_labels);
  const auto pred = argmax_rows(out.logits);
  out.query_total = pred.size();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == ep.query_labels[i]) ++out.query_correct;
  }
  return out;
}

template <class S>
TensorT<S> episode_loss(const EpisodeT<S>& ep, const EncoderT<S>& encoder,
                        const MetricConfigT<S>& cfg) {
  return episode_forward(ep, encoder, cfg).loss;
}

// ---------------------------------------------------------------------------
// whole-classification heads
// ---------------------------------------------------------------------------

template <class S>
struct LinearHeadT {
  TensorT<S> weight;  // [num_classes x embed_dim]
  TensorT<S> bias;    // [num_classes]

  TensorT<S> logits(const TensorT<S>& embeddings) const {
    return linear(embeddings, weight, bias);
  }
  std::vector<TensorT<S>*> parameters() { return {&weight, &bias}; }
  LinearHeadT clone() const {
    return {TensorT<S>::from_values(weight.shape(), weight.values())
                .set_requires_grad(weight.requires_grad()),
            TensorT<S>::from_values(bias.shape(), bias.values())
                .set_requires_grad(bias.requires_grad())};
  }
};

template <class S>
struct CosineHeadT {
  TensorT<S> weight;   // [num_classes x embed_dim]
  TensorT<S> tau_cls;  // learnable scale on the cosine logits

  TensorT<S> logits(const TensorT<S>& embeddings) const {
    auto sims = matmul(normalize_rows(embeddings), transpose(normalize_rows(weight)));
    return mul(sims, tau_cls);
  }
  std::vector<TensorT<S>*> parameters() { return {&weight, &tau_cls}; }
  CosineHeadT clone() const {
    return {TensorT<S>::from_values(weight.shape(), weight.values())
                .set_requires_grad(weight.requires_grad()),
            TensorT<S>::from_values(tau_cls.shape(), tau_cls.values())
                .set_requires_grad(tau_cls.requires_grad())};
  }
};

template <class S>
using ClassifierHeadT = std::variant<LinearHeadT<S>, CosineHeadT<S>>;

template <class S>
TensorT<S> classifier_logits(const ClassifierHeadT<S>& head, const TensorT<S>& embeddings) {
  return std::visit([&](const auto& h) { return h.logits(embeddings); }, head);
}

template <class S>
std::vector<TensorT<S>*> head_parameters(ClassifierHeadT<S>& head) {
  return std::visit([](auto& h) { return h.parameters(); }, head);
}

template <class S>
ClassifierHeadT<S> clone_head(const ClassifierHeadT<S>& head) {
  return std::visit([](const auto& h) -> ClassifierHeadT<S> { return h.clone(); }, head);
}

template <class S>
LinearHeadT<S> init_linear_head(std::uint32_t num_classes, std::uint32_t embed_dim,
                                std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "head-init");
  const double s = std::sqrt(6.0 / static_cast<double>(embed_dim + num_classes));
  std::vector<S> w(static_cast<std::size_t>(num_classes) * embed_dim);
  for (auto& x : w) x = static_cast<S>((2.0 * rng.next_double() - 1.0) * s);
  LinearHeadT<S> head;
  head.weight =
      TensorT<S>::from_values({num_classes, embed_dim}, std::move(w)).set_requires_grad(true);
  head.bias = TensorT<S>::zeros({num_classes}).set_requires_grad(true);
  return head;
}

template <class S>
CosineHeadT<S> init_cosine_head(std::uint32_t num_classes, std::uint32_t embed_dim,
                                std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "head-init");
  const double s = std::sqrt(6.0 / static_cast<double>(embed_dim + num_classes));
  std::vector<S> w(static_cast<std::size_t>(num_classes) * embed_dim);
  for (auto& x : w) x = static_cast<S>((2.0 * rng.next_double() - 1.0) * s);
  CosineHeadT<S> head;
  head.weight =
      TensorT<S>::from_values({num_classes, embed_dim}, std::move(w)).set_requires_grad(true);
  head.tau_cls = TensorT<S>::scalar(S(kCosineTauInit)).set_requires_grad(true);
  return head;
}

using MetricConfig = MetricConfigT<float>;
using LinearHead = LinearHeadT<float>;
using CosineHead = CosineHeadT<float>;
using ClassifierHead = ClassifierHeadT<float>;

}  // namespace fsmb

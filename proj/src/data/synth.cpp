// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mgrr/data.hpp"
#include "mgrr/error.hpp"

namespace mgrr::data {

namespace {

constexpr std::size_t kMaxEnumeratedAus = 20;

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x6d677272u};
  return std::mt19937_64(seq);
}

// Per-AU conditional: parent index (or -1) and on/off probabilities.
struct ChainNode {
  long parent = -1;
  double p_on = 0.0;   // P(a=1 | parent=1), or the marginal when unlinked
  double p_off = 0.0;  // P(a=1 | parent=0)
};

std::vector<ChainNode> build_chain(const SynthSpec& spec) {
  const auto q = spec.resolved_marginals();
  std::vector<ChainNode> chain(spec.aus);
  for (std::size_t i = 0; i < spec.aus; ++i) chain[i].p_on = chain[i].p_off = q[i];
  for (const auto& link : spec.links) {
    chain[link.child].parent = static_cast<long>(link.parent);
    chain[link.child].p_on = link.p_given_parent;
    chain[link.child].p_off = spec.off_conditional(link);
  }
  return chain;
}

std::vector<std::uint8_t> draw_labels(const std::vector<ChainNode>& chain, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> a(chain.size());
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const auto& node = chain[i];
    const double p = node.parent < 0 ? node.p_on : (a[node.parent] ? node.p_on : node.p_off);
    a[i] = u(rng) < p ? 1 : 0;
  }
  return a;
}

struct PairStats {
  std::vector<double> marg;  // P(a_i = 1)
  std::vector<double> j11;   // P(a_i = 1, a_j = 1)
  std::vector<double> j00;   // P(a_i = 0, a_j = 0)
};

PairStats enumerate_pairs(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.aus;
  if (n > kMaxEnumeratedAus) throw SpecError("planted statistics enumerate 2^n states; n must be <= 20");
  const auto chain = build_chain(spec);
  PairStats st{std::vector<double>(n, 0.0), std::vector<double>(n * n, 0.0), std::vector<double>(n * n, 0.0)};
  std::vector<std::uint8_t> a(n);
  for (std::uint64_t state = 0; state < (std::uint64_t{1} << n); ++state) {
    double prob = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = (state >> i) & 1u;
      const auto& node = chain[i];
      const double p = node.parent < 0 ? node.p_on : (a[node.parent] ? node.p_on : node.p_off);
      prob *= a[i] ? p : 1.0 - p;
    }
    if (prob == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      st.marg[i] += a[i] * prob;
      for (std::size_t j = 0; j < n; ++j) {
        if (a[i] && a[j]) st.j11[i * n + j] += prob;
        if (!a[i] && !a[j]) st.j00[i * n + j] += prob;
      }
    }
  }
  return st;
}

}  // namespace

std::vector<double> SynthSpec::resolved_marginals() const {
  return marginals.empty() ? std::vector<double>(aus, 0.3) : marginals;
}

std::vector<std::vector<std::size_t>> SynthSpec::resolved_anchors() const {
  return au_anchors.empty() ? default_anchors(aus, landmarks) : au_anchors;
}

double SynthSpec::off_conditional(const Link& link) const {
  const auto q = resolved_marginals();
  const double qc = q[link.child], qp = q[link.parent];
  double off = (qc - link.p_given_parent * qp) / (1.0 - qp);
  if (std::abs(off) < 1e-12) off = 0.0;
  if (std::abs(off - 1.0) < 1e-12) off = 1.0;
  return off;
}

void SynthSpec::validate() const {
  if (aus < 2) throw SpecError("synthetic spec: need at least 2 AUs");
  if (landmarks < 3) throw SpecError("synthetic spec: need at least 3 landmarks");
  if (image_size < 8) throw SpecError("synthetic spec: image_size must be >= 8");
  if (image_channels == 0) throw SpecError("synthetic spec: image_channels must be positive");
  if (sample_count == 0) throw SpecError("synthetic spec: sample_count must be positive");
  if (landmark_jitter < 0 || blob_sigma <= 0 || noise_level < 0) {
    throw SpecError("synthetic spec: jitter/noise must be non-negative and blob_sigma positive");
  }
  const auto q = resolved_marginals();
  if (q.size() != aus) throw SpecError("synthetic spec: marginals must list one value per AU");
  for (double v : q)
    if (!(v > 0.0 && v < 1.0)) throw SpecError("synthetic spec: marginals must lie strictly inside (0, 1)");
  std::vector<bool> linked(aus, false);
  for (const auto& l : links) {
    if (l.child >= aus || l.parent >= l.child) {
      throw SpecError("synthetic spec: link " + std::to_string(l.child) + "<-" + std::to_string(l.parent) +
                      " must point to an earlier AU");
    }
    if (linked[l.child]) throw SpecError("synthetic spec: AU " + std::to_string(l.child) + " has two parents");
    linked[l.child] = true;
    if (!(l.p_given_parent >= 0.0 && l.p_given_parent <= 1.0)) {
      throw SpecError("synthetic spec: conditional probability outside [0, 1]");
    }
    const double off = off_conditional(l);
    if (off < 0.0 || off > 1.0) {
      throw SpecError("synthetic spec: P(AU" + std::to_string(l.child) + "|AU" + std::to_string(l.parent) +
                      ")=" + std::to_string(l.p_given_parent) + " is inconsistent with the marginals");
    }
  }
  for (const auto& a : resolved_anchors()) {
    if (a.empty()) throw SpecError("synthetic spec: AU without anchors");
    for (auto idx : a)
      if (idx >= landmarks) throw SpecError("synthetic spec: anchor index out of range");
  }
  if (resolved_anchors().size() != aus) throw SpecError("synthetic spec: au_anchors must list one entry per AU");
}

std::vector<double> template_landmarks(std::size_t landmarks, std::size_t image_size) {
  const double S = static_cast<double>(image_size);
  std::vector<double> out(2 * landmarks);
  out[0] = 0.3 * S;
  out[1] = 0.38 * S;
  out[2] = 0.7 * S;
  out[3] = 0.38 * S;
  // Remaining points on a sunflower spiral inside the lower face.
  const std::size_t rest = landmarks - 2;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t k = 0; k < rest; ++k) {
    const double r = 0.32 * S * std::sqrt((static_cast<double>(k) + 0.5) / static_cast<double>(rest));
    const double theta = static_cast<double>(k) * golden;
    out[2 * (k + 2)] = 0.5 * S + r * std::cos(theta);
    out[2 * (k + 2) + 1] = 0.56 * S + 0.9 * r * std::sin(theta);
  }
  return out;
}

Tensor planted_cooccurrence(const SynthSpec& spec) {
  const auto st = enumerate_pairs(spec);
  const std::size_t n = spec.aus;
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = st.j11[i * n + j] / st.marg[j];
  return out;
}

PriorMatrix planted_prior(const SynthSpec& spec) {
  const auto st = enumerate_pairs(spec);
  const std::size_t n = spec.aus;
  PriorMatrix prior;
  prior.n = n;
  prior.p_cond = Tensor({n, n});
  prior.a_init = Tensor({n, n});
  prior.occurrence = st.marg;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double p = i == j ? 1.0
                              : 0.5 * (st.j11[i * n + j] / st.marg[j] + st.j00[i * n + j] / (1.0 - st.marg[j]));
      prior.p_cond.at(i, j) = p;
      prior.a_init.at(i, j) = adjacency_from_agreement(p);
    }
  return prior;
}

LabelMatrix sample_labels(const SynthSpec& spec, std::size_t count, std::uint64_t seed) {
  spec.validate();
  const auto chain = build_chain(spec);
  LabelMatrix labels;
  labels.aus = spec.aus;
  labels.samples = count;
  labels.values.reserve(count * spec.aus);
  for (std::size_t s = 0; s < count; ++s) {
    auto rng = sample_rng(seed, s);
    const auto a = draw_labels(chain, rng);
    labels.values.insert(labels.values.end(), a.begin(), a.end());
    labels.sample_ids.push_back(std::to_string(s));
  }
  return labels;
}

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  const auto chain = build_chain(spec);
  const auto anchors = spec.resolved_anchors();
  const auto base_landmarks = template_landmarks(spec.landmarks, spec.image_size);
  const std::size_t S = spec.image_size;
  const double Sd = static_cast<double>(S);

  // Base template: uniform oval, identical for every sample.
  Tensor base({spec.image_channels, S, S});
  for (std::size_t ch = 0; ch < spec.image_channels; ++ch)
    for (std::size_t y = 0; y < S; ++y)
      for (std::size_t x = 0; x < S; ++x) {
        const double dx = (static_cast<double>(x) + 0.5 - 0.5 * Sd) / (0.4 * Sd);
        const double dy = (static_cast<double>(y) + 0.5 - 0.55 * Sd) / (0.47 * Sd);
        base.at(ch, y, x) = dx * dx + dy * dy <= 1.0 ? spec.base_level : 0.0;
      }

  Dataset ds;
  ds.aus = spec.aus;
  ds.landmarks = spec.landmarks;
  ds.image_size = S;
  ds.image_channels = spec.image_channels;
  ds.samples.reserve(spec.sample_count);
  const double inv2s2 = 1.0 / (2.0 * spec.blob_sigma * spec.blob_sigma);
  const long reach = static_cast<long>(std::ceil(3.0 * spec.blob_sigma));
  for (std::size_t s = 0; s < spec.sample_count; ++s) {
    auto rng = sample_rng(spec.seed, s);
    SampleRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "s%06zu", s);
    rec.id = id;
    rec.labels = draw_labels(chain, rng);

    std::normal_distribution<double> jitter(0.0, 1.0);
    rec.landmarks = base_landmarks;
    for (auto& v : rec.landmarks) v = std::clamp(v + spec.landmark_jitter * jitter(rng), 0.0, Sd - 1.0);
    const double ex = rec.landmarks[2] - rec.landmarks[0], ey = rec.landmarks[3] - rec.landmarks[1];
    rec.inter_ocular = std::sqrt(ex * ex + ey * ey);

    rec.image = base;
    for (std::size_t au = 0; au < spec.aus; ++au) {
      if (!rec.labels[au] || spec.blob_amplitude == 0.0) continue;
      for (auto idx : anchors[au]) {
        const double cx = rec.landmarks[2 * idx], cy = rec.landmarks[2 * idx + 1];
        const long x0 = static_cast<long>(cx), y0 = static_cast<long>(cy);
        for (long y = std::max(0L, y0 - reach); y <= std::min<long>(S - 1, y0 + reach); ++y)
          for (long x = std::max(0L, x0 - reach); x <= std::min<long>(S - 1, x0 + reach); ++x) {
            const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
            const double g = spec.blob_amplitude * std::exp(-(dx * dx + dy * dy) * inv2s2);
            for (std::size_t ch = 0; ch < spec.image_channels; ++ch) rec.image.at(ch, y, x) += g;
          }
      }
    }
    if (spec.noise_level > 0.0) {
      std::normal_distribution<double> noise(0.0, spec.noise_level);
      for (auto& v : rec.image.storage()) v += noise(rng);
    }
    ds.samples.push_back(std::move(rec));
  }
  return ds;
}

LabelMatrix Dataset::labels() const {
  LabelMatrix lm;
  lm.aus = aus;
  lm.samples = samples.size();
  for (const auto& s : samples) {
    lm.sample_ids.push_back(s.id);
    lm.values.insert(lm.values.end(), s.labels.begin(), s.labels.end());
  }
  return lm;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.aus = aus;
  out.landmarks = landmarks;
  out.image_size = image_size;
  out.image_channels = image_channels;
  out.samples.reserve(indices.size());
  for (auto i : indices) out.samples.push_back(samples.at(i));
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count, double test_fraction,
                                                                          std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction >= 1.0) throw InputError("test fraction must lie in [0, 1)");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
  // Fisher-Yates with an explicit draw so the permutation is library-independent.
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(count)));
  std::vector<std::size_t> test(order.begin(), order.begin() + n_test);
  std::vector<std::size_t> train(order.begin() + n_test, order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {train, test};
}

}  // namespace mgrr::data

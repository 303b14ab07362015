#include "otmask/losses.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <tuple>

#include "otmask/errors.hpp"
#include "otmask/grid_graph.hpp"

namespace otmask {

namespace {

void require_semantic_shape(const SemanticMap& semantic) {
  if (semantic.height <= 0 || semantic.width <= 0 || semantic.channels < 1 ||
      semantic.values.size() != semantic.pixel_count() * semantic.channels) {
    throw ShapeError("semantic map payload does not match its shape");
  }
}

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// Tree with parent pointers in BFS order from vertex 0.
struct RootedTree {
  std::vector<PixelIndex> order;
  std::vector<PixelIndex> parent;
  std::vector<double> parent_similarity;
};

std::vector<std::vector<std::pair<PixelIndex, double>>> tree_adjacency(const SpanningTree& tree,
                                                                       double theta2) {
  std::vector<std::vector<std::pair<PixelIndex, double>>> adj(tree.vertex_count);
  for (const auto& e : tree.edges) {
    const double s = std::exp(-e.weight / theta2);
    adj[e.a].emplace_back(e.b, s);
    adj[e.b].emplace_back(e.a, s);
  }
  return adj;
}

RootedTree root_tree(const SpanningTree& tree, double theta2) {
  const std::size_t n = tree.vertex_count;
  if (tree.edges.size() + 1 != n) throw ValidationError("spanning tree must have n-1 edges");
  const auto adj = tree_adjacency(tree, theta2);
  RootedTree rooted{{}, std::vector<PixelIndex>(n, 0), std::vector<double>(n, 0.0)};
  std::vector<char> seen(n, 0);
  rooted.order.reserve(n);
  rooted.order.push_back(0);
  seen[0] = 1;
  for (std::size_t head = 0; head < rooted.order.size(); ++head) {
    const PixelIndex k = rooted.order[head];
    for (const auto& [l, s] : adj[k]) {
      if (seen[l]) continue;
      seen[l] = 1;
      rooted.parent[l] = k;
      rooted.parent_similarity[l] = s;
      rooted.order.push_back(l);
    }
  }
  if (rooted.order.size() != n) throw ValidationError("spanning tree is not connected");
  return rooted;
}

// out_k = sum_j S_kj g_j, two passes over the rooted tree.
std::vector<double> tree_aggregate(const RootedTree& tree, std::span<const double> g) {
  const std::size_t n = g.size();
  std::vector<double> up(g.begin(), g.end());
  for (std::size_t r = n; r-- > 1;) {
    const PixelIndex k = tree.order[r];
    up[tree.parent[k]] += tree.parent_similarity[k] * up[k];
  }
  std::vector<double> agg(n);
  agg[tree.order[0]] = up[tree.order[0]];
  for (std::size_t r = 1; r < n; ++r) {
    const PixelIndex k = tree.order[r];
    const double s = tree.parent_similarity[k];
    agg[k] = up[k] + s * (agg[tree.parent[k]] - s * up[k]);
  }
  return agg;
}

// Dense S_ij from per-source walks over the tree using summed path weights.
std::vector<double> naive_similarity(const SpanningTree& tree, double theta2) {
  const std::size_t n = tree.vertex_count;
  std::vector<std::vector<std::pair<PixelIndex, double>>> adj(n);
  for (const auto& e : tree.edges) {
    adj[e.a].emplace_back(e.b, e.weight);
    adj[e.b].emplace_back(e.a, e.weight);
  }
  std::vector<double> sim(n * n, 0.0);
  std::vector<double> dist(n);
  std::vector<char> seen(n);
  std::vector<PixelIndex> stack;
  for (PixelIndex i = 0; i < n; ++i) {
    std::fill(seen.begin(), seen.end(), 0);
    dist[i] = 0.0;
    seen[i] = 1;
    stack.assign(1, i);
    while (!stack.empty()) {
      const PixelIndex k = stack.back();
      stack.pop_back();
      for (const auto& [l, w] : adj[k]) {
        if (seen[l]) continue;
        seen[l] = 1;
        dist[l] = dist[k] + w;
        stack.push_back(l);
      }
    }
    for (PixelIndex j = 0; j < n; ++j) sim[i * n + j] = std::exp(-dist[j] / theta2);
  }
  return sim;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

LossValue partial_cross_entropy(const SemanticMap& semantic,
                                std::span<const PointAnnotation> points) {
  require_semantic_shape(semantic);
  validate_points(points, semantic.height, semantic.width, semantic.channels);
  LossValue out{0.0, std::vector<double>(semantic.values.size(), 0.0)};
  const double inv = 1.0 / static_cast<double>(points.size());
  for (const auto& p : points) {
    const std::size_t idx = p.pixel(semantic.width) * semantic.channels + p.class_id;
    const double prob = semantic.values[idx];
    if (prob > kProbabilityFloor) {
      out.value -= inv * std::log(prob);
      out.gradient[idx] -= inv / prob;
    } else {
      out.value -= inv * std::log(kProbabilityFloor);
    }
  }
  return out;
}

std::array<double, 3> srgb_to_lab(const std::array<double, 3>& rgb) {
  const double r = srgb_to_linear(rgb[0]);
  const double g = srgb_to_linear(rgb[1]);
  const double b = srgb_to_linear(rgb[2]);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / 0.95047);
  const double fy = lab_f(y / 1.0);
  const double fz = lab_f(z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LossValue lab_affinity_loss(const SemanticMap& semantic, const RgbImage& image,
                            const LossConfig& config) {
  require_semantic_shape(semantic);
  if (image.height != semantic.height || image.width != semantic.width) {
    throw ShapeError("image and semantic map have different shapes");
  }
  const std::size_t n = semantic.pixel_count();
  const int channels = semantic.channels;
  std::vector<std::array<double, 3>> lab(n);
  for (PixelIndex p = 0; p < n; ++p) {
    lab[p] = srgb_to_lab({image.at(p, 0), image.at(p, 1), image.at(p, 2)});
  }

  const EdgeWeightField grid(semantic.height, semantic.width);
  struct Pair {
    PixelIndex i;
    PixelIndex j;
  };
  std::vector<Pair> pairs;
  for (PixelIndex i = 0; i < n; ++i) {
    for (int d = 0; d < 8; ++d) {
      const auto j = grid.neighbor(i, d);
      if (!j) continue;
      const double dl = lab[i][0] - lab[*j][0];
      const double da = lab[i][1] - lab[*j][1];
      const double db = lab[i][2] - lab[*j][2];
      const double similarity = std::exp(-std::sqrt(dl * dl + da * da + db * db) / config.theta1);
      if (similarity >= config.tau) pairs.push_back({i, *j});
    }
  }

  LossValue out{0.0, std::vector<double>(semantic.values.size(), 0.0)};
  if (pairs.empty()) return out;
  const double inv = 1.0 / static_cast<double>(pairs.size());
  for (const auto& [i, j] : pairs) {
    const auto pi = semantic.probabilities(i);
    const auto pj = semantic.probabilities(j);
    double dot = 0.0;
    for (int c = 0; c < channels; ++c) dot += pi[c] * pj[c];
    if (dot > kProbabilityFloor) {
      out.value -= inv * std::log(dot);
      for (int c = 0; c < channels; ++c) {
        out.gradient[i * channels + c] -= inv * pj[c] / dot;
        out.gradient[j * channels + c] -= inv * pi[c] / dot;
      }
    } else {
      out.value -= inv * std::log(kProbabilityFloor);
    }
  }
  return out;
}

double SpanningTree::total_weight() const {
  double total = 0.0;
  for (const auto& e : edges) total += e.weight;
  return total;
}

SpanningTree build_mst(const RgbImage& image) {
  const std::size_t n = image.pixel_count();
  if (n == 0) throw ValidationError("cannot build a spanning tree of an empty image");
  const EdgeWeightField grid(image.height, image.width);
  std::vector<TreeEdge> candidates;
  candidates.reserve(n * 4);
  for (PixelIndex k = 0; k < n; ++k) {
    for (int d = 4; d < 8; ++d) {
      const auto l = grid.neighbor(k, d);
      if (!l) continue;
      double w = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double diff = image.at(k, c) - image.at(*l, c);
        w += diff * diff;
      }
      candidates.push_back({k, *l, w});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const TreeEdge& x, const TreeEdge& y) {
    return std::tie(x.weight, x.a, x.b) < std::tie(y.weight, y.a, y.b);
  });

  std::vector<PixelIndex> parent(n);
  std::iota(parent.begin(), parent.end(), PixelIndex{0});
  auto find = [&](PixelIndex x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };

  SpanningTree tree{n, {}};
  tree.edges.reserve(n - 1);
  for (const auto& e : candidates) {
    const PixelIndex ra = find(e.a);
    const PixelIndex rb = find(e.b);
    if (ra == rb) continue;
    parent[ra] = rb;
    tree.edges.push_back(e);
    if (tree.edges.size() + 1 == n) break;
  }
  return tree;
}

LossValue rgb_tree_loss(const SemanticMap& semantic, const SpanningTree& tree,
                        const LossConfig& config, TreeFilterMethod method) {
  require_semantic_shape(semantic);
  const std::size_t n = semantic.pixel_count();
  if (tree.vertex_count != n) throw ShapeError("spanning tree does not cover the semantic map");
  const int channels = semantic.channels;
  const double norm = 1.0 / (static_cast<double>(n) * channels);

  LossValue out{0.0, std::vector<double>(semantic.values.size(), 0.0)};
  std::vector<double> plane(n);
  std::vector<double> signs(n);
  std::vector<double> weighted(n);

  if (method == TreeFilterMethod::tree_dp) {
    const RootedTree rooted = root_tree(tree, config.theta2);
    const std::vector<double> ones(n, 1.0);
    const std::vector<double> z = tree_aggregate(rooted, ones);
    for (int c = 0; c < channels; ++c) {
      for (PixelIndex p = 0; p < n; ++p) plane[p] = semantic.at(p, c);
      const std::vector<double> agg = tree_aggregate(rooted, plane);
      for (PixelIndex p = 0; p < n; ++p) {
        const double diff = plane[p] - agg[p] / z[p];
        out.value += norm * std::abs(diff);
        signs[p] = sign(diff);
        weighted[p] = signs[p] / z[p];
      }
      const std::vector<double> back = tree_aggregate(rooted, weighted);
      for (PixelIndex p = 0; p < n; ++p) out.gradient[p * channels + c] = norm * (signs[p] - back[p]);
    }
    return out;
  }

  if (tree.edges.size() + 1 != n) throw ValidationError("spanning tree must have n-1 edges");
  const std::vector<double> sim = naive_similarity(tree, config.theta2);
  std::vector<double> z(n, 0.0);
  for (PixelIndex i = 0; i < n; ++i) {
    for (PixelIndex j = 0; j < n; ++j) z[i] += sim[i * n + j];
  }
  for (int c = 0; c < channels; ++c) {
    for (PixelIndex i = 0; i < n; ++i) {
      double filtered = 0.0;
      for (PixelIndex j = 0; j < n; ++j) filtered += sim[i * n + j] * semantic.at(j, c);
      const double diff = semantic.at(i, c) - filtered / z[i];
      out.value += norm * std::abs(diff);
      signs[i] = sign(diff);
    }
    for (PixelIndex k = 0; k < n; ++k) {
      double back = 0.0;
      for (PixelIndex i = 0; i < n; ++i) back += signs[i] * sim[i * n + k] / z[i];
      out.gradient[k * channels + c] = norm * (signs[k] - back);
    }
  }
  return out;
}

LossValue boundary_affinity_loss(const BoundaryMap& boundary_high, const PseudoMask& mask) {
  if (boundary_high.height != mask.height || boundary_high.width != mask.width) {
    throw ShapeError("boundary map and mask have different shapes");
  }
  mask.validate();
  const std::size_t n = boundary_high.pixel_count();
  const EdgeWeightField grid(mask.height, mask.width);

  enum Group { kThing = 0, kStuff = 1, kApart = 2 };
  struct Pair {
    PixelIndex k;
    PixelIndex l;
    Group group;
  };
  std::vector<Pair> pairs;
  std::array<std::size_t, 3> sizes{0, 0, 0};
  for (PixelIndex k = 0; k < n; ++k) {
    for (int d = 4; d < 8; ++d) {
      const auto l = grid.neighbor(k, d);
      if (!l) continue;
      Group group = kApart;
      if (mask.target[k] == mask.target[*l]) {
        group = mask.lookup.at(mask.target[k]).kind == TargetKind::thing ? kThing : kStuff;
      }
      ++sizes[group];
      pairs.push_back({k, *l, group});
    }
  }

  LossValue out{0.0, std::vector<double>(n, 0.0)};
  for (const auto& [k, l, group] : pairs) {
    const double bk = boundary_high.values[k];
    const double bl = boundary_high.values[l];
    const double peak = std::max(bk, bl);
    const double affinity = 1.0 - peak;
    double d_peak = 0.0;
    if (group == kApart) {
      const double w = 1.0 / static_cast<double>(sizes[kApart]);
      if (peak > kProbabilityFloor) {
        out.value -= w * std::log(peak);
        d_peak = -w / peak;
      } else {
        out.value -= w * std::log(kProbabilityFloor);
      }
    } else {
      const double w = 1.0 / (2.0 * static_cast<double>(sizes[group]));
      if (affinity > kProbabilityFloor) {
        out.value -= w * std::log(affinity);
        d_peak = w / affinity;
      } else {
        out.value -= w * std::log(kProbabilityFloor);
      }
    }
    if (bk > bl) {
      out.gradient[k] += d_peak;
    } else if (bl > bk) {
      out.gradient[l] += d_peak;
    } else {
      out.gradient[k] += 0.5 * d_peak;
      out.gradient[l] += 0.5 * d_peak;
    }
  }
  return out;
}

double combine_semantic_terms(double partial, double lab, double rgb, const LossConfig& config) {
  return partial + config.alpha1 * lab + config.alpha2 * rgb;
}

SemanticLossTerms semantic_loss_terms(const SemanticMap& semantic, const RgbImage& image,
                                      std::span<const PointAnnotation> points,
                                      const SpanningTree& tree, const LossConfig& config) {
  SemanticLossTerms terms;
  terms.partial = partial_cross_entropy(semantic, points).value;
  terms.lab = lab_affinity_loss(semantic, image, config).value;
  terms.rgb = rgb_tree_loss(semantic, tree, config).value;
  terms.total = combine_semantic_terms(terms.partial, terms.lab, terms.rgb, config);
  return terms;
}

double semantic_loss_total(const SemanticMap& semantic, const RgbImage& image,
                           std::span<const PointAnnotation> points, const SpanningTree& tree,
                           const LossConfig& config) {
  return semantic_loss_terms(semantic, image, points, tree, config).total;
}

double finite_difference_check(const LossEvaluator& evaluator, std::span<const double> input,
                               double step, std::span<const std::size_t> coordinates) {
  if (!(step > 0.0)) throw ValidationError("finite-difference step must be > 0");
  const LossValue base = evaluator(input);
  if (base.gradient.size() != input.size()) {
    throw ShapeError("evaluator gradient size does not match its input");
  }
  std::vector<std::size_t> coords(coordinates.begin(), coordinates.end());
  if (coords.empty()) {
    coords.resize(input.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
  }
  std::vector<double> probe(input.begin(), input.end());
  double worst = 0.0;
  for (std::size_t k : coords) {
    if (k >= input.size()) throw ValidationError("finite-difference coordinate out of range");
    const double analytic = base.gradient[k];
    if (std::abs(analytic) <= 1e-8) continue;
    probe[k] = input[k] + step;
    const double plus = evaluator(probe).value;
    probe[k] = input[k] - step;
    const double minus = evaluator(probe).value;
    probe[k] = input[k];
    const double numeric = (plus - minus) / (2.0 * step);
    worst = std::max(worst, std::abs(numeric - analytic) / std::abs(analytic));
  }
  return worst;
}

}  // namespace otmask

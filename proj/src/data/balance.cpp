#include "adcare/data/balance.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "adcare/data/synthetic.h"
#include "adcare/error.h"

namespace adcare::data {

std::array<std::size_t, 3> balance_targets(std::size_t n, const std::array<double, 3>& target) {
  return label_counts(n, target);
}

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Indices of the k nearest points to points[i] among candidates (excluding i),
// ties broken by index.
std::vector<std::size_t> nearest(std::span<const FeaturePoint> points, std::size_t i,
                                 const std::vector<std::size_t>& candidates, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t j : candidates)
    if (j != i) d.emplace_back(squared_distance(points[i].features, points[j].features), j);
  const std::size_t m = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + long(m), d.end());
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < m; ++q) out.push_back(d[q].second);
  return out;
}

}  // namespace

std::vector<FeaturePoint> balance(std::span<const FeaturePoint> points, const BalanceConfig& cfg, std::uint64_t seed) {
  if (cfg.k == 0) throw ConfigError("balance needs k >= 1");
  for (const auto& p : points) {
    if (p.features.size() != points.front().features.size()) throw DimensionError("feature widths differ");
  }
  const auto want = balance_targets(points.size(), cfg.target);
  std::array<std::vector<std::size_t>, 3> members;
  for (std::size_t i = 0; i < points.size(); ++i) members[std::size_t(points[i].label)].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<bool> keep(points.size(), true);
  for (std::size_t c = 0; c < 3; ++c) {
    if (members[c].size() <= want[c]) continue;
    std::vector<std::size_t> pool = members[c];
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t q = want[c]; q < pool.size(); ++q) keep[pool[q]] = false;
  }

  std::vector<FeaturePoint> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (keep[i]) out.push_back(points[i]);

  std::vector<std::size_t> everyone(points.size());
  std::iota(everyone.begin(), everyone.end(), std::size_t{0});
  for (std::size_t c = 0; c < 3; ++c) {
    if (members[c].size() >= want[c]) continue;
    const std::size_t need = want[c] - members[c].size();
    if (members[c].size() < cfg.k + 1) {
      throw ConfigError(std::string("class ") + to_string(kLabels[c]) + " has " + std::to_string(members[c].size()) +
                        " points, oversampling with k=" + std::to_string(cfg.k) + " needs at least " +
                        std::to_string(cfg.k + 1));
    }
    std::vector<std::vector<std::size_t>> neighbours;
    std::vector<double> weight;
    for (std::size_t i : members[c]) {
      neighbours.push_back(nearest(points, i, members[c], cfg.k));
      double hard = 0.0;
      if (!cfg.vanilla) {
        for (std::size_t j : nearest(points, i, everyone, cfg.k))
          if (points[j].label != points[i].label) hard += 1.0;
      }
      weight.push_back(hard / double(cfg.k));
    }
    if (std::all_of(weight.begin(), weight.end(), [](double w) { return w == 0.0; }))
      std::fill(weight.begin(), weight.end(), 1.0);
    std::discrete_distribution<std::size_t> pick_seed(weight.begin(), weight.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t s = 0; s < need; ++s) {
      const std::size_t q = pick_seed(rng);
      const auto& nb = neighbours[q];
      const std::size_t a = members[c][q];
      const std::size_t b = nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)];
      const double u = unit(rng);
      FeaturePoint p;
      p.id = points[a].id + "~syn" + std::to_string(s + 1);
      p.label = kLabels[c];
      p.synthetic = true;
      p.parent_a = a;
      p.parent_b = b;
      p.u = u;
      p.features.resize(points[a].features.size());
      for (std::size_t d = 0; d < p.features.size(); ++d)
        p.features[d] = points[a].features[d] + u * (points[b].features[d] - points[a].features[d]);
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace adcare::data

#pragma once

#include "mgame/rng.hpp"
#include "mgame/static_game.hpp"
#include "mgame/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgame {

enum class SelectionMode { kDegenerate, kSES, kAffiliated };

struct SelectionSpec {
  SelectionMode mode = SelectionMode::kDegenerate;
  double phi = 0.0;               // weight on the high extreme equilibrium
  double affiliation_param = 1.0; // copy probability for affiliated mode

  void validate() const {
    if (phi < 0.0 || phi > 1.0) throw std::invalid_argument("selection: phi in [0,1]");
    if (affiliation_param < 0.0 || affiliation_param > 1.0)
      throw std::invalid_argument("selection: affiliation_param in [0,1]");
  }
};

// P(D_i = 1) under threshold equilibrium t; types independent of selection.
inline double equilibrium_choice_prob(const ThresholdEquilibrium& eq, int i) {
  return 1.0 - normal_cdf(eq.thresholds[i]);
}

// Analytic cross-game covariance Cov(D_{i,m}, D_{j,n}) when adjacent games
// mix over the two extreme equilibria. The within-equilibrium covariance term
// vanishes because private types are independent across games.
inline double mixture_covariance(const EquilibriumSet& eqset_m,
                                 const EquilibriumSet& eqset_n,
                                 const SelectionSpec& sel, int i, int j) {
  sel.validate();
  if (sel.mode == SelectionMode::kDegenerate) return 0.0;
  if (sel.phi == 0.0 || sel.phi == 1.0) return 0.0;
  if (eqset_m.equilibria.empty() || eqset_n.equilibria.empty())
    throw std::invalid_argument("mixture_covariance: empty equilibrium set");
  if (eqset_m.equilibria.size() < 2 || eqset_n.equilibria.size() < 2) return 0.0;

  const double pm[2] = {equilibrium_choice_prob(eqset_m.equilibria.front(), i),
                        equilibrium_choice_prob(eqset_m.equilibria.back(), i)};
  const double qn[2] = {equilibrium_choice_prob(eqset_n.equilibria.front(), j),
                        equilibrium_choice_prob(eqset_n.equilibria.back(), j)};
  const double marg[2] = {1.0 - sel.phi, sel.phi};

  // Joint selection weights over (T_m, T_n) extremes.
  double w[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  const double a = (sel.mode == SelectionMode::kSES) ? 1.0 : sel.affiliation_param;
  for (int s = 0; s < 2; ++s)
    for (int t = 0; t < 2; ++t)
      w[s][t] = a * (s == t ? marg[s] : 0.0) + (1.0 - a) * marg[s] * marg[t];

  double e_pq = 0.0, e_p = 0.0, e_q = 0.0;
  for (int s = 0; s < 2; ++s) {
    e_p += marg[s] * pm[s];
    e_q += marg[s] * qn[s];
    for (int t = 0; t < 2; ++t) e_pq += w[s][t] * pm[s] * qn[t];
  }
  return e_pq - e_p * e_q;
}

// Equilibrium sets evaluated on the averaging grid (x1 in {1..4} crossed with
// quadrature nodes for x2). Computed once per design and reused across phi.
struct EquilibriumGrid {
  QuadratureRule quad;
  std::vector<std::vector<EquilibriumSet>> sets;  // [x1 - 1][node]
};

inline EquilibriumGrid solve_equilibrium_grid(const StaticGameSpec& spec, int quad_n) {
  EquilibriumGrid grid;
  grid.quad = gauss_legendre(quad_n);
  grid.sets.resize(4);
  for (int x1 = 1; x1 <= 4; ++x1) {
    for (double node : grid.quad.nodes) {
      Covariate x{static_cast<double>(x1), node};
      grid.sets[x1 - 1].push_back(enumerate_equilibria(spec, x));
    }
  }
  return grid;
}

// Covariance under same-equilibrium selection, averaged over the support of X
// (x1 equal weights, x2 by quadrature). Points with a unique equilibrium
// contribute zero.
inline double table_covariance(const EquilibriumGrid& grid, double phi, int i, int j) {
  SelectionSpec sel;
  sel.mode = SelectionMode::kSES;
  sel.phi = phi;
  double acc = 0.0;
  for (int x1 = 0; x1 < 4; ++x1)
    for (std::size_t k = 0; k < grid.quad.nodes.size(); ++k) {
      const auto& set = grid.sets[x1][k];
      acc += 0.25 * grid.quad.weights[k] * mixture_covariance(set, set, sel, i, j);
    }
  return acc;
}

inline double table_covariance(const StaticGameSpec& spec, double phi, int i, int j,
                               int quad_n = 32) {
  if (quad_n < 8) throw std::invalid_argument("table_covariance: quad_n >= 8");
  return table_covariance(solve_equilibrium_grid(spec, quad_n), phi, i, j);
}

// --- Cluster simulation -----------------------------------------------------

struct ClusterRecord {
  int cluster = 0;
  int game = 0;  // 0 = m, 1 = n
  Covariate x;
  std::vector<int> actions;  // one per player
};

struct ClusterPanel {
  int n_players = 0;
  std::vector<ClusterRecord> records;  // two games per cluster
  std::uint64_t seed = 0;
};

namespace detail {

// Cholesky factor of the type correlation matrix (SPD by spec invariant).
inline std::vector<std::vector<double>> cholesky(const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = a[i][j];
      for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (i == j) {
        if (s <= 0.0) throw std::invalid_argument("type_corr not positive definite");
        l[i][i] = std::sqrt(s);
      } else {
        l[i][j] = s / l[j][j];
      }
    }
  return l;
}

}  // namespace detail

// Equilibrium cache on a snapped x2 grid so simulation does not re-solve the
// game per draw. Draws of x2 are snapped to the cache grid.
class StaticSimulator {
 public:
  StaticSimulator(const StaticGameSpec& spec, int x2_grid = 128)
      : spec_(spec), chol_(detail::cholesky(spec.type_corr)), x2_grid_(x2_grid) {
    cache_.resize(4);
    for (int x1 = 1; x1 <= 4; ++x1) {
      cache_[x1 - 1].reserve(x2_grid_);
      for (int g = 0; g < x2_grid_; ++g) {
        Covariate x{static_cast<double>(x1), grid_x2(g)};
        cache_[x1 - 1].push_back(enumerate_equilibria(spec_, x));
      }
    }
  }

  const StaticGameSpec& spec() const { return spec_; }
  double grid_x2(int g) const { return (g + 0.5) / x2_grid_; }

  Covariate draw_covariate(RngStream& rng) const {
    Covariate x;
    x.x1 = 1.0 + static_cast<double>(rng.next_below(4));
    x.x2 = grid_x2(static_cast<int>(rng.next_below(x2_grid_)));
    return x;
  }

  const EquilibriumSet& equilibria_at(const Covariate& x) const {
    int g = static_cast<int>(std::lround(x.x2 * x2_grid_ - 0.5));
    g = std::clamp(g, 0, x2_grid_ - 1);
    return cache_[static_cast<int>(x.x1) - 1][g];
  }

  // Index of the selected equilibrium: extremes under the total order.
  int draw_selection(const EquilibriumSet& set, const SelectionSpec& sel,
                     RngStream& rng) const {
    if (sel.mode == SelectionMode::kDegenerate || set.equilibria.size() < 2) {
      if (sel.mode != SelectionMode::kDegenerate) rng.next_uniform();  // keep streams aligned
      return 0;
    }
    bool high = rng.next_bernoulli(sel.phi);
    return high ? static_cast<int>(set.equilibria.size()) - 1 : 0;
  }

  std::vector<int> draw_actions(const ThresholdEquilibrium& eq, RngStream& rng) const {
    const int n = spec_.n_players;
    std::vector<double> z(n), eps(n, 0.0);
    for (int i = 0; i < n; ++i) z[i] = rng.next_normal();
    std::vector<int> d(n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k <= i; ++k) eps[i] += chol_[i][k] * z[k];
      d[i] = (eps[i] >= eq.thresholds[i]) ? 1 : 0;
    }
    return d;
  }

 private:
  StaticGameSpec spec_;
  std::vector<std::vector<double>> chol_;
  int x2_grid_;
  std::vector<std::vector<EquilibriumSet>> cache_;
};

// Simulate clusters of two adjacent games. Under SES the two games share one
// covariate draw and the same selected equilibrium; affiliated mode copies the
// partner's selection with the given probability; degenerate mode always plays
// the lowest-order equilibrium.
inline ClusterPanel simulate_clusters(const StaticSimulator& sim, const SelectionSpec& sel,
                                      int n_clusters, RngStream rng) {
  sel.validate();
  if (n_clusters < 1) throw std::invalid_argument("simulate_clusters: n_clusters >= 1");
  ClusterPanel panel;
  panel.n_players = sim.spec().n_players;
  panel.seed = rng.seed();
  panel.records.reserve(2 * static_cast<std::size_t>(n_clusters));
  for (int c = 0; c < n_clusters; ++c) {
    Covariate xm = sim.draw_covariate(rng);
    Covariate xn = (sel.mode == SelectionMode::kSES) ? xm : sim.draw_covariate(rng);
    const auto& set_m = sim.equilibria_at(xm);
    const auto& set_n = sim.equilibria_at(xn);
    int tm = sim.draw_selection(set_m, sel, rng);
    int tn = tm;
    if (sel.mode == SelectionMode::kAffiliated) {
      bool copy = rng.next_bernoulli(sel.affiliation_param);
      int indep = sim.draw_selection(set_n, sel, rng);
      tn = copy ? ((tm > 0 && set_n.equilibria.size() > 1)
                       ? static_cast<int>(set_n.equilibria.size()) - 1
                       : 0)
                : indep;
    } else if (sel.mode == SelectionMode::kDegenerate) {
      tn = 0;
    } else if (set_n.equilibria.size() < 2) {
      tn = 0;
    } else if (tm > 0) {
      tn = static_cast<int>(set_n.equilibria.size()) - 1;
    }
    panel.records.push_back({c, 0, xm, sim.draw_actions(set_m.equilibria[tm], rng)});
    panel.records.push_back({c, 1, xn, sim.draw_actions(set_n.equilibria[tn], rng)});
  }
  return panel;
}

// --- Conditional independence test ------------------------------------------

struct CellReport {
  std::string label;
  int count = 0;
  double covariance = 0.0;
  double std_error = 0.0;
  bool used = false;
};

struct TestReport {
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  int n_boot = 0;
  std::string method = "within-cell pairwise permutation";
  std::vector<CellReport> cells;
};

namespace detail {

struct CellData {
  std::vector<double> di;  // D_{i,m} per cluster in this cell
  std::vector<double> dj;  // D_{j,n} per cluster in this cell
};

inline double cell_statistic(const std::vector<double>& di, const std::vector<double>& dj,
                             double* cov_out = nullptr, double* se_out = nullptr) {
  const std::size_t n = di.size();
  double mi = 0.0, mj = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mi += di[k];
    mj += dj[k];
  }
  mi /= n;
  mj /= n;
  double cov = 0.0, var = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double p = (di[k] - mi) * (dj[k] - mj);
    cov += p;
  }
  cov /= n;
  for (std::size_t k = 0; k < n; ++k) {
    double p = (di[k] - mi) * (dj[k] - mj) - cov;
    var += p * p;
  }
  var /= n;
  double se = std::sqrt(std::max(var, 1e-300) / n);
  if (cov_out) *cov_out = cov;
  if (se_out) *se_out = se;
  return cov / se;
}

}  // namespace detail

// Tests H0: E(D_i,m | X_m, X_n, D_j,n) = E(D_i,m | X_m, X_n) by aggregating
// studentized within-cell covariances; the null distribution comes from
// permuting the m-n pairing within cells.
inline TestReport conditional_independence_test(const ClusterPanel& panel, int i, int j,
                                                double alpha = 0.05, int n_boot = 500,
                                                int x2_bins = 4, int min_cell = 30,
                                                std::uint64_t perm_seed = 777) {
  if (panel.records.size() % 2 != 0)
    throw std::invalid_argument("panel must contain paired games");
  auto cell_of = [&](const Covariate& xm, const Covariate& xn) {
    int bm = std::min(static_cast<int>(xm.x2 * x2_bins), x2_bins - 1);
    int bn = std::min(static_cast<int>(xn.x2 * x2_bins), x2_bins - 1);
    int cm = (static_cast<int>(xm.x1) - 1) * x2_bins + bm;
    int cn = (static_cast<int>(xn.x1) - 1) * x2_bins + bn;
    return cm * (4 * x2_bins) + cn;
  };

  std::map<int, detail::CellData> cells;
  for (std::size_t r = 0; r + 1 < panel.records.size(); r += 2) {
    const auto& m = panel.records[r];
    const auto& n = panel.records[r + 1];
    auto& cd = cells[cell_of(m.x, n.x)];
    cd.di.push_back(m.actions[i]);
    cd.dj.push_back(n.actions[j]);
  }

  TestReport rep;
  rep.alpha = alpha;
  rep.n_boot = n_boot;
  std::vector<const detail::CellData*> used;
  double total_used = 0.0;
  for (auto& [key, cd] : cells) {
    CellReport cr;
    cr.label = "cell " + std::to_string(key);
    cr.count = static_cast<int>(cd.di.size());
    if (cr.count >= min_cell) {
      // Degenerate cells (constant D in either margin) carry no information.
      double vi = 0.0, vj = 0.0, mi = 0.0, mj = 0.0;
      for (double v : cd.di) mi += v;
      for (double v : cd.dj) mj += v;
      mi /= cr.count;
      mj /= cr.count;
      for (double v : cd.di) vi += (v - mi) * (v - mi);
      for (double v : cd.dj) vj += (v - mj) * (v - mj);
      if (vi > 0.0 && vj > 0.0) {
        detail::cell_statistic(cd.di, cd.dj, &cr.covariance, &cr.std_error);
        cr.used = true;
        used.push_back(&cd);
        total_used += cr.count;
      }
    }
    rep.cells.push_back(cr);
  }
  if (used.empty())
    throw std::runtime_error("conditional_independence_test: no cell has enough pairs");

  auto statistic = [&](const std::vector<std::vector<double>>& djs) {
    double s = 0.0;
    std::size_t u = 0;
    for (const auto* cd : used) {
      double z = detail::cell_statistic(cd->di, djs[u]);
      double w = cd->di.size() / total_used;
      s += w * z * z;
      ++u;
    }
    return s;
  };

  std::vector<std::vector<double>> dj0;
  for (const auto* cd : used) dj0.push_back(cd->dj);
  rep.statistic = statistic(dj0);

  RngStream rng(perm_seed, 0xC1);
  int exceed = 0;
  auto perm = dj0;
  for (int b = 0; b < n_boot; ++b) {
    for (auto& v : perm) {
      for (std::size_t k = v.size(); k > 1; --k) {
        std::size_t pick = rng.next_below(k);
        std::swap(v[k - 1], v[pick]);
      }
    }
    if (statistic(perm) >= rep.statistic) ++exceed;
  }
  rep.p_value = (1.0 + exceed) / (1.0 + n_boot);
  rep.reject = rep.p_value < alpha;
  return rep;
}

}  // namespace mgame

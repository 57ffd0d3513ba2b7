#pragma once

#include "mgame/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgame {

struct Covariate {
  double x1 = 0.0;  // discrete component, uniform on {1,2,3,4}
  double x2 = 0.0;  // continuous component, uniform on [0,1]
};

// Feature map shared by all designs: (x1, x2, x1*x2, x2^2, sqrt(x1)).
inline std::array<double, 5> covariate_features(const Covariate& x) {
  return {x.x1, x.x2, x.x1 * x.x2, x.x2 * x.x2, std::sqrt(x.x1)};
}

// Binary-action Bayesian game with linear payoff indices and jointly normal
// private types (unit variances). Player i's payoff from action 1 is
// index_i(x) + sum_j interaction[i][j] * D_j + eps_i.
struct StaticGameSpec {
  int n_players = 2;
  std::vector<std::array<double, 5>> index_coeffs;  // per player
  std::vector<std::vector<double>> interaction;     // delta[i][j], delta[i][i] = 0
  std::vector<std::vector<double>> type_corr;       // unit diagonal
  int reference_player = 0;  // player whose threshold orders the equilibrium set

  double index(int i, const Covariate& x) const {
    auto f = covariate_features(x);
    double v = 0.0;
    for (int k = 0; k < 5; ++k) v += index_coeffs[i][k] * f[k];
    return v;
  }

  double search_bound(int i, const Covariate& x) const {
    double b = std::fabs(index(i, x)) + 40.0;
    for (int j = 0; j < n_players; ++j) b += std::fabs(interaction[i][j]);
    return b;
  }

  void validate() const {
    if (n_players < 2) throw std::invalid_argument("spec: need at least 2 players");
    if (static_cast<int>(index_coeffs.size()) != n_players ||
        static_cast<int>(interaction.size()) != n_players ||
        static_cast<int>(type_corr.size()) != n_players)
      throw std::invalid_argument("spec: field sizes must match n_players");
    for (int i = 0; i < n_players; ++i) {
      if (type_corr[i][i] != 1.0)
        throw std::invalid_argument("spec: type_corr diagonal must be 1");
      for (int j = 0; j < n_players; ++j) {
        if (std::fabs(type_corr[i][j] - type_corr[j][i]) > 1e-14)
          throw std::invalid_argument("spec: type_corr must be symmetric");
        if (i != j && std::fabs(type_corr[i][j]) >= 1.0)
          throw std::invalid_argument("spec: off-diagonal correlations in (-1,1)");
      }
    }
  }
};

struct ThresholdEquilibrium {
  Covariate x;
  std::vector<double> thresholds;
};

struct EquilibriumSet {
  Covariate x;
  std::vector<ThresholdEquilibrium> equilibria;  // sorted by reference threshold
};

// Interim payoff of choosing 1 for the marginal type eps_i, with opponents
// playing threshold strategies. Linearity in opponents' actions reduces the
// joint normal to univariate conditional exceedance terms.
inline double interim_payoff(const StaticGameSpec& spec, const Covariate& x,
                             const std::vector<double>& thresholds, int i,
                             double eps_i) {
  double u = spec.index(i, x) + eps_i;
  for (int j = 0; j < spec.n_players; ++j) {
    if (j == i || spec.interaction[i][j] == 0.0) continue;
    u += spec.interaction[i][j] *
         conditional_exceedance(thresholds[j], eps_i, spec.type_corr[i][j]);
  }
  return u;
}

struct SingleCrossingReport {
  bool ok = true;
  double min_derivative = 1.0;
  double at_eps = 0.0;
};

// Numerical check of the single-crossing condition: dU_i/deps_i > 0 on a grid.
inline SingleCrossingReport check_single_crossing(const StaticGameSpec& spec,
                                                  const Covariate& x,
                                                  const std::vector<double>& thresholds,
                                                  int i, int grid = 400) {
  SingleCrossingReport rep;
  const double b = spec.search_bound(i, x);
  for (int g = 0; g <= grid; ++g) {
    double e = -b + 2.0 * b * g / grid;
    double d = 1.0;
    for (int j = 0; j < spec.n_players; ++j) {
      if (j == i) continue;
      double rho = spec.type_corr[i][j];
      if (rho == 0.0 || spec.interaction[i][j] == 0.0) continue;
      double s = std::sqrt(1.0 - rho * rho);
      d += spec.interaction[i][j] * (rho / s) * normal_pdf((thresholds[j] - rho * e) / s);
    }
    if (d < rep.min_derivative) {
      rep.min_derivative = d;
      rep.at_eps = e;
    }
  }
  rep.ok = rep.min_derivative > 0.0;
  return rep;
}

// Root of U_i(t; t_{-i}) = 0 in t. The +eps_i term guarantees a sign change
// over [-B, B]; the first bracket from a coarse scan is refined by bisection.
inline double best_response_threshold(const StaticGameSpec& spec, const Covariate& x,
                                      const std::vector<double>& thresholds, int i) {
  const double b = spec.search_bound(i, x);
  auto u = [&](double t) { return interim_payoff(spec, x, thresholds, i, t); };
  const int coarse = 128;
  double lo = -b, hi = b;
  double ulo = u(lo);
  if (ulo > 0.0) return lo;  // should not happen under Assumption 1 boundedness
  double prev_t = lo, prev_u = ulo;
  bool bracketed = false;
  for (int g = 1; g <= coarse; ++g) {
    double t = -b + 2.0 * b * g / coarse;
    double ut = u(t);
    if (prev_u <= 0.0 && ut >= 0.0) {
      lo = prev_t;
      hi = t;
      bracketed = true;
      break;
    }
    prev_t = t;
    prev_u = ut;
  }
  if (!bracketed)
    throw std::runtime_error("best_response_threshold: no sign change in bracket");
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double um = u(mid);
    if (std::fabs(um) < 1e-13 || (hi - lo) < 1e-14) return mid;
    if (um < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace detail {

inline double equilibrium_residual(const StaticGameSpec& spec, const Covariate& x,
                                   const std::vector<double>& t) {
  double r = 0.0;
  for (int i = 0; i < spec.n_players; ++i)
    r = std::max(r, std::fabs(interim_payoff(spec, x, t, i, t[i])));
  return r;
}

inline void sort_and_dedupe(EquilibriumSet& set, int ref, double tol = 1e-7) {
  auto& eqs = set.equilibria;
  std::sort(eqs.begin(), eqs.end(),
            [&](const ThresholdEquilibrium& a, const ThresholdEquilibrium& b) {
              if (a.thresholds[ref] != b.thresholds[ref])
                return a.thresholds[ref] < b.thresholds[ref];
              return a.thresholds < b.thresholds;
            });
  std::vector<ThresholdEquilibrium> out;
  for (auto& e : eqs) {
    bool dup = false;
    for (const auto& kept : out) {
      double d = 0.0;
      for (std::size_t k = 0; k < e.thresholds.size(); ++k)
        d = std::max(d, std::fabs(e.thresholds[k] - kept.thresholds[k]));
      if (d < tol) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(e);
  }
  eqs = std::move(out);
}

// Two-player enumeration: scan the displacement map
// t -> BR_ref(BR_other(t)) - t over a fine grid and refine sign changes.
inline EquilibriumSet enumerate_two_player(const StaticGameSpec& spec, const Covariate& x,
                                           int grid) {
  const int ref = spec.reference_player;
  const int other = 1 - ref;
  const double b = spec.search_bound(ref, x);
  std::vector<double> t(2, 0.0);
  auto displacement = [&](double tr) {
    t[ref] = tr;
    t[other] = best_response_threshold(spec, x, t, other);
    double br = best_response_threshold(spec, x, t, ref);
    return br - tr;
  };
  EquilibriumSet set;
  set.x = x;
  double prev_t = -b, prev_d = displacement(-b);
  for (int g = 1; g <= grid; ++g) {
    double tr = -b + 2.0 * b * g / grid;
    double d = displacement(tr);
    if ((prev_d >= 0.0 && d <= 0.0) || (prev_d <= 0.0 && d >= 0.0)) {
      double lo = prev_t, hi = tr, dlo = prev_d;
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        double dm = displacement(mid);
        if ((dlo <= 0.0) == (dm <= 0.0)) {
          lo = mid;
          dlo = dm;
        } else {
          hi = mid;
        }
        if (hi - lo < 1e-12) break;
      }
      double tr_star = 0.5 * (lo + hi);
      t[ref] = tr_star;
      t[other] = best_response_threshold(spec, x, t, other);
      ThresholdEquilibrium eq{x, t};
      eq.thresholds[ref] = tr_star;
      if (equilibrium_residual(spec, x, eq.thresholds) < 1e-9)
        set.equilibria.push_back(eq);
    }
    prev_t = tr;
    prev_d = d;
  }
  sort_and_dedupe(set, ref);
  return set;
}

// Multi-start damped best-response iteration for 3+ players.
inline EquilibriumSet enumerate_multi_player(const StaticGameSpec& spec,
                                             const Covariate& x, int random_starts,
                                             std::uint64_t seed) {
  const int n = spec.n_players;
  std::vector<std::vector<double>> starts;
  // Lattice of 3^n corners in probability space.
  const double probs[3] = {0.05, 0.5, 0.95};
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    std::vector<double> t(n);
    int c = code;
    for (int i = 0; i < n; ++i) {
      t[i] = normal_quantile(1.0 - probs[c % 3]);
      c /= 3;
    }
    starts.push_back(t);
  }
  // Deterministic pseudo-random starts.
  std::uint64_t state = seed ? seed : 0x5bd1e995u;
  auto next01 = [&]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return (static_cast<double>(state >> 11) + 0.5) * 0x1.0p-53;
  };
  for (int s = 0; s < random_starts; ++s) {
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = -4.0 + 8.0 * next01();
    starts.push_back(t);
  }

  EquilibriumSet set;
  set.x = x;
  for (auto t : starts) {
    bool converged = false;
    for (int it = 0; it < 4000; ++it) {
      std::vector<double> br(n);
      for (int i = 0; i < n; ++i) br[i] = best_response_threshold(spec, x, t, i);
      double step = 0.0;
      for (int i = 0; i < n; ++i) {
        double nt = 0.5 * t[i] + 0.5 * br[i];  // damping stabilizes substitutes
        step = std::max(step, std::fabs(nt - t[i]));
        t[i] = nt;
      }
      if (step < 1e-12) {
        converged = true;
        break;
      }
    }
    if (converged && equilibrium_residual(spec, x, t) < 1e-9)
      set.equilibria.push_back({x, t});
  }
  sort_and_dedupe(set, spec.reference_player);
  return set;
}

}  // namespace detail

inline EquilibriumSet enumerate_equilibria(const StaticGameSpec& spec, const Covariate& x,
                                           int grid = 2000, int random_starts = 50,
                                           std::uint64_t seed = 12345) {
  spec.validate();
  EquilibriumSet set = (spec.n_players == 2)
                           ? detail::enumerate_two_player(spec, x, grid)
                           : detail::enumerate_multi_player(spec, x, random_starts, seed);
  if (set.equilibria.empty())
    throw std::runtime_error("enumerate_equilibria: no equilibrium found");
  return set;
}

struct TotalOrderReport {
  bool ok = true;
  std::vector<std::string> violations;
};

// Lemma-style co-movement check: for every pair of equilibria and every
// player pair with a common interaction sign, thresholds co-move with the
// sign of the interaction effect.
inline TotalOrderReport check_total_order(const EquilibriumSet& set,
                                          const StaticGameSpec& spec) {
  TotalOrderReport rep;
  const double tol = 1e-7;
  for (std::size_t a = 0; a < set.equilibria.size(); ++a)
    for (std::size_t b = a + 1; b < set.equilibria.size(); ++b) {
      const auto& t = set.equilibria[a].thresholds;
      const auto& tp = set.equilibria[b].thresholds;
      for (int i = 0; i < spec.n_players; ++i)
        for (int j = i + 1; j < spec.n_players; ++j) {
          double dij = spec.interaction[i][j], dji = spec.interaction[j][i];
          if (dij == 0.0 || dji == 0.0 || (dij > 0) != (dji > 0)) continue;
          double di = t[i] - tp[i], dj = t[j] - tp[j];
          if (std::fabs(di) < tol || std::fabs(dj) < tol) continue;
          double expected = (dij > 0) ? 1.0 : -1.0;
          if ((di * dj > 0 ? 1.0 : -1.0) != expected) {
            rep.ok = false;
            rep.violations.push_back("equilibria " + std::to_string(a) + "," +
                                     std::to_string(b) + " players " +
                                     std::to_string(i) + "," + std::to_string(j));
          }
        }
    }
  return rep;
}

// --- Simulation designs -----------------------------------------------------

// Two-player designs: payoff index per Specification 1/2/3 with slope
// coefficients (1/4, 1/5, 1/10, -1/5, -1/10), interaction delta = -2.
inline StaticGameSpec two_player_design(int specification, double rho,
                                        double delta = -2.0) {
  std::array<double, 5> beta{};
  beta[0] = 0.25;
  beta[1] = 0.2;
  if (specification >= 2) {
    beta[2] = 0.1;
    beta[3] = -0.2;
  }
  if (specification >= 3) beta[4] = -0.1;
  StaticGameSpec spec;
  spec.n_players = 2;
  spec.index_coeffs = {beta, beta};
  spec.interaction = {{0.0, delta}, {delta, 0.0}};
  spec.type_corr = {{1.0, rho}, {rho, 1.0}};
  spec.reference_player = 0;
  return spec;
}

// Three-player design: players (i, j, k) with k as the reference player for
// the equilibrium order.
inline StaticGameSpec three_player_design(int specification) {
  std::array<double, 5> beta_ij = {1.73, -0.97, 0.155, -0.16, -0.01};
  std::array<double, 5> beta_k = {1.91, -1.645, -0.295, 0.29, 0.75};
  int keep = (specification == 1) ? 2 : (specification == 2 ? 4 : 5);
  for (int c = keep; c < 5; ++c) {
    beta_ij[c] = 0.0;
    beta_k[c] = 0.0;
  }
  StaticGameSpec spec;
  spec.n_players = 3;
  spec.index_coeffs = {beta_ij, beta_ij, beta_k};
  const double d_ij = -0.95, d_ik = -3.25, d_ki = -3.1;
  spec.interaction = {{0.0, d_ij, d_ik}, {d_ij, 0.0, d_ik}, {d_ki, d_ki, 0.0}};
  const double r_ij = 0.75, r_ik = 0.8;
  spec.type_corr = {{1.0, r_ij, r_ik}, {r_ij, 1.0, r_ik}, {r_ik, r_ik, 1.0}};
  spec.reference_player = 2;
  return spec;
}

}  // namespace mgame

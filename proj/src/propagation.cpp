#include "rydloss/propagation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <atomic>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "rydloss/interactions.hpp"

namespace rydloss {

double DensityProfile::coupling_sq(double z) const {
  if (kind == ProfileKind::Gaussian) return g_peak * g_peak * std::exp(-0.5 * z * z / (sigma_z * sigma_z));
  return std::abs(z) <= 0.5 * length ? g_peak * g_peak : 0.0;
}

double DensityProfile::coupling(double z) const { return std::sqrt(coupling_sq(z)); }

double DensityProfile::integral(double a, double b) const {
  if (kind == ProfileKind::Gaussian) {
    const double s = std::sqrt(2.0) * sigma_z;
    // ∫exp(-z²/2σ²) = σ√(π/2)·[erf]
    return g_peak * g_peak * sigma_z * std::sqrt(0.25 * kTwoPi) * (std::erf(b / s) - std::erf(a / s));
  }
  const double lo = std::max(a, -0.5 * length), hi = std::min(b, 0.5 * length);
  return hi > lo ? g_peak * g_peak * (hi - lo) : 0.0;
}

std::pair<double, double> DensityProfile::support(double extent_sigma) const {
  if (kind == ProfileKind::Gaussian) return {-extent_sigma * sigma_z, extent_sigma * sigma_z};
  const double half = 0.5 * length * 1.02;  // a couple of empty cells either side
  return {-half, half};
}

DensityProfile make_profile(const MediumParams& p) {
  DensityProfile d;
  d.kind = p.profile;
  d.g_peak = p.g_peak;
  d.sigma_z = p.sigma_z;
  d.length = kHomogeneousLengthPerSigma * p.sigma_z;
  return d;
}

namespace {

// Denominator of the eliminated single-photon equation.
cplx eliminated_detuning(const MediumParams& p) {
  cplx x = p.cap_delta() + p.delta_s;
  if (p.omega_c > 0.0) {
    const cplx ds = p.cap_delta_s();
    if (ds == cplx{})
      throw PoleError("Delta_s = 0 with Omega_c > 0: the eliminated single-photon equation is "
                      "singular; use gamma_s > 0");
    x -= p.omega_c * p.omega_c / (4.0 * ds);
  }
  return x;
}

}  // namespace

cplx single_transmission_closed_form(const MediumParams& p, const DensityProfile& prof, double a,
                                     double b) {
  const cplx x = eliminated_detuning(p);
  return std::exp(cplx{0.0, -1.0} * prof.integral(a, b) / (p.light_speed * x));
}

SingleResult solve_single(const MediumParams& p, const DensityProfile& prof, int samples,
                          double extent_sigma) {
  namespace ode = boost::numeric::odeint;
  if (samples < 2) throw ValidationError("samples", "need at least two output samples");
  const cplx kappa = cplx{0.0, -1.0} / (p.light_speed * eliminated_detuning(p));
  using State = std::array<double, 2>;
  auto rhs = [&](const State& x, State& dx, double z) {
    const cplx e{x[0], x[1]};
    const cplx d = kappa * prof.coupling_sq(z) * e;
    dx[0] = d.real();
    dx[1] = d.imag();
  };
  const auto [a, b] = prof.support(extent_sigma);
  SingleResult r;
  r.z.resize(samples);
  r.psi_e.resize(samples);
  State x{1.0, 0.0};
  auto stepper = ode::make_controlled<ode::runge_kutta_dopri5<State>>(1e-13, 1e-13);
  r.z[0] = a;
  r.psi_e[0] = 1.0;
  for (int i = 1; i < samples; ++i) {
    const double z0 = a + (b - a) * (i - 1) / (samples - 1);
    const double z1 = a + (b - a) * i / (samples - 1);
    ode::integrate_adaptive(stepper, rhs, x, z0, z1, (z1 - z0) / 16);
    r.z[i] = z1;
    r.psi_e[i] = {x[0], x[1]};
  }
  r.transmission = r.psi_e.back();
  return r;
}

std::size_t WavefunctionGrid::components() const {
  std::size_t c = 1;
  for (int i = 0; i < order; ++i) c *= 3;
  return c;
}

std::vector<double> simulation_nodes(const DensityProfile& prof, const SimulationGrid& grid) {
  if (grid.points < 4) throw ValidationError("grid", "need at least 4 intervals per axis");
  const auto [a, b] = prof.support(grid.extent_sigma);
  std::vector<double> z(grid.points + 1);
  for (int k = 0; k <= grid.points; ++k) z[k] = a + (b - a) * k / grid.points;
  return z;
}

double three_body_memory_bytes(int points) {
  const double nodes = points + 1.0;
  // three 27-component slabs, the exit face, the full two-body grid
  return nodes * nodes * sizeof(cplx) * (3 * 27 + 27 + 9);
}

namespace {

constexpr int kE = 0, kS = 2;

struct Discretization {
  const MediumParams& p;
  std::vector<double> z;
  std::vector<double> g;
  double h = 0.0;
  cplx a, ds;  // P and S diagonal entries
  double half_omega = 0.0;
  double cap = 0.0;

  Discretization(const MediumParams& params, const DensityProfile& prof,
                 const SimulationGrid& grid)
      : p(params), z(simulation_nodes(prof, grid)) {
    g.resize(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) g[k] = prof.coupling(z[k]);
    h = z[1] - z[0];
    a = -p.cap_delta() - p.delta_s;
    ds = -p.cap_delta_s();
    half_omega = 0.5 * p.omega_c;
    if (p.c6 != 0.0) {
      cplx chi0;
      try {
        chi0 = chi_bar(0.0, p);
      } catch (const PoleError&) {
        chi0 = 0.0;
      }
      cap = grid.potential_cap * (chi0 == cplx{} ? std::abs(p.c6) : 1.0 / std::abs(chi0));
    }
  }

  int m() const { return static_cast<int>(z.size()) - 1; }

  // BDF2 weights: derivative ≈ (α ψ_k - β ψ_{k-1} + γ ψ_{k-2})/h; backward Euler at k = 1.
  static double alpha(int k) { return k >= 2 ? 1.5 : 1.0; }
  static double beta(int k) { return k >= 2 ? 2.0 : 1.0; }
  static double gamma(int k) { return k >= 2 ? 0.5 : 0.0; }

  Eigen::Matrix3cd block(int k) const {
    Eigen::Matrix3cd t = Eigen::Matrix3cd::Zero();
    t(0, 0) = cplx{0.0, -p.light_speed * alpha(k) / h};
    t(0, 1) = t(1, 0) = g[k];
    t(1, 1) = a;
    t(1, 2) = t(2, 1) = half_omega;
    t(2, 2) = ds;
    return t;
  }

  double potential(int ki, int kj) const {
    if (p.c6 == 0.0) return 0.0;
    const double r = std::abs(z[ki] - z[kj]);
    const double r6 = std::pow(r, 6);
    const double v = r6 > 0.0 ? p.c6 / r6 : std::numeric_limits<double>::infinity();
    if (!(std::abs(v) <= cap)) return std::copysign(cap, p.c6);
    return v;
  }
};

std::vector<cplx> discrete_single(const Discretization& d) {
  const int m = d.m();
  std::vector<cplx> phi(3 * (m + 1), cplx{});
  phi[0] = 1.0;
  const cplx ic_h{0.0, d.p.light_speed / d.h};
  for (int k = 1; k <= m; ++k) {
    Eigen::Vector3cd rhs = Eigen::Vector3cd::Zero();
    rhs(0) = ic_h * (Discretization::gamma(k) * (k >= 2 ? phi[3 * (k - 2)] : cplx{}) -
                     Discretization::beta(k) * phi[3 * (k - 1)]);
    const Eigen::Vector3cd x = d.block(k).partialPivLu().solve(rhs);
    for (int c = 0; c < 3; ++c) phi[3 * k + c] = x(c);
  }
  return phi;
}

template <int N>
struct Pow3 {
  static constexpr int value = 3 * Pow3<N - 1>::value;
};
template <>
struct Pow3<0> {
  static constexpr int value = 1;
};

// March an N-excitation amplitude along slabs u = Σk_i. Points with a zero index
// carry the factorized boundary value from `lower`.
template <int N>
class Marcher {
 public:
  static constexpr int D = Pow3<N>::value;
  static constexpr int DL = Pow3<N - 1>::value;
  using Vec = Eigen::Matrix<cplx, D, 1>;
  using Mat = Eigen::Matrix<cplx, D, D>;

  Marcher(const Discretization& d, const std::vector<cplx>& lower, const SimulationGrid& grid)
      : d_(d), lower_(lower), grid_(grid), m_(d.m()), n_(m_ + 1) {
    std::size_t slab = D;
    for (int i = 0; i < N - 1; ++i) slab *= n_;
    for (auto& s : slabs_) s.assign(slab, cplx{});
    for (int k = 0; k <= m_; ++k) blocks_.push_back(d.block(k));
  }

  // Visitor receives (k, ψ(k)) for every point once its slab is complete.
  template <class Visit>
  void run(Visit&& visit) {
    const int u_max = N * m_;
    for (int u = 0; u <= u_max; ++u) {
      auto& slab = slabs_[u % 3];
      std::vector<std::array<int, N>> pts = points_on(u);
      if (grid_.reverse_sweep) std::reverse(pts.begin(), pts.end());
      auto work = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) solve_point(pts[i], u, slab);
      };
      const unsigned w = std::max(1u, grid_.workers);
      if (w == 1 || pts.size() < 64) {
        work(0, pts.size());
      } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (pts.size() + w - 1) / w;
        for (unsigned t = 0; t < w; ++t) {
          const std::size_t lo = t * chunk, hi = std::min(pts.size(), lo + chunk);
          if (lo < hi) pool.emplace_back(work, lo, hi);
        }
        for (auto& th : pool) th.join();
      }
      for (const auto& k : pts) visit(k, &slab[index(k)]);
      track_symmetry(pts, slab);
    }
  }

  double asymmetry() const { return scale_ > 0.0 ? asym_ / scale_ : 0.0; }

 private:
  std::size_t index(const std::array<int, N>& k) const {
    std::size_t idx = 0;
    for (int i = 0; i < N - 1; ++i) idx = idx * n_ + k[i];
    return idx * D;
  }

  std::vector<std::array<int, N>> points_on(int u) const {
    std::vector<std::array<int, N>> out;
    std::array<int, N> k{};
    auto rec = [&](auto&& self, int slot, int remaining) -> void {
      if (slot == N - 1) {
        if (remaining >= 0 && remaining <= m_) {
          k[slot] = remaining;
          out.push_back(k);
        }
        return;
      }
      for (int v = 0; v <= std::min(m_, remaining); ++v) {
        k[slot] = v;
        self(self, slot + 1, remaining - v);
      }
    };
    rec(rec, 0, u);
    return out;
  }

  static int digit(int alpha, int slot) {
    int div = 1;
    for (int i = slot + 1; i < N; ++i) div *= 3;
    return (alpha / div) % 3;
  }

  void boundary(const std::array<int, N>& k, cplx* out) const {
    int zero = 0;
    while (k[zero] != 0) ++zero;
    // Lower-order index over the remaining coordinates, slot order preserved.
    std::size_t lidx = 0;
    for (int i = 0; i < N; ++i)
      if (i != zero) lidx = lidx * n_ + k[i];
    lidx *= DL;
    for (int alpha = 0; alpha < D; ++alpha) {
      if (digit(alpha, zero) != kE) {
        out[alpha] = 0.0;
        continue;
      }
      int beta = 0;
      for (int i = 0; i < N; ++i)
        if (i != zero) beta = beta * 3 + digit(alpha, i);
      out[alpha] = lower_[lidx + beta];
    }
  }

  void solve_point(const std::array<int, N>& k, int u, std::vector<cplx>& slab) const {
    cplx* out = &slab[index(k)];
    for (int i = 0; i < N; ++i)
      if (k[i] == 0) {
        boundary(k, out);
        return;
      }
    Mat mat = Mat::Zero();
    for (int alpha = 0; alpha < D; ++alpha) {
      for (int s = 0; s < N; ++s) {
        const Eigen::Matrix3cd& t = blocks_[k[s]];
        const int as = digit(alpha, s);
        int stride = 1;
        for (int i = s + 1; i < N; ++i) stride *= 3;
        for (int b = 0; b < 3; ++b) {
          const cplx v = t(b, as);
          if (v != cplx{}) mat(alpha + (b - as) * stride, alpha) += v;
        }
      }
      for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j)
          if (digit(alpha, i) == kS && digit(alpha, j) == kS)
            mat(alpha, alpha) += d_.potential(k[i], k[j]);
    }
    Vec rhs = Vec::Zero();
    const cplx ic_h{0.0, d_.p.light_speed / d_.h};
    const auto& prev1 = slabs_[(u + 2) % 3];
    const auto& prev2 = slabs_[(u + 1) % 3];
    for (int s = 0; s < N; ++s) {
      std::array<int, N> k1 = k;
      k1[s] -= 1;
      const cplx* p1 = &prev1[index(k1)];
      const double b = Discretization::beta(k[s]), g = Discretization::gamma(k[s]);
      const cplx* p2 = nullptr;
      if (k[s] >= 2) {
        std::array<int, N> k2 = k;
        k2[s] -= 2;
        p2 = &prev2[index(k2)];
      }
      for (int alpha = 0; alpha < D; ++alpha) {
        if (digit(alpha, s) != kE) continue;
        rhs(alpha) += ic_h * ((p2 ? g * p2[alpha] : cplx{}) - b * p1[alpha]);
      }
    }
    const Vec x = mat.partialPivLu().solve(rhs);
    for (int alpha = 0; alpha < D; ++alpha) {
      if (!std::isfinite(x(alpha).real()) || !std::isfinite(x(alpha).imag())) {
        std::ostringstream msg;
        msg << "local algebraic solve singular at grid point (";
        for (int i = 0; i < N; ++i) msg << (i ? "," : "") << k[i];
        msg << "), delta=" << angular_to_mhz(d_.p.delta)
            << " MHz, delta_s=" << angular_to_mhz(d_.p.delta_s) << " MHz";
        throw PoleError(msg.str());
      }
      out[alpha] = x(alpha);
    }
  }

  // Swap adjacent slots (which generate all permutations) and compare.
  void track_symmetry(const std::vector<std::array<int, N>>& pts, const std::vector<cplx>& slab) {
    for (const auto& k : pts) {
      const cplx* a = &slab[index(k)];
      for (int s = 0; s + 1 < N; ++s) {
        std::array<int, N> ks = k;
        std::swap(ks[s], ks[s + 1]);
        const cplx* b = &slab[index(ks)];
        for (int alpha = 0; alpha < D; ++alpha) {
          const int as = digit(alpha, s), bs = digit(alpha, s + 1);
          int stride = 1;
          for (int i = s + 2; i < N; ++i) stride *= 3;
          const int swapped = alpha + (bs - as) * 3 * stride + (as - bs) * stride;
          asym_ = std::max(asym_, std::abs(a[alpha] - b[swapped]));
        }
      }
      for (int alpha = 0; alpha < D; ++alpha) scale_ = std::max(scale_, std::abs(a[alpha]));
    }
  }

  const Discretization& d_;
  const std::vector<cplx>& lower_;
  const SimulationGrid& grid_;
  int m_;
  std::size_t n_;
  std::array<std::vector<cplx>, 3> slabs_;
  std::vector<Eigen::Matrix3cd> blocks_;
  double asym_ = 0.0, scale_ = 0.0;
};

TwoBodySolution solve_two_impl(const Discretization& d, const SimulationGrid& grid) {
  TwoBodySolution sol;
  sol.single = discrete_single(d);
  const int m = d.m();
  const std::size_t n = m + 1;
  sol.psi.order = 2;
  sol.psi.z = d.z;
  sol.psi.data.assign(n * n * 9, cplx{});
  Marcher<2> march(d, sol.single, grid);
  march.run([&](const std::array<int, 2>& k, const cplx* v) {
    std::copy(v, v + 9, &sol.psi.data[(k[0] * n + k[1]) * 9]);
  });
  auto& c = sol.correlation;
  c.transmission = sol.single[3 * m];
  const double t2 = std::norm(c.transmission);
  c.g2_0 = std::norm(sol.psi.data[(m * n + m) * 9]) / (t2 * t2);
  c.g3_00 = std::numeric_limits<double>::quiet_NaN();
  c.eta3_00 = std::numeric_limits<double>::quiet_NaN();
  c.asymmetry = march.asymmetry();
  c.grid_points = m;
  return sol;
}

}  // namespace

TwoBodySolution solve_two(const MediumParams& params, const DensityProfile& profile,
                          const SimulationGrid& grid) {
  params.validate();
  const Discretization d(params, profile, grid);
  return solve_two_impl(d, grid);
}

ThreeBodySolution solve_three(const MediumParams& params, const DensityProfile& profile,
                              const SimulationGrid& grid) {
  params.validate();
  const double need = three_body_memory_bytes(grid.points);
  if (need > grid.memory_budget_bytes) {
    std::ostringstream msg;
    msg << "three-body march at M=" << grid.points << " needs about " << need / 1e6
        << " MB, above the " << grid.memory_budget_bytes / 1e6 << " MB budget";
    throw BudgetError(msg.str());
  }
  const Discretization d(params, profile, grid);
  ThreeBodySolution sol;
  sol.two = solve_two_impl(d, grid);
  const int m = d.m();
  const std::size_t n = m + 1;
  sol.exit_face.order = 3;
  sol.exit_face.face = true;
  sol.exit_face.z = d.z;
  sol.exit_face.data.assign(n * n * 27, cplx{});
  Marcher<3> march(d, sol.two.psi.data, grid);
  march.run([&](const std::array<int, 3>& k, const cplx* v) {
    if (k[0] == m) std::copy(v, v + 27, &sol.exit_face.data[(k[1] * n + k[2]) * 27]);
  });
  auto& c = sol.correlation;
  c = sol.two.correlation;
  const double t2 = std::norm(c.transmission);
  c.g3_00 = std::norm(sol.exit_face.data[(m * n + m) * 27]) / (t2 * t2 * t2);
  c.eta3_00 = 3.0 * c.g2_0 - c.g3_00 - 2.0;
  c.asymmetry = std::max(c.asymmetry, march.asymmetry());
  return sol;
}

namespace {

// Free evolution of a single excitation left behind in the medium. The photon
// field is slaved to the polarization, E(z) = -(i/c)∫g P dz'; the P and S
// amplitudes are stepped with classical RK4. Returns E at the exit per τ.
std::vector<cplx> evolve_exit_field(const MediumParams& p, const DensityProfile& prof,
                                    const std::vector<double>& z, std::vector<cplx> pol,
                                    std::vector<cplx> ryd, const std::vector<double>& tau,
                                    double horizon) {
  const std::size_t n = z.size();
  const double h = z[1] - z[0];
  std::vector<double> g(n);
  double g_int = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    g[k] = prof.coupling(z[k]);
    g_int += g[k] * h;
  }
  const cplx a = -p.cap_delta() - p.delta_s, ds = -p.cap_delta_s();
  const double half_om = 0.5 * p.omega_c, c = p.light_speed;
  auto field = [&](const std::vector<cplx>& pv, std::vector<cplx>& e) {
    e.assign(n, cplx{});
    cplx acc{};
    for (std::size_t k = 1; k < n; ++k) {
      acc += 0.5 * h * (g[k - 1] * pv[k - 1] + g[k] * pv[k]);
      e[k] = cplx{0.0, -1.0 / c} * acc;
    }
  };
  std::vector<cplx> e;
  auto deriv = [&](const std::vector<cplx>& pv, const std::vector<cplx>& sv,
                   std::vector<cplx>& dp, std::vector<cplx>& dsv) {
    field(pv, e);
    dp.resize(n);
    dsv.resize(n);
    const cplx mi{0.0, -1.0};
    for (std::size_t k = 0; k < n; ++k) {
      dp[k] = mi * (g[k] * e[k] + a * pv[k] + half_om * sv[k]);
      dsv[k] = mi * (half_om * pv[k] + ds * sv[k]);
    }
  };
  const double rate = std::abs(a) + std::abs(ds) + p.omega_c + g_int * g_int / (c * h * n) +
                      *std::max_element(g.begin(), g.end()) * g_int / c;
  const double dt_max = 1.0 / rate;

  std::vector<cplx> out(tau.size());
  double t_now = 0.0;
  std::vector<cplx> k1p, k1s, k2p, k2s, k3p, k3s, k4p, k4s, tp(n), ts(n);
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (tau[i] < t_now) throw ValidationError("tau", "delays must be non-decreasing");
    if (tau[i] > horizon)
      throw WindowError("requested delay beyond the supported horizon of " +
                        std::to_string(horizon) + " us");
    const double span = tau[i] - t_now;
    const int steps = span > 0.0 ? static_cast<int>(std::ceil(span / dt_max)) : 0;
    const double dt = steps ? span / steps : 0.0;
    for (int s = 0; s < steps; ++s) {
      deriv(pol, ryd, k1p, k1s);
      for (std::size_t k = 0; k < n; ++k) tp[k] = pol[k] + 0.5 * dt * k1p[k], ts[k] = ryd[k] + 0.5 * dt * k1s[k];
      deriv(tp, ts, k2p, k2s);
      for (std::size_t k = 0; k < n; ++k) tp[k] = pol[k] + 0.5 * dt * k2p[k], ts[k] = ryd[k] + 0.5 * dt * k2s[k];
      deriv(tp, ts, k3p, k3s);
      for (std::size_t k = 0; k < n; ++k) tp[k] = pol[k] + dt * k3p[k], ts[k] = ryd[k] + dt * k3s[k];
      deriv(tp, ts, k4p, k4s);
      for (std::size_t k = 0; k < n; ++k) {
        pol[k] += dt / 6.0 * (k1p[k] + 2.0 * k2p[k] + 2.0 * k3p[k] + k4p[k]);
        ryd[k] += dt / 6.0 * (k1s[k] + 2.0 * k2s[k] + 2.0 * k3s[k] + k4s[k]);
      }
    }
    t_now = tau[i];
    field(pol, e);
    out[i] = e.back();
  }
  return out;
}

}  // namespace

std::vector<double> g2_tau_profile(const TwoBodySolution& sol, const MediumParams& params,
                                   const DensityProfile& profile, const std::vector<double>& tau,
                                   const TauOptions& options) {
  const auto& z = sol.psi.z;
  const std::size_t n = z.size(), m = n - 1;
  const cplx t = sol.correlation.transmission;
  std::vector<cplx> pol(n), ryd(n);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx* row = &sol.psi.data[(m * n + k) * 9];  // slot 1 = E at the exit
    pol[k] = row[1] - t * sol.single[3 * k + 1];
    ryd[k] = row[2] - t * sol.single[3 * k + 2];
  }
  const cplx exact0 = sol.psi.data[(m * n + m) * 9] - t * t;
  const auto e = evolve_exit_field(params, profile, z, pol, ryd, tau, options.horizon_us);
  std::vector<double> out(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const cplx dev = tau[i] == 0.0 ? exact0 : e[i];
    out[i] = std::norm(t * t + dev) / std::norm(t * t);
  }
  return out;
}

std::vector<double> g3_tau_profile(const ThreeBodySolution& sol, const MediumParams& params,
                                   const DensityProfile& profile, const std::vector<double>& tau,
                                   const TauOptions& options) {
  const auto& z = sol.exit_face.z;
  const std::size_t n = z.size(), m = n - 1;
  const cplx t = sol.correlation.transmission;
  const cplx pair = sol.two.psi.data[(m * n + m) * 9];  // ψ_EE(z_max, z_max)
  std::vector<cplx> pol(n), ryd(n);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx* row = &sol.exit_face.data[(m * n + k) * 27];  // slots 1, 2 = E
    pol[k] = row[1] - pair * sol.two.single[3 * k + 1];
    ryd[k] = row[2] - pair * sol.two.single[3 * k + 2];
  }
  const cplx exact0 = sol.exit_face.data[(m * n + m) * 27] - pair * t;
  const auto e = evolve_exit_field(params, profile, z, pol, ryd, tau, options.horizon_us);
  const double norm = std::norm(t) * std::norm(t) * std::norm(t);
  std::vector<double> out(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const cplx dev = tau[i] == 0.0 ? exact0 : e[i];
    out[i] = std::norm(pair * t + dev) / norm;
  }
  return out;
}

CorrelationMap correlation_map(const std::vector<double>& delta_grid,
                               const std::vector<double>& delta_s_grid, const MediumParams& params,
                               const SimulationGrid& grid, unsigned workers,
                               const std::function<void(std::size_t, std::size_t)>& progress) {
  if (delta_grid.empty() || delta_s_grid.empty())
    throw ValidationError("grid", "correlation map needs at least one point per axis");
  const std::size_t nd = delta_grid.size(), ns = delta_s_grid.size(), total = nd * ns;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CorrelationMap map;
  map.delta_grid = delta_grid;
  map.delta_s_grid = delta_s_grid;
  map.g2.assign(nd, std::vector<double>(ns, nan));
  map.g3 = map.g2;
  map.eta3 = map.g2;
  std::vector<std::string> failure(total);
  const DensityProfile profile = make_profile(params);
  SimulationGrid point_grid = grid;
  point_grid.workers = 1;
  std::atomic<std::size_t> next{0}, finished{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t idx = next++; idx < total; idx = next++) {
      MediumParams p = params;
      p.delta = delta_grid[idx / ns];
      p.delta_s = delta_s_grid[idx % ns];
      try {
        const auto sol = solve_three(p, profile, point_grid);
        map.g2[idx / ns][idx % ns] = sol.correlation.g2_0;
        map.g3[idx / ns][idx % ns] = sol.correlation.g3_00;
        map.eta3[idx / ns][idx % ns] = sol.correlation.eta3_00;
      } catch (const std::exception& e) {
        failure[idx] = e.what();
      }
      const std::size_t k = ++finished;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(k, total);
      }
    }
  };
  const unsigned w = std::max(1u, std::min<unsigned>(workers, total));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < w; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t idx = 0; idx < total; ++idx)
    if (!failure[idx].empty()) map.holes.emplace_back(idx, failure[idx]);
  return map;
}

}  // namespace rydloss

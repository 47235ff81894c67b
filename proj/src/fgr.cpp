#include "rydloss/fgr.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "rydloss/interactions.hpp"
#include "rydloss/polaritons.hpp"

namespace rydloss {

const char* to_string(RateMethod m) {
  switch (m) {
    case RateMethod::Full: return "full";
    case RateMethod::Simplified: return "simplified";
    case RateMethod::Asymptotic: return "asymptotic";
  }
  return "?";
}

RateMethod rate_method_from_string(const std::string& name) {
  if (name == "full") return RateMethod::Full;
  if (name == "simplified") return RateMethod::Simplified;
  if (name == "asymptotic") return RateMethod::Asymptotic;
  throw ValidationError("method", "expected full|simplified|asymptotic, got '" + name + "'");
}

namespace {

constexpr double kPrefactor = kIncomingOrderings * kOutgoingOrderings * 3.0 / std::numbers::pi;

}  // namespace

double rate_prefactor() { return kPrefactor; }

double incoming_momentum(const MediumParams& params) {
  const LosslessDispersion disp(params);
  const auto [lo_e, hi_e] = disp.dark_range();
  if (!(lo_e < 0.0 && 0.0 < hi_e))
    throw WindowError("zero energy lies outside the dark branch; no incoming momentum");
  const double guess = disp.momentum_at(0.0);
  const double kc = params.g_peak * params.g_peak /
                    (params.light_speed * std::abs(params.cap_delta()));
  const double span = 10.0 * std::abs(guess) + kc;
  auto f = [&](double q) { return disp.omega(Branch::D, q); };
  const double a = -span, b = span;
  const double fa = f(a), fb = f(b);
  if ((fa < 0.0) == (fb < 0.0))
    throw WindowError("dark-branch zero not bracketed in the momentum scan window");
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(
      f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

namespace {

struct FullContext {
  MediumParams p;
  LosslessDispersion disp;
  FullRateOptions opt;
  double q0 = 0.0;
  double window = 0.0;
  cplx chi0;
  cplx wplus;
  double s0_sq = 0.0;
  double e_lo = 0.0, e_hi = 0.0;
  std::size_t roots = 0;
  std::size_t degenerate = 0;

  explicit FullContext(const MediumParams& params, const FullRateOptions& o)
      : p(params), disp(params), opt(o), wplus(omega_plus(params)) {}

  cplx vertex(double k, cplx omega) const {
    const cplx chi = opt.vertices_at_zero_energy ? chi0 : chi_bar(omega, p);
    return potential_ft_from_chi(k, chi, p.c6);
  }

  double weight(double qa, double qb) const {
    const double q2 = 3.0 * q0 - qa - qb;
    const BranchState u = resolve_branch(Branch::U, q2, p);
    const BranchState da = resolve_branch(Branch::D, qa, p);
    const BranchState db = resolve_branch(Branch::D, qb, p);
    const cplx eu = opt.flat_vertex_energies ? -wplus : -u.omega;
    const cplx eb = opt.flat_vertex_energies ? 2.0 * wplus : -db.omega;
    cplx amp{};
    if (!opt.only_term || *opt.only_term == 'A')
      amp += vertex(q2 - q0, 0.0) * g_ss(PropagatorQuery::finite(2.0 * q0 - q2, eu), p) *
             vertex(qa - q0, eu);
    if (!opt.only_term || *opt.only_term == 'B')
      amp += vertex(qb - q0, 0.0) * g_ss(PropagatorQuery::finite(2.0 * q0 - qb, eb), p) *
             vertex(q2 - q0, eb);
    return s0_sq * s0_sq * s0_sq * std::norm(da.rydberg) * std::norm(db.rydberg) *
           std::norm(u.rydberg) * std::norm(amp);
  }

  double energy_of(double t) const { return e_lo + (e_hi - e_lo) * 0.5 * (1.0 + std::tanh(t)); }

  struct Sample {
    double value = 0.0;
    int kept = 0;
  };

  // Sum over conservation roots for fixed q₁, symmetrized in the two dark legs.
  // Only roots where the q₃-slope dominates are kept; the mirrored half of the
  // manifold is covered by the swapped weight.
  Sample integrand(double q1, bool weigh = true) {
    const double w1 = disp.omega(Branch::D, q1);
    const double v1 = disp.at(Branch::D, q1).velocity;
    auto F = [&](double t) {
      const double e = energy_of(t);
      const double q3 = disp.momentum_at(e);
      return disp.omega(Branch::U, 3.0 * q0 - q1 - q3) + w1 + e;
    };
    const int n = opt.energy_scan;
    Sample out;
    double t0 = -12.0, f0 = F(t0);
    for (int i = 1; i <= n; ++i) {
      const double t1 = -12.0 + 24.0 * i / n;
      const double f1 = F(t1);
      if ((f0 < 0.0) != (f1 < 0.0)) {
        std::uintmax_t iters = 100;
        const auto r = boost::math::tools::toms748_solve(
            F, t0, t1, f0, f1, boost::math::tools::eps_tolerance<double>(48), iters);
        const double q3 = disp.momentum_at(energy_of(0.5 * (r.first + r.second)));
        if (std::abs(q3) <= window) {
          const double q2 = 3.0 * q0 - q1 - q3;
          const double vu = disp.at(Branch::U, q2).velocity;
          const double d3 = disp.at(Branch::D, q3).velocity - vu;
          const double d1 = v1 - vu;
          if (std::abs(d3) >= std::abs(d1)) {
            ++out.kept;
            if (weigh) {
              ++roots;
              if (std::abs(d3) < 1e-9 * p.light_speed) ++degenerate;
              out.value += (weight(q1, q3) + (opt.flat_leg_first_only ? 0.0 : weight(q3, q1))) /
                           std::abs(d3);
            }
          }
        }
      }
      t0 = t1;
      f0 = f1;
    }
    return out;
  }

  // Points where the kept-root set changes; the integrand jumps there.
  std::vector<double> breakpoints(int samples) {
    std::vector<double> xs(samples);
    const double s_max = std::asinh(1e3);  // finest spacing ~window/1e3 near q₀
    for (int i = 0; i < samples; ++i) {
      const double s = -s_max + 2.0 * s_max * i / (samples - 1);
      xs[i] = q0 + (window - std::abs(q0)) * std::sinh(s) / std::sinh(s_max);
    }
    xs.front() = -window;
    xs.back() = window;
    std::vector<int> kept(samples);
    for (int i = 0; i < samples; ++i) kept[i] = integrand(xs[i], false).kept;
    std::vector<double> out{-window};
    for (int i = 1; i < samples; ++i) {
      if (kept[i] == kept[i - 1]) continue;
      double a = xs[i - 1], b = xs[i];
      const int ka = kept[i - 1];
      for (int it = 0; it < 60 && b - a > 1e-13 * window; ++it) {
        const double m = 0.5 * (a + b);
        if (integrand(m, false).kept == ka) a = m; else b = m;
      }
      out.push_back(0.5 * (a + b));
    }
    out.push_back(window);
    return out;
  }
};

RateResult zero_rate(RateMethod m, const std::string& why) {
  RateResult r;
  r.beta = 0.0;
  r.magnitude = 0.0;
  r.method = m;
  r.diagnostics.note = why;
  return r;
}

}  // namespace

RateResult beta_full(const MediumParams& params, const FullRateOptions& options) {
  if (params.c6 == 0.0) return zero_rate(RateMethod::Full, "interactions switched off");
  FullContext ctx(params, options);
  ctx.q0 = incoming_momentum(params);
  ctx.chi0 = chi_bar(0.0, params);
  const double rb = blockade_radius(0.0, params);
  ctx.window = options.window_in_rb / rb;
  ctx.s0_sq = std::norm(resolve_branch(Branch::D, ctx.q0, params).rydberg);
  std::tie(ctx.e_lo, ctx.e_hi) = ctx.disp.dark_range();

  double err = 0.0, integral = 0.0;
  const auto edges = ctx.breakpoints(options.breakpoint_scan);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    if (!(edges[i + 1] > edges[i])) continue;
    double e = 0.0;
    integral += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double q1) { return ctx.integrand(q1).value; }, edges[i], edges[i + 1],
        static_cast<unsigned>(options.max_depth), options.tolerance, &e);
    err += e;
  }

  RateResult r;
  r.method = RateMethod::Full;
  r.beta = kPrefactor * integral;
  r.magnitude = std::abs(r.beta);
  auto& d = r.diagnostics;
  d.error_estimate = kPrefactor * err;
  d.conservation_roots = ctx.roots;
  d.near_degenerate_roots = ctx.degenerate;
  d.q_min = -ctx.window;
  d.q_max = ctx.window;
  d.incoming_momentum = ctx.q0;
  const double kc = params.g_peak * params.g_peak /
                    (params.light_speed * std::abs(params.cap_delta()));
  d.flat_regime = 1.0 / rb > kc;
  if (params.delta_s != 0.0) d.note = "incoming legs generalized to q0 != 0";
  if (ctx.roots == 0) d.note = "no energy-conservation roots in the momentum window";
  return r;
}

RateResult beta_simplified(const MediumParams& params, double window_in_rb) {
  if (params.c6 == 0.0) return zero_rate(RateMethod::Simplified, "interactions switched off");
  const cplx wp = omega_plus(params);
  const cplx inv_vg = inverse_group_velocity_at(-2.0 * wp, params);
  const cplx g = g_ss(PropagatorQuery::infinite(-wp), params);
  const cplx chi0 = chi_bar(0.0, params);
  const cplx chip = chi_bar(-wp, params);
  const double rb = blockade_radius(0.0, params);
  const double window = window_in_rb / rb;
  auto f = [&](double q) {
    return std::norm(potential_ft_from_chi(q, chi0, params.c6) *
                     potential_ft_from_chi(q, chip, params.c6));
  };
  double err = 0.0;
  const double half = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, 0.0, window, 20, 1e-9, &err);
  if (!std::isfinite(half) || err > 1e-6 * std::abs(half)) {
    std::ostringstream msg;
    msg << "simplified rate quadrature not converged (estimate " << err << ", tail bound "
        << f(window) * rb << ")";
    throw ConvergenceError(msg.str());
  }
  const cplx factor = kPrefactor * inv_vg * std::norm(g) * 2.0;
  RateResult r;
  r.method = RateMethod::Simplified;
  r.beta = factor * half;
  r.magnitude = std::abs(r.beta);
  auto& d = r.diagnostics;
  d.error_estimate = std::abs(factor) * err;
  d.tail_bound = std::abs(factor) * f(window) * rb;
  d.q_min = -window;
  d.q_max = window;
  const double kc = params.g_peak * params.g_peak /
                    (params.light_speed * std::abs(params.cap_delta()));
  d.flat_regime = 1.0 / rb > kc;
  if (!d.flat_regime) d.note = "momentum transfer 1/r_b below k_c: flat-dispersion premise fails";
  return r;
}

namespace {

double asymptotic_shape(const MediumParams& p) {
  const DerivedScales s = derive_scales(p, chi_bar(0.0, p));
  return s.phi * s.r_b * s.r_b * p.omega_c * p.omega_c / p.delta;
}

std::mutex g_norm_mutex;
std::map<std::array<double, 9>, double> g_norm_cache;

double asymptotic_normalization(const MediumParams& p) {
  const std::array<double, 9> key{p.g_peak, p.omega_c, p.gamma_p, p.gamma_s, p.c6,
                                  p.od,     p.sigma_z, p.light_speed,
                                  static_cast<double>(p.profile)};
  {
    std::lock_guard lock(g_norm_mutex);
    if (auto it = g_norm_cache.find(key); it != g_norm_cache.end()) return it->second;
  }
  MediumParams ref = p;
  ref.delta = 8.0 * p.omega_c;
  ref.delta_s = 0.0;
  const double k = beta_simplified(ref).magnitude / asymptotic_shape(ref);
  std::lock_guard lock(g_norm_mutex);
  g_norm_cache[key] = k;
  return k;
}

}  // namespace

RateResult beta_asymptotic(const MediumParams& params) {
  if (params.c6 == 0.0) return zero_rate(RateMethod::Asymptotic, "interactions switched off");
  RateResult r;
  r.method = RateMethod::Asymptotic;
  r.beta = asymptotic_normalization(params) * asymptotic_shape(params);
  r.magnitude = std::abs(r.beta);
  if (params.omega_c / std::abs(params.delta) > 0.5)
    r.diagnostics.note = "outside the far-detuned regime (Omega_c/|delta| > 0.5)";
  return r;
}

RateResult beta(const MediumParams& params, RateMethod method) {
  switch (method) {
    case RateMethod::Full: return beta_full(params);
    case RateMethod::Simplified: return beta_simplified(params);
    case RateMethod::Asymptotic: return beta_asymptotic(params);
  }
  throw ValidationError("method", "unknown rate method");
}

namespace {

std::string checkpoint_key(const std::vector<double>& dg, const std::vector<double>& sg,
                           const MediumParams& p, RateMethod m) {
  std::ostringstream os;
  os.precision(17);
  os << "rydloss-checkpoint " << to_string(m) << ' ' << dg.size() << ' ' << sg.size();
  for (double x : dg) os << ' ' << x;
  for (double x : sg) os << ' ' << x;
  os << ' ' << p.g_peak << ' ' << p.omega_c << ' ' << p.gamma_p << ' ' << p.gamma_s << ' '
     << p.c6 << ' ' << p.od << ' ' << p.sigma_z << ' ' << p.light_speed;
  return os.str();
}

}  // namespace

RateMap beta_map(const std::vector<double>& delta_grid, const std::vector<double>& delta_s_grid,
                 const MediumParams& params, RateMethod method, const MapOptions& options) {
  if (delta_grid.empty() || delta_s_grid.empty())
    throw ValidationError("grid", "rate map needs at least one delta and one delta_s");
  const std::size_t nd = delta_grid.size(), ns = delta_s_grid.size(), total = nd * ns;
  RateMap map;
  map.delta_grid = delta_grid;
  map.delta_s_grid = delta_s_grid;
  map.values.assign(nd, std::vector<RateResult>(ns));
  std::vector<char> done(total, 0);
  std::vector<std::string> failure(total);

  std::ofstream ckpt;
  std::mutex ckpt_mutex;
  if (!options.checkpoint_path.empty()) {
    const std::string key = checkpoint_key(delta_grid, delta_s_grid, params, method);
    std::ifstream in(options.checkpoint_path);
    std::string header;
    if (in && std::getline(in, header)) {
      if (header != key)
        throw ValidationError("checkpoint", "file belongs to a different grid or parameter set");
      std::string line;
      while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::size_t idx;
        double re, im, err;
        if (!(ls >> idx >> re >> im >> err) || idx >= total) continue;  // torn last line
        RateResult& r = map.values[idx / ns][idx % ns];
        r.beta = {re, im};
        r.magnitude = std::abs(r.beta);
        r.method = method;
        r.diagnostics.error_estimate = err;
        r.diagnostics.note = "restored from checkpoint";
        done[idx] = 1;
      }
      in.close();
      ckpt.open(options.checkpoint_path, std::ios::app);
    } else {
      ckpt.open(options.checkpoint_path, std::ios::trunc);
      ckpt << key << '\n';
      ckpt.flush();
    }
    ckpt.precision(17);
  }

  std::atomic<std::size_t> next{0}, finished{0};
  auto worker = [&] {
    for (std::size_t idx = next++; idx < total; idx = next++) {
      if (done[idx]) {
        ++finished;
        continue;
      }
      MediumParams p = params;
      p.delta = delta_grid[idx / ns];
      p.delta_s = delta_s_grid[idx % ns];
      RateResult& r = map.values[idx / ns][idx % ns];
      try {
        r = beta(p, method);
      } catch (const std::exception& e) {
        r = RateResult{};
        r.method = method;
        r.beta = {std::numeric_limits<double>::quiet_NaN(), 0.0};
        r.magnitude = std::numeric_limits<double>::quiet_NaN();
        r.diagnostics.note = e.what();
        failure[idx] = e.what();
      }
      if (ckpt.is_open() && failure[idx].empty()) {
        std::lock_guard lock(ckpt_mutex);
        ckpt << idx << ' ' << r.beta.real() << ' ' << r.beta.imag() << ' '
             << r.diagnostics.error_estimate << '\n';
        ckpt.flush();
      }
      const std::size_t k = ++finished;
      if (options.progress) {
        std::lock_guard lock(ckpt_mutex);
        options.progress(k, total);
      }
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(options.workers, total));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t idx = 0; idx < total; ++idx)
    if (!failure[idx].empty()) map.holes.emplace_back(idx, failure[idx]);
  return map;
}

std::vector<LocusPoint> beta_max_locus(const std::vector<double>& delta_s_grid,
                                       const MediumParams& params, double delta_lo,
                                       double delta_hi, RateMethod method, int coarse_points) {
  if (!(delta_hi > delta_lo) || coarse_points < 3)
    throw ValidationError("delta", "locus scan window must be a non-empty interval");
  std::vector<LocusPoint> out;
  for (double ds : delta_s_grid) {
    MediumParams p = params;
    p.delta_s = ds;
    auto mag = [&](double d) {
      MediumParams q = p;
      q.delta = d;
      return beta(q, method).magnitude;
    };
    std::vector<double> xs(coarse_points), ys(coarse_points);
    for (int i = 0; i < coarse_points; ++i) {
      xs[i] = delta_lo + (delta_hi - delta_lo) * i / (coarse_points - 1);
      ys[i] = mag(xs[i]);
    }
    LocusPoint lp;
    lp.delta_s = ds;
    double best_val = -1.0;
    const double tol = 1e-3 * params.omega_c;
    for (int i = 0; i < coarse_points; ++i) {
      const bool left = i == 0 || ys[i] > ys[i - 1];
      const bool right = i + 1 == coarse_points || ys[i] >= ys[i + 1];
      if (!(left && right)) continue;
      double x = xs[i], y = ys[i];
      if (i > 0 && i + 1 < coarse_points) {
        std::uintmax_t iters = 200;
        const int bits = static_cast<int>(
            std::ceil(-std::log2(tol / std::max(std::abs(xs[i + 1]), 1.0)))) + 2;
        const auto m = boost::math::tools::brent_find_minima(
            [&](double d) { return -mag(d); }, xs[i - 1], xs[i + 1], std::min(bits, 52), iters);
        x = m.first;
        y = -m.second;
      }
      lp.local_maxima.push_back(x);
      if (y > best_val) {
        best_val = y;
        lp.delta_star = x;
      }
    }
    lp.multimodal = lp.local_maxima.size() > 1;
    out.push_back(lp);
  }
  return out;
}

}  // namespace rydloss

#include "rydloss/interactions.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <sstream>

#include "rydloss/polaritons.hpp"

namespace rydloss {

const char* to_string(ResonanceMethod m) {
  return m == ResonanceMethod::ClosedForm ? "closed_form" : "numeric_root";
}

namespace {

struct ChiParts {
  cplx num, den;
  double scale;
};

ChiParts chi_parts(cplx omega, cplx dt, cplx ds, double om2) {
  const cplx nu = omega + 2.0 * ds;
  ChiParts c;
  c.num = -om2 + 4.0 * dt * dt + 6.0 * dt * nu + 2.0 * nu * nu;
  const cplx inner = nu * (2.0 * dt + nu);
  c.den = 2.0 * (dt + nu) * (inner - om2);
  c.scale = 2.0 * std::abs(dt + nu) * (std::abs(inner) + om2);
  return c;
}

}  // namespace

cplx chi_bar(cplx omega, const MediumParams& p, DeltaConvention convention) {
  const cplx dt = convention == DeltaConvention::Tilde ? p.cap_delta_tilde() : p.cap_delta();
  const ChiParts c = chi_parts(omega, dt, p.cap_delta_s(), p.omega_c * p.omega_c);
  if (std::abs(c.den) <= 1e-12 * c.scale) {
    std::ostringstream msg;
    msg << "chi_bar pole at omega=" << omega << " rad/us";
    throw PoleError(msg.str());
  }
  return c.num / c.den;
}

PotentialSample effective_potential(cplx omega, double r, const MediumParams& p) {
  if (!(r > 0.0)) throw ValidationError("r", "must be positive");
  const cplx chi = chi_bar(omega, p);
  const double r6 = std::pow(r, 6);
  const cplx den = r6 - chi * p.c6;
  if (std::abs(den) <= 1e-14 * (r6 + std::abs(chi * p.c6)))
    throw PoleError("effective potential pole r^6 = chi*C6 at r=" + std::to_string(r));
  return {r, p.c6 / den};
}

double blockade_radius(cplx omega, const MediumParams& p) {
  const cplx chi = chi_bar(omega, p);
  if (chi == cplx{})
    throw ResonanceError("chi_bar vanishes: blockade radius is zero at this resonance");
  return std::pow(std::abs(p.c6 * chi), 1.0 / 6.0);
}

namespace {

cplx residue_sum(double q, cplx chi, double c6) {
  const cplx a6 = chi * c6;  // poles at r⁶ = χ̄C₆
  const cplx base = std::log(a6) / 6.0;
  const double mod = std::abs(a6);
  cplx acc{};
  const bool upper = q <= 0.0;
  for (int k = 0; k < 6; ++k) {
    const cplx r = std::exp(base + cplx{0.0, kTwoPi * k / 6.0});
    if (std::abs(r.imag()) < 1e-8 * std::pow(mod, 1.0 / 6.0))
      throw PoleError("potential pole within 1e-8 of the real axis; the contour closure "
                      "is invalid, add linewidth");
    if ((r.imag() > 0.0) != upper) continue;
    const cplx r5 = r * r * r * r * r;
    acc += std::exp(cplx{0.0, -q} * r) * c6 / (6.0 * r5);
  }
  const cplx two_pi_i{0.0, kTwoPi};
  return upper ? two_pi_i * acc : -two_pi_i * acc;
}

cplx quadrature_ft(double q, cplx chi, double c6) {
  const cplx a6 = chi * c6;
  auto f = [&](double r) {
    const double r3 = r * r * r;
    return c6 / (r3 * r3 - a6);
  };
  const double scale = std::pow(std::abs(a6), 1.0 / 6.0);
  const double qa = std::abs(q);
  if (qa * scale < 1e-12) {
    boost::math::quadrature::exp_sinh<double> integrator;
    const double re = integrator.integrate([&](double r) { return f(r).real(); }, 1e-12);
    const double im = integrator.integrate([&](double r) { return f(r).imag(); }, 1e-12);
    return 2.0 * cplx{re, im};
  }
  boost::math::quadrature::ooura_fourier_cos<double> integrator(1e-12, 10);
  const auto re = integrator.integrate([&](double r) { return f(r).real(); }, qa);
  const auto im = integrator.integrate([&](double r) { return f(r).imag(); }, qa);
  return 2.0 * cplx{re.first, im.first};
}

}  // namespace

cplx potential_ft_from_chi(double q, cplx chi, double c6) {
  if (c6 == 0.0) return {};
  return residue_sum(q, chi, c6);
}

cplx potential_ft(double q, cplx omega, const MediumParams& p, FourierMethod method) {
  if (p.c6 == 0.0) return {};
  const cplx chi = chi_bar(omega, p);
  return method == FourierMethod::Residues ? residue_sum(q, chi, p.c6)
                                           : quadrature_ft(q, chi, p.c6);
}

cplx potential_ft_zero_closed_form(cplx omega, const MediumParams& p) {
  const cplx chi = chi_bar(omega, p);
  const cplx a = std::exp(std::log(-chi * p.c6) / 6.0);
  return (kTwoPi / 3.0) * p.c6 / std::pow(a, 5);
}

namespace {

// Lossless numerators whose zeros in δ define the two resonances.
double chi0_numerator(double delta, double omega_c, double delta_s) {
  const double nu = 2.0 * delta_s;
  return -omega_c * omega_c + 4.0 * delta * delta + 6.0 * delta * nu + 2.0 * nu * nu;
}

double chi_plus_numerator(double delta, const MediumParams& base) {
  MediumParams p = base.lossless();
  p.delta = delta;
  const double nu = -omega_plus(p).real() + 2.0 * p.delta_s;
  return -p.omega_c * p.omega_c + 4.0 * delta * delta + 6.0 * delta * nu + 2.0 * nu * nu;
}

template <class F>
double bracketed_root(F f, double lo, double hi, double guess, const char* what) {
  constexpr int kScan = 600;
  double best = 0.0, best_dist = INFINITY;
  double x0 = lo, f0 = f(lo);
  for (int i = 1; i <= kScan; ++i) {
    const double x1 = lo + (hi - lo) * i / kScan;
    const double f1 = f(x1);
    if ((f0 < 0.0) != (f1 < 0.0)) {
      std::uintmax_t iters = 200;
      auto tol = boost::math::tools::eps_tolerance<double>(50);
      const auto r = boost::math::tools::toms748_solve(f, x0, x1, f0, f1, tol, iters);
      const double x = 0.5 * (r.first + r.second);
      if (std::abs(x - guess) < best_dist) {
        best_dist = std::abs(x - guess);
        best = x;
      }
    }
    x0 = x1;
    f0 = f1;
  }
  if (!std::isfinite(best_dist))
    throw WindowError(std::string("no sign change bracketing the ") + what + " resonance");
  return best;
}

}  // namespace

ResonanceCurves resonance_detunings(const MediumParams& p, ResonanceMethod method) {
  const double om = p.omega_c, ds = p.delta_s;
  const double d0_cf = 0.5 * om - 1.5 * ds;
  const double dp_cf = 0.5 * std::sqrt((std::sqrt(33.0) + 6.0) / 6.0) * om -
                       (std::sqrt(33.0) + 209.0) / 264.0 * ds;
  if (method == ResonanceMethod::ClosedForm) return {d0_cf, dp_cf, method};
  const double lo = 1e-3 * om, hi = 3.0 * om;
  const double d0 =
      bracketed_root([&](double d) { return chi0_numerator(d, om, ds); }, lo, hi, d0_cf, "delta_0");
  const double dp =
      bracketed_root([&](double d) { return chi_plus_numerator(d, p); }, lo, hi, dp_cf, "delta_+");
  return {d0, dp, method};
}

BroadenedResonances broadened_resonances(const MediumParams& p, double lo, double hi,
                                         int samples) {
  std::vector<double> xs(samples), a(samples), b(samples);
  for (int i = 0; i < samples; ++i) {
    MediumParams q = p;
    q.delta = lo + (hi - lo) * i / (samples - 1);
    xs[i] = q.delta;
    a[i] = std::abs(chi_bar(0.0, q));
    b[i] = std::abs(chi_bar(-omega_plus(q), q));
  }
  BroadenedResonances out;
  for (int i = 1; i + 1 < samples; ++i) {
    if (a[i] < a[i - 1] && a[i] <= a[i + 1]) out.chi0_minima.push_back(xs[i]);
    if (b[i] < b[i - 1] && b[i] <= b[i + 1]) out.chi_plus_minima.push_back(xs[i]);
  }
  return out;
}

InverseChiPlus inv_chi_at_minus_omega_plus(const MediumParams& p) {
  const cplx d = p.cap_delta_tilde();
  const cplx ds = p.cap_delta_s();
  const double om2 = p.omega_c * p.omega_c;
  const cplx root = std::sqrt((d + ds) * (d + ds) + om2);
  // The closed form as usually written gives -1/χ̄(-ω₊); flip the sign.
  const cplx num = (-3.0 * d + root - 3.0 * ds) *
                   (-3.0 * d * d + 3.0 * d * root + 3.0 * ds * root - 10.0 * d * ds -
                    5.0 * ds * ds + 1.5 * om2);
  const cplx den = 2.0 * (-8.0 * d * d + 4.0 * d * root + 3.0 * ds * root - 13.0 * d * ds -
                          5.0 * ds * ds + 0.5 * om2);
  const cplx root0 = std::sqrt(d * d + om2);
  const cplx num0 = (root0 - 3.0 * d) * (3.0 * d * root0 - 3.0 * d * d + 1.5 * om2);
  const cplx den0 = 2.0 * (4.0 * d * root0 - 8.0 * d * d + 0.5 * om2);
  InverseChiPlus out;
  out.value = -num / den;
  out.value_ds0 = -num0 / den0;
  out.cancellation = root0 - 3.0 * d;
  return out;
}

}  // namespace rydloss

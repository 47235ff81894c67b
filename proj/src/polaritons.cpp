#include "rydloss/polaritons.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rydloss {

const char* to_string(Branch b) {
  switch (b) {
    case Branch::L: return "L";
    case Branch::D: return "D";
    case Branch::U: return "U";
  }
  return "?";
}

Matrix3c hamiltonian(double q, const MediumParams& p) {
  const cplx cap_delta = p.cap_delta();
  const cplx cap_delta_s = p.cap_delta_s();
  Matrix3c h = Matrix3c::Zero();
  h(0, 0) = p.light_speed * q;
  h(0, 1) = h(1, 0) = p.g_peak;
  h(1, 1) = -cap_delta - p.delta_s;
  h(1, 2) = h(2, 1) = 0.5 * p.omega_c;
  h(2, 2) = -cap_delta_s;
  return h;
}

namespace {

struct Eig3 {
  std::array<cplx, 3> values;
  std::array<Vector3c, 3> vectors;
};

Eig3 eig3(const Matrix3c& h) {
  Eigen::ComplexEigenSolver<Matrix3c> solver(h, true);
  if (solver.info() != Eigen::Success) throw ConvergenceError("3x3 eigensolver failed");
  Eig3 out;
  for (int j = 0; j < 3; ++j) {
    out.values[j] = solver.eigenvalues()(j);
    out.vectors[j] = solver.eigenvectors().col(j).normalized();
  }
  return out;
}

double overlap(const Vector3c& a, const Vector3c& b) { return std::abs(a.dot(b)); }

constexpr std::array<std::array<int, 3>, 6> kPermutations{{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

// Assignment maximizing the summed overlap with the previous branch vectors.
std::array<int, 3> best_assignment(const std::array<Vector3c, 3>& prev, const Eig3& next,
                                   double* min_overlap) {
  double ov[3][3];
  for (int b = 0; b < 3; ++b)
    for (int j = 0; j < 3; ++j) ov[b][j] = overlap(prev[b], next.vectors[j]);
  double best = -1.0;
  std::array<int, 3> choice{0, 1, 2};
  for (const auto& perm : kPermutations) {
    const double s = ov[0][perm[0]] + ov[1][perm[1]] + ov[2][perm[2]];
    if (s > best) {
      best = s;
      choice = perm;
    }
  }
  *min_overlap = std::min({ov[0][choice[0]], ov[1][choice[1]], ov[2][choice[2]]});
  return choice;
}

}  // namespace

BranchSpectrum branch_spectrum(std::span<const double> q_grid, const MediumParams& params,
                               double q0) {
  const std::size_t n = q_grid.size();
  if (n == 0) throw ValidationError("q_grid", "empty momentum grid");
  for (std::size_t i = 1; i < n; ++i)
    if (!(q_grid[i] > q_grid[i - 1]))
      throw ValidationError("q_grid", "must be strictly increasing");

  BranchSpectrum s;
  s.q.assign(q_grid.begin(), q_grid.end());
  for (int b = 0; b < 3; ++b) {
    s.omega[b].resize(n);
    s.rydberg_overlap[b].resize(n);
    s.eigenvectors[b].resize(n);
  }
  s.seed_index = static_cast<std::size_t>(
      std::min_element(q_grid.begin(), q_grid.end(),
                       [q0](double a, double b) { return std::abs(a - q0) < std::abs(b - q0); }) -
      q_grid.begin());

  auto store = [&](std::size_t i, const Eig3& e, const std::array<int, 3>& slot) {
    for (int b = 0; b < 3; ++b) {
      s.omega[b][i] = e.values[slot[b]];
      s.eigenvectors[b][i] = e.vectors[slot[b]];
      s.rydberg_overlap[b][i] = e.vectors[slot[b]](2);
    }
  };

  // Seed: D nearest zero energy, the other two ordered by real part.
  const Eig3 seed = eig3(hamiltonian(q_grid[s.seed_index], params));
  int d = 0;
  for (int j = 1; j < 3; ++j)
    if (std::abs(seed.values[j]) < std::abs(seed.values[d])) d = j;
  int lo = (d + 1) % 3, hi = (d + 2) % 3;
  if (seed.values[lo].real() > seed.values[hi].real()) std::swap(lo, hi);
  store(s.seed_index, seed, {lo, d, hi});

  auto step = [&](std::size_t from, std::size_t to) {
    std::array<Vector3c, 3> prev{s.eigenvectors[0][from], s.eigenvectors[1][from],
                                 s.eigenvectors[2][from]};
    const Eig3 e = eig3(hamiltonian(q_grid[to], params));
    double worst = 0.0;
    const auto slot = best_assignment(prev, e, &worst);
    if (worst < 0.5) {
      std::ostringstream msg;
      msg << "branch tracking ambiguous between q=" << q_grid[from] << " and q=" << q_grid[to]
          << " 1/um (overlap " << worst << "); densify the grid there";
      throw TrackingError(msg.str());
    }
    store(to, e, slot);
  };
  for (std::size_t i = s.seed_index + 1; i < n; ++i) step(i - 1, i);
  for (std::size_t i = s.seed_index; i-- > 0;) step(i + 1, i);
  return s;
}

VelocityEstimate group_velocity(Branch branch, double q, const BranchSpectrum& spectrum,
                                const MediumParams& params) {
  const auto& grid = spectrum.q;
  if (grid.size() < 3 || !(q > grid.front()) || !(q < grid.back()))
    throw ValidationError("q", "group velocity requested outside the grid interior; "
                               "extrapolation refused");
  const auto it = std::upper_bound(grid.begin(), grid.end(), q);
  const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  const std::size_t near = (q - grid[hi - 1] < grid[hi] - q) ? hi - 1 : hi;
  const int b = static_cast<int>(branch);

  const Vector3c& ref = spectrum.eigenvectors[b][near];
  auto pick = [&](double x, const Vector3c& like) {
    const Eig3 e = eig3(hamiltonian(x, params));
    int best = 0;
    for (int j = 1; j < 3; ++j)
      if (overlap(like, e.vectors[j]) > overlap(like, e.vectors[best])) best = j;
    return std::pair{e.values[best], e.vectors[best]};
  };
  const Vector3c here = pick(q, ref).second;
  auto stencil = [&](double h) {
    const cplx fp1 = pick(q + h, here).first, fm1 = pick(q - h, here).first;
    const cplx fp2 = pick(q + 2 * h, here).first, fm2 = pick(q - 2 * h, here).first;
    return (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h);
  };

  // Start from a fraction of the local spacing and halve until two estimates agree.
  double h = 0.25 * (grid[hi] - grid[hi - 1]);
  const double scale = params.g_peak / params.light_speed;
  h = std::min(h, 0.05 * scale);
  cplx prev = stencil(h);
  double err = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 30; ++iter) {
    h *= 0.5;
    const cplx cur = stencil(h);
    err = std::abs(cur - prev);
    prev = cur;
    if (err <= 1e-8 * std::abs(cur)) break;
  }
  if (err > 1e-6 * std::abs(prev))
    throw ConvergenceError("group velocity stencil did not reach 1e-6 relative accuracy");
  return {prev, err};
}

cplx omega_plus(const MediumParams& p) {
  const cplx d_end = p.cap_delta_tilde();
  const cplx ds_end = p.cap_delta_s();
  const double om2 = p.omega_c * p.omega_c;
  // Continue the square root along a straight path from the lossless point.
  auto radicand = [&](double t) {
    const cplx d{p.delta, t * d_end.imag()};
    const cplx ds{p.delta_s, t * ds_end.imag()};
    return (d + ds) * (d + ds) + om2;
  };
  cplx root = std::sqrt(radicand(0.0));
  if (root.real() < 0) root = -root;
  constexpr int kSteps = 64;
  for (int k = 1; k <= kSteps; ++k) {
    cplx cand = std::sqrt(radicand(static_cast<double>(k) / kSteps));
    if (std::abs(cand - root) > std::abs(-cand - root)) cand = -cand;
    root = cand;
  }
  return 0.5 * (-d_end + root + ds_end);
}

cplx g_ss(const PropagatorQuery& query, const MediumParams& p) {
  const cplx w = query.omega;
  const cplx dt = p.cap_delta_tilde();
  const cplx ds = p.cap_delta_s();
  const double g2 = p.g_peak * p.g_peak;
  const double om2 = p.omega_c * p.omega_c;
  cplx num, den;
  double scale;
  if (query.k) {
    const double ck = p.light_speed * *query.k;
    const cplx x = (w - ck) * (dt + ds + w) - g2;
    num = x;
    den = (ds + w) * x + 0.25 * om2 * (ck - w);
    scale = std::abs((ds + w) * x) + std::abs(0.25 * om2 * (ck - w));
  } else {
    num = dt + ds + w;
    den = (ds + w) * num - 0.25 * om2;
    scale = std::abs((ds + w) * num) + 0.25 * om2;
  }
  if (std::abs(den) <= 1e-12 * scale || scale == 0.0) {
    std::ostringstream msg;
    msg << "G_ss pole at omega=" << w << " rad/us, k="
        << (query.k ? std::to_string(*query.k) : std::string("inf"));
    throw PoleError(msg.str());
  }
  return num / den;
}

namespace {

struct InverseParts {
  cplx hp, hs;
  double g2, om2, c;
};

InverseParts inverse_parts(const MediumParams& p) {
  return {-p.cap_delta() - p.delta_s, -p.cap_delta_s(), p.g_peak * p.g_peak,
          p.omega_c * p.omega_c, p.light_speed};
}

}  // namespace

cplx momentum_at_energy(cplx w, const MediumParams& p) {
  const auto k = inverse_parts(p);
  const cplx den = (w - k.hs) * (w - k.hp) - 0.25 * k.om2;
  if (den == cplx{}) throw PoleError("dispersion inverse singular at a bare-atom resonance");
  return (w - k.g2 * (w - k.hs) / den) / k.c;
}

cplx inverse_group_velocity_at(cplx w, const MediumParams& p) {
  const auto k = inverse_parts(p);
  const cplx den = (w - k.hs) * (w - k.hp) - 0.25 * k.om2;
  if (den == cplx{}) throw PoleError("dispersion inverse singular at a bare-atom resonance");
  const cplx d_ratio = (den - (w - k.hs) * (2.0 * w - k.hs - k.hp)) / (den * den);
  return (1.0 - k.g2 * d_ratio) / k.c;
}

cplx inverse_group_velocity_closed_form(const MediumParams& p) {
  const cplx d = p.cap_delta_tilde();
  const cplx ds = p.cap_delta_s();
  const double g2 = p.g_peak * p.g_peak;
  const double om2 = p.omega_c * p.omega_c;
  const cplx root = std::sqrt(d * d + 2.0 * d * ds + ds * ds + om2);
  const cplx num = g2 * (d - root) * (d - root) + 0.25 * g2 * om2;
  const cplx den_base = 3.0 * d * d - 3.0 * d * root + 2.0 * d * ds + ds * ds + 0.75 * om2;
  return num / (p.light_speed * den_base * den_base);
}

cplx inverse_group_velocity_closed_form_ds0(const MediumParams& p) {
  const cplx d = p.cap_delta_tilde();
  const double g2 = p.g_peak * p.g_peak;
  const double om2 = p.omega_c * p.omega_c;
  const cplx root = std::sqrt(d * d + om2);
  const cplx base = -d * root + d * d + 0.25 * om2;
  return g2 * (-2.0 * d * root + 2.0 * d * d + 1.25 * om2) / (9.0 * p.light_speed * base * base);
}

LosslessDispersion::LosslessDispersion(const MediumParams& params) : params_(params.lossless()) {
  const double a = -params_.delta - params_.delta_s, b = -params_.delta_s;
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * std::sqrt((a - b) * (a - b) + params_.omega_c * params_.omega_c);
  dark_range_ = {mid - half, mid + half};
}

LosslessDispersion::Point LosslessDispersion::at(Branch b, double q) const {
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  h(0, 0) = params_.light_speed * q;
  h(0, 1) = h(1, 0) = params_.g_peak;
  h(1, 1) = -params_.delta - params_.delta_s;
  h(1, 2) = h(2, 1) = 0.5 * params_.omega_c;
  h(2, 2) = -params_.delta_s;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(h);
  const int j = static_cast<int>(b);
  Point pt;
  pt.omega = solver.eigenvalues()(j);
  pt.vector = solver.eigenvectors().col(j);
  pt.velocity = params_.light_speed * pt.vector(0) * pt.vector(0);
  return pt;
}

double LosslessDispersion::momentum_at(double omega) const {
  return momentum_at_energy(cplx{omega, 0.0}, params_).real();
}

namespace {

int best_match(const Vector3c& like, const Eig3& e, double* best_ov, double* second_ov) {
  std::array<double, 3> ov{overlap(like, e.vectors[0]), overlap(like, e.vectors[1]),
                           overlap(like, e.vectors[2])};
  int best = static_cast<int>(std::max_element(ov.begin(), ov.end()) - ov.begin());
  double second = 0.0;
  for (int j = 0; j < 3; ++j)
    if (j != best) second = std::max(second, ov[j]);
  *best_ov = ov[best];
  *second_ov = second;
  return best;
}

}  // namespace

BranchState resolve_branch(Branch b, double q, const MediumParams& params) {
  const LosslessDispersion lossless(params);
  const Eigen::Vector3d v0 = lossless.at(b, q).vector;
  Vector3c like = v0.cast<cplx>();

  double best_ov = 0.0, second_ov = 0.0;
  Eig3 e = eig3(hamiltonian(q, params));
  int j = best_match(like, e, &best_ov, &second_ov);
  if (best_ov < 0.9 || second_ov > 0.5 * best_ov) {
    // Ambiguous: switch the losses on gradually and follow the eigenvector.
    constexpr int kSteps = 32;
    for (int k = 1; k <= kSteps; ++k) {
      MediumParams p = params;
      const double t = static_cast<double>(k) / kSteps;
      p.gamma_p *= t;
      p.gamma_s *= t;
      e = eig3(hamiltonian(q, p));
      j = best_match(like, e, &best_ov, &second_ov);
      if (best_ov < 0.5) throw TrackingError("lossy branch continuation lost the eigenvector");
      like = e.vectors[j];
    }
  }
  return {e.values[j], e.vectors[j](2), e.vectors[j]};
}

}  // namespace rydloss

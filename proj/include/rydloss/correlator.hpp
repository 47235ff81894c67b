#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "rydloss/common.hpp"

namespace rydloss {

/// Photon arrival times of one detector channel.
struct TimeTagStream {
  int channel = 1;
  std::vector<std::int64_t> timestamps;  ///< ns, nondecreasing
  std::int64_t duration = 0;             ///< T_exp in ns; all timestamps < duration

  void validate() const;
};

struct CorrelatorConfig {
  std::int64_t bin = 20;          ///< Δτ, ns
  std::int64_t window = 1000;     ///< τ_max, ns; must be a multiple of Δτ
  std::int64_t block = 100000;    ///< T, ns
  static constexpr int kOffsets = 4;

  void validate() const;
  int half_bins() const { return static_cast<int>(window / bin); }
  /// Largest lag a coincidence at any offset can span.
  std::int64_t reach() const { return kOffsets * block + window; }
};

/// Bin index of a lag under the half-open [kΔτ, (k+1)Δτ) convention.
inline std::int64_t lag_bin(std::int64_t lag, std::int64_t bin) {
  std::int64_t q = lag / bin;
  if (lag % bin != 0 && lag < 0) --q;
  return q;
}

/// Pair counts N_ab(τ - o) for offsets o = mT, m ∈ {-4..4}; bins k ∈ [-K, K).
struct PairHistogram {
  CorrelatorConfig config;
  std::array<std::vector<std::uint64_t>, 9> counts;  ///< index m + 4
  std::uint64_t n_a = 0, n_b = 0;
  std::int64_t duration = 0;

  explicit PairHistogram(const CorrelatorConfig& c = {});
  std::uint64_t& at(int m, int k) { return counts[m + 4][k + config.half_bins()]; }
  std::uint64_t at(int m, int k) const { return counts[m + 4][k + config.half_bins()]; }
  void merge(const PairHistogram& other);
  bool operator==(const PairHistogram& o) const {
    return counts == o.counts && n_a == o.n_a && n_b == o.n_b;
  }
};

/// Triple counts N_123(τ₁ - a, τ₂ - b) for (a, b) = (0, 0) and the 56 signed
/// offset pairs a, b ∈ {±T..±4T}, a ≠ b. τ₁ = t₂ - t₁, τ₂ = t₃ - t₁.
struct TripleHistogram {
  CorrelatorConfig config;
  std::vector<std::array<int, 2>> offsets;  ///< (m, n) in units of T; entry 0 is (0, 0)
  std::vector<std::vector<std::uint64_t>> counts;
  std::uint64_t n1 = 0, n2 = 0, n3 = 0;
  std::int64_t duration = 0;

  explicit TripleHistogram(const CorrelatorConfig& c = {});
  int offset_index(int m, int n) const;
  std::uint64_t& at(std::size_t o, int k1, int k2) {
    const int w = 2 * config.half_bins();
    return counts[o][(k1 + config.half_bins()) * w + k2 + config.half_bins()];
  }
  std::uint64_t at(std::size_t o, int k1, int k2) const {
    const int w = 2 * config.half_bins();
    return counts[o][(k1 + config.half_bins()) * w + k2 + config.half_bins()];
  }
  void merge(const TripleHistogram& other);
  bool operator==(const TripleHistogram& o) const {
    return counts == o.counts && n1 == o.n1 && n2 == o.n2 && n3 == o.n3;
  }
};

/// Single-pass coincidence engine. Events are pushed in global time order, in
/// any number of chunks; anchors are resolved once the stream has moved past
/// their reach, so chunk boundaries never lose coincidences.
class CoincidenceCounter {
 public:
  explicit CoincidenceCounter(const CorrelatorConfig& c, bool triples = true);

  /// channel ∈ {1, 2, 3}; time must not decrease between calls.
  void push(int channel, std::int64_t t);
  void push_streams(const std::vector<TimeTagStream>& streams);
  /// Resolve all pending anchors; further pushes are an error.
  void finish(std::int64_t duration);

  const PairHistogram& pairs(int a, int b) const;  ///< (1,2), (1,3) or (2,3)
  const TripleHistogram& triples() const { return triple_; }

 private:
  void resolve(int channel, std::int64_t t);
  void drain(std::int64_t now);

  CorrelatorConfig config_;
  bool with_triples_;
  bool finished_ = false;
  std::int64_t last_ = INT64_MIN;
  std::array<std::deque<std::int64_t>, 3> history_;
  std::deque<std::pair<int, std::int64_t>> pending_;
  std::array<PairHistogram, 3> pair_;  ///< 12, 13, 23
  TripleHistogram triple_;
};

struct CorrelationValue {
  double tau = 0.0;       ///< ns, left bin edge
  double value = 0.0;     ///< NaN when withheld
  double stderr_ = 0.0;
  bool flagged = false;   ///< empty normalization
};

struct G2Result {
  std::vector<CorrelationValue> bins;
  std::vector<double> analytic_denominator;  ///< N_a N_b Δτ / T_exp per bin
  std::vector<double> shifted_denominator;   ///< ⅛ Σ N(τ ± mT)
  int zero_index() const;
};

struct G3Result {
  int half_bins = 0;
  std::vector<CorrelationValue> bins;  ///< row-major over (τ₁, τ₂)
  std::size_t normalization_terms = 0;
  const CorrelationValue& at(int k1, int k2) const {
    return bins[(k1 + half_bins) * 2 * half_bins + k2 + half_bins];
  }
};

G2Result g2_from_histogram(const PairHistogram& h);
G3Result g3_from_histogram(const TripleHistogram& h);

/// Convenience wrappers over CoincidenceCounter for channels (a, b) / (1, 2, 3).
G2Result g2_from_tags(const std::vector<TimeTagStream>& streams, const CorrelatorConfig& c,
                      int a = 1, int b = 2);
G3Result g3_from_tags(const std::vector<TimeTagStream>& streams, const CorrelatorConfig& c);

/// η₃ = g²(τ₁) + g²(τ₂) + g²(τ₂ - τ₁) - g³(τ₁, τ₂) - 2.
double eta3_combine(double g2_t1, double g2_t2, double g2_t21, double g3);
std::vector<double> eta3_combine(const std::vector<double>& g2_t1,
                                 const std::vector<double>& g2_t2,
                                 const std::vector<double>& g2_t21, const std::vector<double>& g3);

enum class SynthModel { Poisson, BunchedPairs, Triplets };
const char* to_string(SynthModel m);
SynthModel synth_model_from_string(const std::string& name);

struct SynthConfig {
  SynthModel model = SynthModel::Poisson;
  double rate_per_us = 3.0;        ///< incoming (background) photon rate R_in
  double group_rate_per_us = 0.0;  ///< pairs or triplets per µs
  double jitter_ns = 0.0;          ///< rms spread within a group
  std::uint64_t seed = 1;
  std::uint64_t max_events = 200'000'000;
};

/// Three channels (1, 2, 3); each photon picks a channel uniformly.
std::vector<TimeTagStream> synth_tags(const SynthConfig& config, std::int64_t duration_ns);

/// Files: CSV `channel,timestamp_ns` with an optional `# duration_ns=` line, or
/// binary "TTAG1" | u64 duration | records of (u8 channel, u64 ns), little-endian.
std::vector<TimeTagStream> read_tags(const std::string& path, std::int64_t duration_ns = 0);
void write_tags_csv(const std::string& path, const std::vector<TimeTagStream>& streams);
void write_tags_binary(const std::string& path, const std::vector<TimeTagStream>& streams);

}  // namespace rydloss

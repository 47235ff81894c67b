#include "rydloss/correlator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "rydloss/io.hpp"

namespace rydloss {

void TimeTagStream::validate() const {
  if (channel < 1 || channel > 3) throw ValidationError("channel", "must be 1, 2 or 3");
  if (duration <= 0) throw ValidationError("duration", "must be positive");
  if (!std::is_sorted(timestamps.begin(), timestamps.end()))
    throw ValidationError("timestamps", "must be nondecreasing");
  if (!timestamps.empty() && (timestamps.front() < 0 || timestamps.back() >= duration))
    throw ValidationError("timestamps", "must lie in [0, duration)");
}

void CorrelatorConfig::validate() const {
  if (bin <= 0) throw ValidationError("bin", "must be positive");
  if (window <= 0 || window % bin != 0)
    throw ValidationError("window", "must be a positive multiple of the bin width");
  // shifted windows must not overlap the unshifted one
  if (block < 2 * window) throw ValidationError("block", "needs T >= 2 tau_max");
}

PairHistogram::PairHistogram(const CorrelatorConfig& c) : config(c) {
  for (auto& v : counts) v.assign(2 * c.half_bins(), 0);
}

void PairHistogram::merge(const PairHistogram& other) {
  if (other.config.bin != config.bin || other.config.window != config.window ||
      other.config.block != config.block)
    throw ValidationError("histogram", "merge needs identical binning");
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t k = 0; k < counts[i].size(); ++k) counts[i][k] += other.counts[i][k];
  n_a += other.n_a;
  n_b += other.n_b;
  duration += other.duration;
}

TripleHistogram::TripleHistogram(const CorrelatorConfig& c) : config(c) {
  offsets.push_back({0, 0});
  for (int m = -CorrelatorConfig::kOffsets; m <= CorrelatorConfig::kOffsets; ++m)
    for (int n = -CorrelatorConfig::kOffsets; n <= CorrelatorConfig::kOffsets; ++n)
      if (m != 0 && n != 0 && m != n) offsets.push_back({m, n});
  const std::size_t w = 2 * c.half_bins();
  counts.assign(offsets.size(), std::vector<std::uint64_t>(w * w, 0));
}

int TripleHistogram::offset_index(int m, int n) const {
  for (std::size_t i = 0; i < offsets.size(); ++i)
    if (offsets[i][0] == m && offsets[i][1] == n) return static_cast<int>(i);
  return -1;
}

void TripleHistogram::merge(const TripleHistogram& other) {
  if (other.config.bin != config.bin || other.config.window != config.window ||
      other.config.block != config.block)
    throw ValidationError("histogram", "merge needs identical binning");
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t k = 0; k < counts[i].size(); ++k) counts[i][k] += other.counts[i][k];
  n1 += other.n1;
  n2 += other.n2;
  n3 += other.n3;
  duration += other.duration;
}

CoincidenceCounter::CoincidenceCounter(const CorrelatorConfig& c, bool triples)
    : config_(c), with_triples_(triples),
      pair_{PairHistogram(c), PairHistogram(c), PairHistogram(c)},
      triple_(triples ? c : CorrelatorConfig{c.bin, c.bin, c.block}) {
  c.validate();
}

void CoincidenceCounter::push(int channel, std::int64_t t) {
  if (finished_) throw Error("push after finish");
  if (channel < 1 || channel > 3) throw ValidationError("channel", "must be 1, 2 or 3");
  if (t < last_) throw ValidationError("timestamps", "events must arrive in time order");
  last_ = t;
  drain(t);
  history_[channel - 1].push_back(t);
  if (channel != 3) pending_.emplace_back(channel, t);
  switch (channel) {
    case 1: ++pair_[0].n_a; ++pair_[1].n_a; ++triple_.n1; break;
    case 2: ++pair_[0].n_b; ++pair_[2].n_a; ++triple_.n2; break;
    default: ++pair_[1].n_b; ++pair_[2].n_b; ++triple_.n3; break;
  }
}

void CoincidenceCounter::push_streams(const std::vector<TimeTagStream>& streams) {
  // k-way merge by time; ties go to the lower channel
  std::vector<std::size_t> pos(streams.size(), 0);
  for (;;) {
    int best = -1;
    for (std::size_t s = 0; s < streams.size(); ++s) {
      if (pos[s] >= streams[s].timestamps.size()) continue;
      if (best < 0 || streams[s].timestamps[pos[s]] < streams[best].timestamps[pos[best]] ||
          (streams[s].timestamps[pos[s]] == streams[best].timestamps[pos[best]] &&
           streams[s].channel < streams[best].channel))
        best = static_cast<int>(s);
    }
    if (best < 0) break;
    push(streams[best].channel, streams[best].timestamps[pos[best]++]);
  }
}

void CoincidenceCounter::drain(std::int64_t now) {
  const std::int64_t reach = config_.reach();
  while (!pending_.empty() && pending_.front().second + reach <= now) {
    auto [c, t] = pending_.front();
    pending_.pop_front();
    resolve(c, t);
  }
  const std::int64_t keep = (pending_.empty() ? now : pending_.front().second) - reach;
  for (auto& h : history_)
    while (!h.empty() && h.front() < keep) h.pop_front();
}

void CoincidenceCounter::resolve(int channel, std::int64_t t) {
  const std::int64_t W = config_.window, T = config_.block, bin = config_.bin;
  const int K = config_.half_bins();
  auto range = [&](int ch, std::int64_t centre) {
    const auto& h = history_[ch - 1];
    return std::pair{std::lower_bound(h.begin(), h.end(), centre - W),
                     std::lower_bound(h.begin(), h.end(), centre + W)};
  };
  auto count_pairs = [&](PairHistogram& hist, int partner) {
    for (int m = -CorrelatorConfig::kOffsets; m <= CorrelatorConfig::kOffsets; ++m) {
      const std::int64_t o = m * T;
      auto [lo, hi] = range(partner, t + o);
      for (auto it = lo; it != hi; ++it)
        ++hist.counts[m + 4][lag_bin(*it - t - o, bin) + K];
    }
  };
  if (channel == 1) {
    count_pairs(pair_[0], 2);
    count_pairs(pair_[1], 3);
    if (!with_triples_) return;
    const int w = 2 * K;
    for (std::size_t oi = 0; oi < triple_.offsets.size(); ++oi) {
      const std::int64_t a = triple_.offsets[oi][0] * T, b = triple_.offsets[oi][1] * T;
      auto [lo2, hi2] = range(2, t + a);
      if (lo2 == hi2) continue;
      auto [lo3, hi3] = range(3, t + b);
      auto& cnt = triple_.counts[oi];
      for (auto i = lo2; i != hi2; ++i) {
        const std::int64_t k1 = lag_bin(*i - t - a, bin) + K;
        for (auto j = lo3; j != hi3; ++j) ++cnt[k1 * w + lag_bin(*j - t - b, bin) + K];
      }
    }
  } else {
    count_pairs(pair_[2], 3);
  }
}

void CoincidenceCounter::finish(std::int64_t duration) {
  if (finished_) return;
  drain(std::numeric_limits<std::int64_t>::max() - config_.reach());
  while (!pending_.empty()) {
    auto [c, t] = pending_.front();
    pending_.pop_front();
    resolve(c, t);
  }
  for (auto& p : pair_) p.duration = duration;
  triple_.duration = duration;
  finished_ = true;
}

const PairHistogram& CoincidenceCounter::pairs(int a, int b) const {
  if (a == 1 && b == 2) return pair_[0];
  if (a == 1 && b == 3) return pair_[1];
  if (a == 2 && b == 3) return pair_[2];
  throw ValidationError("channels", "pair must be (1,2), (1,3) or (2,3)");
}

namespace {

CorrelationValue ratio(double tau, double num, double den_sum, double terms) {
  CorrelationValue v;
  v.tau = tau;
  if (den_sum <= 0.0) {
    v.flagged = true;
    v.value = std::numeric_limits<double>::quiet_NaN();
    v.stderr_ = std::numeric_limits<double>::quiet_NaN();
    return v;
  }
  const double den = den_sum / terms;
  v.value = num / den;
  // Poisson errors on both numerator and the pooled denominator
  v.stderr_ = num > 0.0 ? v.value * std::sqrt(1.0 / num + 1.0 / den_sum) : 1.0 / den;
  return v;
}

}  // namespace

int G2Result::zero_index() const {
  for (std::size_t i = 0; i < bins.size(); ++i)
    if (bins[i].tau == 0.0) return static_cast<int>(i);
  return -1;
}

G2Result g2_from_histogram(const PairHistogram& h) {
  const int K = h.config.half_bins();
  G2Result out;
  const double analytic = h.duration > 0 ? static_cast<double>(h.n_a) * static_cast<double>(h.n_b) *
                                               static_cast<double>(h.config.bin) /
                                               static_cast<double>(h.duration)
                                         : std::numeric_limits<double>::quiet_NaN();
  for (int k = -K; k < K; ++k) {
    double den = 0.0;
    for (int m = 1; m <= CorrelatorConfig::kOffsets; ++m)
      den += static_cast<double>(h.at(m, k) + h.at(-m, k));
    out.bins.push_back(ratio(static_cast<double>(k * h.config.bin), static_cast<double>(h.at(0, k)),
                             den, 2.0 * CorrelatorConfig::kOffsets));
    out.shifted_denominator.push_back(den / (2.0 * CorrelatorConfig::kOffsets));
    out.analytic_denominator.push_back(analytic);
  }
  return out;
}

G3Result g3_from_histogram(const TripleHistogram& h) {
  const int K = h.config.half_bins();
  G3Result out;
  out.half_bins = K;
  out.normalization_terms = h.offsets.size() - 1;
  const double terms = static_cast<double>(out.normalization_terms);
  for (int k1 = -K; k1 < K; ++k1)
    for (int k2 = -K; k2 < K; ++k2) {
      double den = 0.0;
      for (std::size_t o = 1; o < h.offsets.size(); ++o) den += static_cast<double>(h.at(o, k1, k2));
      CorrelationValue v = ratio(0.0, static_cast<double>(h.at(0, k1, k2)), den, terms);
      v.tau = static_cast<double>(k1 * h.config.bin);
      out.bins.push_back(v);
    }
  return out;
}

namespace {

std::int64_t common_duration(const std::vector<TimeTagStream>& streams) {
  std::int64_t d = 0;
  for (const auto& s : streams) {
    s.validate();
    d = std::max(d, s.duration);
  }
  return d;
}

bool has_channel(const std::vector<TimeTagStream>& streams, int c) {
  return std::any_of(streams.begin(), streams.end(), [c](const auto& s) { return s.channel == c; });
}

}  // namespace

G2Result g2_from_tags(const std::vector<TimeTagStream>& streams, const CorrelatorConfig& c, int a,
                      int b) {
  if (!has_channel(streams, a) || !has_channel(streams, b))
    throw ValidationError("streams", "g2 needs both channels present");
  CoincidenceCounter counter(c, false);
  counter.push_streams(streams);
  counter.finish(common_duration(streams));
  return g2_from_histogram(counter.pairs(a, b));
}

G3Result g3_from_tags(const std::vector<TimeTagStream>& streams, const CorrelatorConfig& c) {
  for (int ch = 1; ch <= 3; ++ch)
    if (!has_channel(streams, ch)) throw ValidationError("streams", "g3 needs channels 1, 2 and 3");
  CoincidenceCounter counter(c, true);
  counter.push_streams(streams);
  counter.finish(common_duration(streams));
  return g3_from_histogram(counter.triples());
}

double eta3_combine(double g2_t1, double g2_t2, double g2_t21, double g3) {
  return g2_t1 + g2_t2 + g2_t21 - g3 - 2.0;
}

std::vector<double> eta3_combine(const std::vector<double>& g2_t1,
                                 const std::vector<double>& g2_t2,
                                 const std::vector<double>& g2_t21, const std::vector<double>& g3) {
  if (g2_t1.size() != g3.size() || g2_t2.size() != g3.size() || g2_t21.size() != g3.size())
    throw ValidationError("shape", "eta3 inputs must have equal sizes");
  std::vector<double> out(g3.size());
  for (std::size_t i = 0; i < g3.size(); ++i)
    out[i] = eta3_combine(g2_t1[i], g2_t2[i], g2_t21[i], g3[i]);
  return out;
}

const char* to_string(SynthModel m) {
  switch (m) {
    case SynthModel::Poisson: return "poisson";
    case SynthModel::BunchedPairs: return "bunched_pairs";
    case SynthModel::Triplets: return "triplets";
  }
  return "?";
}

SynthModel synth_model_from_string(const std::string& name) {
  if (name == "poisson") return SynthModel::Poisson;
  if (name == "bunched_pairs" || name == "pairs") return SynthModel::BunchedPairs;
  if (name == "triplets") return SynthModel::Triplets;
  throw ValidationError("model", "unknown synthetic model '" + name + "'");
}

std::vector<TimeTagStream> synth_tags(const SynthConfig& config, std::int64_t duration_ns) {
  if (duration_ns <= 0) throw ValidationError("duration", "must be positive");
  if (config.rate_per_us < 0.0 || config.group_rate_per_us < 0.0 || config.jitter_ns < 0.0)
    throw ValidationError("rate", "rates and jitter must be non-negative");
  const int group = config.model == SynthModel::Poisson        ? 0
                    : config.model == SynthModel::BunchedPairs ? 2
                                                               : 3;
  const double duration_us = static_cast<double>(duration_ns) * 1e-3;
  const double expected = (config.rate_per_us + group * config.group_rate_per_us) * duration_us;
  if (expected > static_cast<double>(config.max_events))
    throw BudgetError("synthetic stream needs ~" + std::to_string(static_cast<long long>(expected)) +
                      " events, budget is " + std::to_string(config.max_events));

  std::mt19937_64 rng(config.seed);
  std::vector<TimeTagStream> out(3);
  for (int c = 0; c < 3; ++c) {
    out[c].channel = c + 1;
    out[c].duration = duration_ns;
  }
  auto emit = [&](int c, double t) {
    if (t < 0.0 || t >= static_cast<double>(duration_ns)) return;
    out[c].timestamps.push_back(static_cast<std::int64_t>(std::floor(t)));
  };
  std::uniform_int_distribution<int> pick(0, 2);

  if (config.rate_per_us > 0.0) {
    std::exponential_distribution<double> gap(config.rate_per_us * 1e-3);
    for (double t = gap(rng); t < static_cast<double>(duration_ns); t += gap(rng)) emit(pick(rng), t);
  }
  if (group > 0 && config.group_rate_per_us > 0.0) {
    std::exponential_distribution<double> gap(config.group_rate_per_us * 1e-3);
    std::normal_distribution<double> spread(0.0, 1.0);
    std::array<int, 3> perm{0, 1, 2};
    for (double t = gap(rng); t < static_cast<double>(duration_ns); t += gap(rng)) {
      // a group hits distinct detectors, as after a 1/3 beamsplitter with coincidence
      std::shuffle(perm.begin(), perm.end(), rng);
      for (int i = 0; i < group; ++i)
        emit(perm[i], config.jitter_ns > 0.0 ? t + config.jitter_ns * spread(rng) : t);
    }
  }
  for (auto& s : out) std::sort(s.timestamps.begin(), s.timestamps.end());
  return out;
}

namespace {

constexpr char kMagic[5] = {'T', 'T', 'A', 'G', '1'};

std::vector<std::pair<int, std::int64_t>> merged(const std::vector<TimeTagStream>& streams) {
  std::vector<std::pair<int, std::int64_t>> all;
  for (const auto& s : streams)
    for (auto t : s.timestamps) all.emplace_back(s.channel, t);
  std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second < y.second : x.first < y.first;
  });
  return all;
}

std::int64_t max_duration(const std::vector<TimeTagStream>& streams) {
  std::int64_t d = 0;
  for (const auto& s : streams) d = std::max(d, s.duration);
  return d;
}

template <class T>
void put_le(std::string& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

std::uint64_t get_le64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

std::vector<TimeTagStream> read_tags(const std::string& path, std::int64_t duration_ns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("input", "cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<TimeTagStream> out(3);
  for (int c = 0; c < 3; ++c) out[c].channel = c + 1;
  std::int64_t file_duration = 0, last = -1;
  auto add = [&](long long ch, long long t, const std::string& where) {
    if (ch < 1 || ch > 3) throw ValidationError("channel", where + ": channel must be 1, 2 or 3");
    if (t < 0) throw ValidationError("timestamp", where + ": negative timestamp");
    out[ch - 1].timestamps.push_back(t);
    last = std::max<std::int64_t>(last, t);
  };

  if (bytes.size() >= 5 && std::memcmp(bytes.data(), kMagic, 5) == 0) {
    if (bytes.size() < 13 || (bytes.size() - 13) % 9 != 0)
      throw ValidationError("input", "truncated TTAG1 file");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    file_duration = static_cast<std::int64_t>(get_le64(p + 5));
    for (std::size_t off = 13; off < bytes.size(); off += 9)
      add(p[off], static_cast<long long>(get_le64(p + off + 1)), "record " + std::to_string((off - 13) / 9));
  } else {
    std::istringstream ss(bytes);
    std::string line;
    std::size_t lineno = 0;
    bool header_allowed = true;
    while (std::getline(ss, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '#') {
        auto pos = line.find("duration_ns=");
        if (pos != std::string::npos) file_duration = std::stoll(line.substr(pos + 12));
        continue;
      }
      if (!std::isdigit(static_cast<unsigned char>(line[0]))) {
        if (header_allowed) {
          header_allowed = false;
          continue;
        }
        throw ValidationError("input", "line " + std::to_string(lineno) + ": malformed");
      }
      header_allowed = false;
      long long ch = 0, t = 0;
      char comma = 0;
      std::istringstream ls(line);
      if (!(ls >> ch >> comma >> t) || comma != ',')
        throw ValidationError("input", "line " + std::to_string(lineno) + ": expected channel,timestamp_ns");
      add(ch, t, "line " + std::to_string(lineno));
    }
  }
  std::int64_t d = duration_ns > 0 ? duration_ns : file_duration > 0 ? file_duration : last + 1;
  if (d <= last) throw ValidationError("duration", "timestamps exceed the experiment duration");
  for (auto& s : out) {
    std::sort(s.timestamps.begin(), s.timestamps.end());
    s.duration = std::max<std::int64_t>(d, 1);
  }
  return out;
}

void write_tags_csv(const std::string& path, const std::vector<TimeTagStream>& streams) {
  std::ostringstream os;
  os << "# duration_ns=" << max_duration(streams) << "\nchannel,timestamp_ns\n";
  for (auto [c, t] : merged(streams)) os << c << ',' << t << '\n';
  atomic_write(path, os.str());
}

void write_tags_binary(const std::string& path, const std::vector<TimeTagStream>& streams) {
  std::string buf(kMagic, kMagic + 5);
  put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(max_duration(streams)));
  for (auto [c, t] : merged(streams)) {
    buf.push_back(static_cast<char>(c));
    put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(t));
  }
  atomic_write(path, buf);
}

}  // namespace rydloss

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "jumplab/chain.hpp"
#include "jumplab/rng.hpp"

namespace jumplab {

inline constexpr std::size_t kCemetery = std::numeric_limits<std::size_t>::max();

struct JumpEvent {
  double time = 0.0;
  std::size_t site = 0;  ///< kCemetery when the chain is killed
};

struct ExitRecord {
  double time = 0.0;
  std::size_t site = 0;
};

struct PathSample {
  std::size_t start = 0;
  std::vector<JumpEvent> events;
  double end_time = 0.0;
  std::optional<ExitRecord> exit;
  bool killed = false;
  double kill_time = 0.0;
  std::size_t spliced_jumps = 0;  ///< large jumps added by the splicing simulator
};

/// Cumulative jump tables of a generator: row x holds the running sums of
/// q(x, 0..N-1) followed by kill(x).
class JumpSampler {
 public:
  explicit JumpSampler(const GeneratorMatrix& A);

  std::size_t size() const noexcept { return n_; }
  double total_rate(std::size_t x) const { return total_[x]; }
  /// Destination for a uniform u in (0, 1); kCemetery for the kill channel.
  std::size_t draw(std::size_t x, double u) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> cumulative_;  ///< n x (n + 1), row-major
  std::vector<double> total_;
};

/// A ball B(center, r) given by a site index and radius. Exit happens at the
/// first site strictly farther than r from the center, or on killing.
struct Ball {
  std::size_t center = 0;
  double radius = 0.0;
};

/// Continuous-time chain realization: exponential holding times with rate
/// -q(x, x) and destinations proportional to q(x, .), killing included.
class ChainSimulator {
 public:
  explicit ChainSimulator(const GeneratorMatrix& A);

  const GeneratorMatrix& generator() const noexcept { return *A_; }
  const JumpSampler& sampler() const noexcept { return sampler_; }

  /// Runs until t_max, killing, or (when a ball is given) the exit from it.
  PathSample run(std::size_t x0, double t_max, PathStream& rng, std::optional<Ball> ball = std::nullopt,
                 bool record_events = true) const;

 private:
  const GeneratorMatrix* A_;
  JumpSampler sampler_;
};

PathSample simulate_path(const GeneratorMatrix& A, std::size_t x0, double t_max, PathStream& rng);

/// Small/large split of a generator at jump radius `radius`: the small part
/// keeps q(x, y) for |x - y| <= radius and the outside-box mass within the
/// radius as killing; the large part keeps the rest.
struct MeyerSplit {
  GeneratorMatrix small;
  Eigen::MatrixXd large_rates;
  Eigen::VectorXd large_kill;
  double dominating_rate = 0.0;  ///< 2 kappa3 unless overridden
  double max_large_rate = 0.0;
};

/// Throws ConfigError when some lattice large-jump rate exceeds the dominating rate.
MeyerSplit split_for_meyer(const GeneratorMatrix& full, const KernelSpec& spec, double radius = 1.0,
                           std::optional<double> dominating_rate = std::nullopt, const QuadratureOptions& opts = {});

/// Small-jump chain with large jumps spliced in by thinning a Poisson clock of
/// rate dominating_rate; each candidate is accepted with probability
/// (large rate at the current site) / dominating_rate.
class MeyerSimulator {
 public:
  explicit MeyerSimulator(const MeyerSplit& split);

  PathSample run(std::size_t x0, double t_max, PathStream& rng, std::optional<Ball> ball = std::nullopt,
                 bool record_events = true) const;

 private:
  const MeyerSplit* split_;
  ChainSimulator small_;
  std::vector<double> large_cumulative_;  ///< n x (n + 1)
  std::vector<double> large_total_;
};

PathSample simulate_meyer(const MeyerSplit& split, std::size_t x0, double t_max, PathStream& rng);

struct McOptions {
  std::size_t paths = 10000;
  std::uint64_t seed = 1;
  int threads = 1;
  double margin = 1.0;  ///< B(x0, r (1 + margin)) must lie in the lattice box
};

struct ExitEstimate {
  double probability = 0.0;
  double stderr_of_estimate = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t x0 = 0;
  double r = 0.0;
  double t = 0.0;
};

/// Throws ConfigError unless B(x0, r (1 + margin)) lies inside the lattice box.
void check_ball_in_box(const Lattice& lattice, std::size_t x0, double r, double margin);

ExitEstimate estimate_exit_prob(const GeneratorMatrix& A, std::size_t x0, double r, double t, const McOptions& opts);

/// P(tau < t) for every t in `times` from one set of paths (coupled across t),
/// hence nondecreasing in t.
std::vector<ExitEstimate> estimate_exit_curve(const GeneratorMatrix& A, std::size_t x0, double r,
                                              const std::vector<double>& times, const McOptions& opts);

struct MeanExitEstimate {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
  std::size_t samples = 0;
  std::size_t censored = 0;
  double t_max = 0.0;
  bool flagged = false;  ///< censored fraction above 1%
  std::uint64_t seed = 0;
  double r = 0.0;
};

/// Mean of tau_{B(x0, r)}; paths still inside at t_max = 100 r^{beta1} are
/// censored at t_max.
MeanExitEstimate estimate_mean_exit(const GeneratorMatrix& A, std::size_t x0, double r, double beta1,
                                    const McOptions& opts);

/// Exit times from B(x0, r) (censored at t_max) for distribution tests.
std::vector<double> sample_exit_times(const GeneratorMatrix& A, std::size_t x0, double r, double t_max,
                                      const McOptions& opts);
std::vector<double> sample_exit_times(const MeyerSplit& split, std::size_t x0, double r, double t_max,
                                      const McOptions& opts);

struct SplicedCount {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
  double bound = 0.0;  ///< dominating_rate * t
};
SplicedCount spliced_jump_count(const MeyerSplit& split, std::size_t x0, double t, const McOptions& opts);

using PairFunction = std::function<double(const Point& x, const Point& y)>;

struct LevySystemReport {
  double jump_sum = 0.0;       ///< mean of sum_{s <= T} f(X_{s-}, X_s)
  double compensator = 0.0;    ///< mean of int_0^T sum_y f(X_s, y) q(X_s, y) ds
  double jump_stderr = 0.0;
  double compensator_stderr = 0.0;
  double difference_stderr = 0.0;  ///< stderr of the paired difference
  double discrepancy = 0.0;        ///< |jump_sum - compensator| / difference_stderr
  bool passed = false;             ///< within 3 stderr, or both exactly 0
};

/// Compares the two sides of the Levy system identity on N chain paths from x0.
LevySystemReport levy_system_check(const GeneratorMatrix& A, const PairFunction& f, std::size_t x0, double T,
                                   const McOptions& opts);

}  // namespace jumplab

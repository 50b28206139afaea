#include "jumplab/pathsim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jumplab/errors.hpp"
#include "jumplab/parallel.hpp"
#include "jumplab/statistics.hpp"

namespace jumplab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t draw_from(const double* cum, std::size_t n, double total, double u) {
  const double target = u * total;
  std::size_t k = static_cast<std::size_t>(std::upper_bound(cum, cum + n + 1, target) - cum);
  if (k > n) {
    // u * total rounded up to the last running sum: take the last channel with mass
    k = n;
    while (k > 0 && cum[k] == cum[k - 1]) --k;
  }
  return k == n ? kCemetery : k;
}

bool outside(const Lattice& lat, const Ball& ball, std::size_t y) {
  return y == kCemetery || distance(lat.site(y), lat.site(ball.center)) > ball.radius;
}

void require_paths(const McOptions& opts) {
  if (opts.paths < 100) throw ConfigError("Monte Carlo estimates need at least 100 paths");
}

}  // namespace

JumpSampler::JumpSampler(const GeneratorMatrix& A) : n_(A.size()) {
  cumulative_.resize(n_ * (n_ + 1));
  total_.resize(n_);
  for (std::size_t x = 0; x < n_; ++x) {
    double* row = &cumulative_[x * (n_ + 1)];
    const double* col = A.rates().col(static_cast<Eigen::Index>(x)).data();
    double s = 0.0;
    for (std::size_t y = 0; y < n_; ++y) {
      s += col[y];
      row[y] = s;
    }
    s += A.kill()(static_cast<Eigen::Index>(x));
    row[n_] = s;
    total_[x] = s;
  }
}

std::size_t JumpSampler::draw(std::size_t x, double u) const {
  return draw_from(&cumulative_[x * (n_ + 1)], n_, total_[x], u);
}

ChainSimulator::ChainSimulator(const GeneratorMatrix& A) : A_(&A), sampler_(A) {}

PathSample ChainSimulator::run(std::size_t x0, double t_max, PathStream& rng, std::optional<Ball> ball,
                               bool record_events) const {
  if (x0 >= sampler_.size()) throw ConfigError("simulate_path: start site out of range");
  const Lattice& lat = A_->lattice();
  PathSample path;
  path.start = x0;
  std::size_t x = x0;
  double t = 0.0;
  for (;;) {
    const double rate = sampler_.total_rate(x);
    if (!(rate > 0.0)) break;
    const double dt = rng.exponential(rate);
    if (!(t + dt < t_max)) break;
    t += dt;
    const std::size_t y = sampler_.draw(x, rng.uniform());
    if (record_events) path.events.push_back({t, y});
    if (y == kCemetery) {
      path.killed = true;
      path.kill_time = t;
      if (ball) path.exit = ExitRecord{t, y};
      path.end_time = t;
      return path;
    }
    x = y;
    if (ball && outside(lat, *ball, y)) {
      path.exit = ExitRecord{t, y};
      path.end_time = t;
      return path;
    }
  }
  path.end_time = t_max;
  return path;
}

PathSample simulate_path(const GeneratorMatrix& A, std::size_t x0, double t_max, PathStream& rng) {
  if (!(t_max >= 0.0)) throw ConfigError("simulate_path: t_max must be nonnegative");
  return ChainSimulator(A).run(x0, t_max, rng);
}

MeyerSplit split_for_meyer(const GeneratorMatrix& full, const KernelSpec& spec, double radius,
                           std::optional<double> dominating_rate, const QuadratureOptions& opts) {
  if (!(radius > 0.0)) throw ConfigError("split_for_meyer: radius must be positive");
  const Lattice& lat = full.lattice();
  const Eigen::Index N = static_cast<Eigen::Index>(lat.size());
  Eigen::MatrixXd small = full.rates();
  Eigen::MatrixXd large = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index x = 0; x < N; ++x)
    for (Eigen::Index y = 0; y < N; ++y)
      if (distance(lat.site(x), lat.site(y)) > radius) {
        large(x, y) = small(x, y);
        small(x, y) = 0.0;
      }
  Eigen::VectorXd kill_small = Eigen::VectorXd::Zero(N), kill_large = Eigen::VectorXd::Zero(N);
  if (full.mode() == GeneratorMode::Killed) {
    const Point lo = lat.cell_box_lo(), hi = lat.cell_box_hi();
    for (Eigen::Index x = 0; x < N; ++x) {
      kill_small(x) = outside_box_mass(spec, lat.site(x), lo, hi, 0.0, radius, opts);
      kill_large(x) = outside_box_mass(spec, lat.site(x), lo, hi, radius, kInf, opts);
    }
  }
  MeyerSplit split;
  split.small = GeneratorMatrix::from_rates(lat, std::move(small), std::move(kill_small), full.mode());
  split.large_rates = std::move(large);
  split.large_kill = std::move(kill_large);
  split.dominating_rate = dominating_rate ? *dominating_rate : 2.0 * spec.bounds().kappa3;
  for (Eigen::Index x = 0; x < N; ++x)
    split.max_large_rate = std::fmax(split.max_large_rate, split.large_rates.col(x).sum() + split.large_kill(x));
  if (split.max_large_rate > split.dominating_rate * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "dominating-rate violation: large-jump rate " << split.max_large_rate << " exceeds " << split.dominating_rate
       << " (2 kappa3); the declared tail bound is inconsistent with the kernel";
    throw ConfigError(os.str());
  }
  return split;
}

MeyerSimulator::MeyerSimulator(const MeyerSplit& split) : split_(&split), small_(split.small) {
  const std::size_t n = split.small.size();
  large_cumulative_.resize(n * (n + 1));
  large_total_.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    double* row = &large_cumulative_[x * (n + 1)];
    const double* col = split.large_rates.col(static_cast<Eigen::Index>(x)).data();
    double s = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      s += col[y];
      row[y] = s;
    }
    s += split.large_kill(static_cast<Eigen::Index>(x));
    row[n] = s;
    large_total_[x] = s;
  }
}

PathSample MeyerSimulator::run(std::size_t x0, double t_max, PathStream& rng, std::optional<Ball> ball,
                               bool record_events) const {
  const std::size_t n = large_total_.size();
  if (x0 >= n) throw ConfigError("simulate_meyer: start site out of range");
  const Lattice& lat = split_->small.lattice();
  const JumpSampler& sampler = small_.sampler();
  const double dominating = split_->dominating_rate;
  PathSample path;
  path.start = x0;
  std::size_t x = x0;
  double t = 0.0;
  double next_large = dominating > 0.0 ? rng.exponential(dominating) : kInf;
  for (;;) {
    const double rate = sampler.total_rate(x);
    const double small_time = rate > 0.0 ? t + rng.exponential(rate) : kInf;
    std::size_t y;
    if (small_time < next_large) {
      if (!(small_time < t_max)) break;
      t = small_time;
      y = sampler.draw(x, rng.uniform());
    } else {
      if (!(next_large < t_max)) break;
      t = next_large;
      next_large = t + rng.exponential(dominating);
      if (!(rng.uniform() * dominating < large_total_[x])) continue;
      y = draw_from(&large_cumulative_[x * (n + 1)], n, large_total_[x], rng.uniform());
      ++path.spliced_jumps;
    }
    if (record_events) path.events.push_back({t, y});
    if (y == kCemetery) {
      path.killed = true;
      path.kill_time = t;
      if (ball) path.exit = ExitRecord{t, y};
      path.end_time = t;
      return path;
    }
    x = y;
    if (ball && outside(lat, *ball, y)) {
      path.exit = ExitRecord{t, y};
      path.end_time = t;
      return path;
    }
  }
  path.end_time = t_max;
  return path;
}

PathSample simulate_meyer(const MeyerSplit& split, std::size_t x0, double t_max, PathStream& rng) {
  if (!(t_max >= 0.0)) throw ConfigError("simulate_meyer: t_max must be nonnegative");
  return MeyerSimulator(split).run(x0, t_max, rng);
}

void check_ball_in_box(const Lattice& lattice, std::size_t x0, double r, double margin) {
  if (x0 >= lattice.size()) throw ConfigError("start site out of range");
  if (!(r > 0.0)) throw ConfigError("ball radius must be positive");
  const Point& c = lattice.site(x0);
  const double reach = r * (1.0 + margin);
  for (int i = 0; i < lattice.dimension(); ++i) {
    if (c[i] - reach < lattice.lo()[i] - 1e-12 || c[i] + reach > lattice.hi()[i] + 1e-12) {
      std::ostringstream os;
      os << "ball B(" << c.to_string() << ", r (1 + margin) = " << reach << ") is not inside the lattice box "
         << lattice.describe();
      throw ConfigError(os.str());
    }
  }
}

std::vector<ExitEstimate> estimate_exit_curve(const GeneratorMatrix& A, std::size_t x0, double r,
                                              const std::vector<double>& times, const McOptions& opts) {
  require_paths(opts);
  check_ball_in_box(A.lattice(), x0, r, opts.margin);
  if (times.empty()) throw ConfigError("estimate_exit_curve: no times given");
  for (double t : times)
    if (!(t >= 0.0)) throw ConfigError("exit times must be nonnegative");
  const double t_max = *std::max_element(times.begin(), times.end());
  const ChainSimulator sim(A);
  std::vector<double> exit_time(opts.paths, kInf);
  parallel_blocks(opts.paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      PathStream rng(opts.seed, i);
      const PathSample p = sim.run(x0, t_max, rng, Ball{x0, r}, false);
      if (p.exit) exit_time[i] = p.exit->time;
    }
  });
  std::vector<ExitEstimate> out;
  const double n = static_cast<double>(opts.paths);
  for (double t : times) {
    std::size_t count = 0;
    for (double e : exit_time) count += e < t;
    ExitEstimate est;
    est.probability = count / n;
    est.stderr_of_estimate = std::sqrt(est.probability * (1.0 - est.probability) / n);
    est.samples = opts.paths;
    est.seed = opts.seed;
    est.x0 = x0;
    est.r = r;
    est.t = t;
    out.push_back(est);
  }
  return out;
}

ExitEstimate estimate_exit_prob(const GeneratorMatrix& A, std::size_t x0, double r, double t, const McOptions& opts) {
  return estimate_exit_curve(A, x0, r, {t}, opts).front();
}

namespace {

template <class Simulator>
std::vector<double> exit_times(const Simulator& sim, std::size_t x0, double r, double t_max, const McOptions& opts) {
  std::vector<double> out(opts.paths, t_max);
  parallel_blocks(opts.paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      PathStream rng(opts.seed, i);
      const PathSample p = sim.run(x0, t_max, rng, Ball{x0, r}, false);
      if (p.exit) out[i] = p.exit->time;
    }
  });
  return out;
}

}  // namespace

MeanExitEstimate estimate_mean_exit(const GeneratorMatrix& A, std::size_t x0, double r, double beta1,
                                    const McOptions& opts) {
  require_paths(opts);
  check_ball_in_box(A.lattice(), x0, r, opts.margin);
  MeanExitEstimate est;
  est.t_max = 100.0 * std::pow(r, beta1);
  est.seed = opts.seed;
  est.r = r;
  const ChainSimulator sim(A);
  std::vector<double> times(opts.paths, est.t_max);
  std::vector<char> censored(opts.paths, 1);
  parallel_blocks(opts.paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      PathStream rng(opts.seed, i);
      const PathSample p = sim.run(x0, est.t_max, rng, Ball{x0, r}, false);
      if (p.exit) {
        times[i] = p.exit->time;
        censored[i] = 0;
      }
    }
  });
  const SampleMoments m = sample_moments(times);
  est.mean = m.mean;
  est.stderr_of_mean = m.stderr_of_mean;
  est.samples = m.count;
  est.censored = static_cast<std::size_t>(std::count(censored.begin(), censored.end(), 1));
  est.flagged = est.censored > 0.01 * static_cast<double>(opts.paths);
  return est;
}

std::vector<double> sample_exit_times(const GeneratorMatrix& A, std::size_t x0, double r, double t_max,
                                      const McOptions& opts) {
  check_ball_in_box(A.lattice(), x0, r, opts.margin);
  return exit_times(ChainSimulator(A), x0, r, t_max, opts);
}

std::vector<double> sample_exit_times(const MeyerSplit& split, std::size_t x0, double r, double t_max,
                                      const McOptions& opts) {
  check_ball_in_box(split.small.lattice(), x0, r, opts.margin);
  return exit_times(MeyerSimulator(split), x0, r, t_max, opts);
}

SplicedCount spliced_jump_count(const MeyerSplit& split, std::size_t x0, double t, const McOptions& opts) {
  const MeyerSimulator sim(split);
  std::vector<double> counts(opts.paths, 0.0);
  parallel_blocks(opts.paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      PathStream rng(opts.seed, i);
      counts[i] = static_cast<double>(sim.run(x0, t, rng, std::nullopt, false).spliced_jumps);
    }
  });
  const SampleMoments m = sample_moments(counts);
  return {m.mean, m.stderr_of_mean, split.dominating_rate * t};
}

LevySystemReport levy_system_check(const GeneratorMatrix& A, const PairFunction& f, std::size_t x0, double T,
                                   const McOptions& opts) {
  if (!(T >= 0.0)) throw ConfigError("levy_system_check: horizon must be nonnegative");
  const Lattice& lat = A.lattice();
  const std::size_t N = lat.size();
  if (x0 >= N) throw ConfigError("levy_system_check: start site out of range");
  // F(x) = sum_y f(x, y) q(x, y), in index order
  std::vector<double> F(N, 0.0);
  for (std::size_t x = 0; x < N; ++x) {
    const double* col = A.rates().col(static_cast<Eigen::Index>(x)).data();
    double s = 0.0;
    for (std::size_t y = 0; y < N; ++y)
      if (col[y] != 0.0) s += f(lat.site(x), lat.site(y)) * col[y];
    F[x] = s;
  }
  const ChainSimulator sim(A);
  std::vector<double> jumps(opts.paths), comp(opts.paths), diff(opts.paths);
  parallel_blocks(opts.paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      PathStream rng(opts.seed, i);
      const PathSample p = sim.run(x0, T, rng);
      double js = 0.0, cs = 0.0, t = 0.0;
      std::size_t x = x0;
      for (const JumpEvent& e : p.events) {
        cs += F[x] * (e.time - t);
        t = e.time;
        if (e.site == kCemetery) break;
        js += f(lat.site(x), lat.site(e.site));
        x = e.site;
      }
      if (!p.killed) cs += F[x] * (T - t);
      jumps[i] = js;
      comp[i] = cs;
      diff[i] = js - cs;
    }
  });
  const SampleMoments mj = sample_moments(jumps), mc = sample_moments(comp), md = sample_moments(diff);
  LevySystemReport r;
  r.jump_sum = mj.mean;
  r.compensator = mc.mean;
  r.jump_stderr = mj.stderr_of_mean;
  r.compensator_stderr = mc.stderr_of_mean;
  r.difference_stderr = md.stderr_of_mean;
  const double gap = std::fabs(r.jump_sum - r.compensator);
  if (r.difference_stderr > 0.0) {
    r.discrepancy = gap / r.difference_stderr;
    r.passed = gap <= 3.0 * r.difference_stderr;
  } else {
    r.discrepancy = gap == 0.0 ? 0.0 : kInf;
    r.passed = gap == 0.0;
  }
  return r;
}

}  // namespace jumplab

#include "scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

#include "jumplab/chain.hpp"
#include "jumplab/convergence.hpp"
#include "jumplab/errors.hpp"
#include "jumplab/functionals.hpp"
#include "jumplab/kernel.hpp"
#include "jumplab/lattice.hpp"
#include "jumplab/operators.hpp"
#include "jumplab/pathsim.hpp"
#include "jumplab/statistics.hpp"

namespace jumplab::cli {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell(double v) { return fmt(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(std::size_t v) { return std::to_string(v); }
std::string cell(bool v) { return v ? "true" : "false"; }
std::string cell(const std::string& v) { return v; }
std::string cell(const Point& p) {
  std::string out;
  for (int i = 0; i < p.dim(); ++i) out += (i ? ";" : "") + fmt(p[i]);
  return out;
}

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string> header) {
    bool first = true;
    for (const auto& h : header) {
      os_ << (first ? "" : ",") << h;
      first = false;
    }
    os_ << '\n';
  }
  template <class... Args>
  void row(const Args&... args) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cell(args), first = false), ...);
    os_ << '\n';
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

Json point_json(const Point& p) {
  Json a = Json::array();
  for (int i = 0; i < p.dim(); ++i) a.push_back(p[i]);
  return a;
}

struct Issues {
  std::vector<std::string> list;
  void add(std::string message) { list.push_back(std::move(message)); }
};

void merge(Json& base, const Json& user, const std::string& path, Issues& issues) {
  if (!user.is_object()) {
    issues.add(path + ": expected an object");
    return;
  }
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) {
      issues.add(where + ": unknown key");
      continue;
    }
    Json& slot = base[key];
    if (slot.is_object())
      merge(slot, value, where, issues);
    else
      slot = value;
  }
}

/// Typed access into a merged section; type errors are collected, not thrown.
class Reader {
 public:
  Reader(const Json& j, std::string path, Issues& issues) : j_(j), path_(std::move(path)), issues_(issues) {}

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void fail(const std::string& key, const std::string& message) const { issues_.add(where(key) + ": " + message); }

  bool is_null(const std::string& key) const { return j_.at(key).is_null(); }

  double num(const std::string& key) const {
    const Json& v = j_.at(key);
    if (!v.is_number()) {
      fail(key, "expected a number");
      return std::nan("");
    }
    return v.get<double>();
  }
  std::optional<double> opt_num(const std::string& key) const {
    if (is_null(key)) return std::nullopt;
    return num(key);
  }
  long integer(const std::string& key) const {
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) {
      fail(key, "expected an integer");
      return 0;
    }
    return v.get<long>();
  }
  std::optional<long> opt_integer(const std::string& key) const {
    if (is_null(key)) return std::nullopt;
    return integer(key);
  }
  bool flag(const std::string& key) const {
    const Json& v = j_.at(key);
    if (!v.is_boolean()) {
      fail(key, "expected true or false");
      return false;
    }
    return v.get<bool>();
  }
  std::string str(const std::string& key) const {
    const Json& v = j_.at(key);
    if (!v.is_string()) {
      fail(key, "expected a string");
      return {};
    }
    return v.get<std::string>();
  }
  std::vector<double> list(const std::string& key) const {
    const Json& v = j_.at(key);
    std::vector<double> out;
    if (!v.is_array()) {
      fail(key, "expected a list of numbers");
      return out;
    }
    for (const Json& e : v) {
      if (!e.is_number()) {
        fail(key, "expected a list of numbers");
        return {};
      }
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& key) const {
    const Json& v = j_.at(key);
    std::vector<std::string> out;
    if (!v.is_array()) {
      fail(key, "expected a list of strings");
      return out;
    }
    for (const Json& e : v) {
      if (!e.is_string()) {
        fail(key, "expected a list of strings");
        return {};
      }
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  Point point(const std::string& key, int dim) const {
    const std::vector<double> v = list(key);
    Point p(dim);
    if (static_cast<int>(v.size()) != dim) {
      fail(key, "expected " + std::to_string(dim) + " coordinate(s)");
      return p;
    }
    for (int i = 0; i < dim; ++i) p[i] = v[i];
    return p;
  }
  std::vector<Point> points(const std::string& key, int dim) const {
    const Json& v = j_.at(key);
    std::vector<Point> out;
    if (!v.is_array() || v.empty()) {
      fail(key, "expected a nonempty list of points");
      return out;
    }
    for (const Json& e : v) {
      Point p(dim);
      if (!e.is_array() || static_cast<int>(e.size()) != dim) {
        fail(key, "every point needs " + std::to_string(dim) + " coordinate(s)");
        return {};
      }
      for (int i = 0; i < dim; ++i) {
        if (!e[i].is_number()) {
          fail(key, "coordinates must be numbers");
          return {};
        }
        p[i] = e[i].get<double>();
      }
      out.push_back(p);
    }
    return out;
  }

  void positive(const std::string& key, double v) const {
    if (!(v > 0.0) || !std::isfinite(v)) fail(key, "must be positive");
  }
  void positive_list(const std::string& key, const std::vector<double>& v, bool increasing) const {
    if (v.empty()) fail(key, "must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] > 0.0) || !std::isfinite(v[i])) {
        fail(key, "entries must be positive");
        return;
      }
      if (increasing && i > 0 && !(v[i] > v[i - 1])) {
        fail(key, "entries must be strictly increasing");
        return;
      }
    }
  }

 private:
  const Json& j_;
  std::string path_;
  Issues& issues_;
};

// ----------------------------------------------------------------------------
// shared context

struct SequenceDecl {
  double amplitude = 0.5;
  std::vector<double> omegas;
};

struct Context {
  std::optional<KernelSpec> kernel;
  std::string family;
  double order_max = 0.0;  ///< largest local order, for the touching-cell divergence check
  int dim = 1;
  int n = 128;
  Point lo, hi;
  std::optional<Lattice> lattice;
  AdjacentPolicy policy = AdjacentPolicy::Literal;
  GeneratorMode mode = GeneratorMode::Killed;
  int quad_order = 4;
  SequenceDecl sequence;
  std::uint64_t seed = 1;
  int threads = 1;

  ConductanceOptions conductance_options() const {
    ConductanceOptions o;
    o.quad_order = quad_order;
    o.policy = policy;
    o.threads = threads;
    return o;
  }

  const ConductanceMatrix& conductances() {
    if (!C_) C_ = std::make_unique<ConductanceMatrix>(build_conductances(*kernel, *lattice, conductance_options()));
    return *C_;
  }
  const GeneratorMatrix& generator() {
    if (!A_) A_ = std::make_unique<GeneratorMatrix>(assemble_generator(conductances(), mode, *kernel));
    return *A_;
  }
  const SpectralDecomp& spectral() {
    if (!D_) D_ = std::make_unique<SpectralDecomp>(spectral_decompose(generator()));
    return *D_;
  }

  McOptions mc(std::size_t paths, double margin = 1.0) const {
    McOptions o;
    o.paths = paths;
    o.seed = seed;
    o.threads = threads;
    o.margin = margin;
    return o;
  }

 private:
  std::shared_ptr<ConductanceMatrix> C_;
  std::shared_ptr<GeneratorMatrix> A_;
  std::shared_ptr<SpectralDecomp> D_;
};

Json kernel_defaults() {
  return Json{{"family", "stable"},
              {"dim", 1},
              {"alpha", 0.5},
              {"kappa", 1.0},
              {"order", {{"base", 0.5}, {"amplitude", 0.2}, {"frequency", 1.0}, {"epsilon", 0.1}, {"log_lip", 0.2}}},
              {"intensity", 1.0},
              {"table", ""},
              {"modulation", {{"amplitude", 0.0}, {"omega", 0.0}}},
              {"truncation", nullptr},
              {"bounds",
               {{"kappa1", nullptr},
                {"kappa2", nullptr},
                {"beta1", nullptr},
                {"beta2", nullptr},
                {"kappa3", nullptr},
                {"kappa4", nullptr},
                {"alpha", nullptr},
                {"kappa5", nullptr}}}};
}

void apply_bound_overrides(KernelBounds& b, const Reader& r) {
  auto set = [&](const char* key, double& slot) {
    if (auto v = r.opt_num(key)) slot = *v;
  };
  set("kappa1", b.kappa1);
  set("kappa2", b.kappa2);
  set("beta1", b.beta1);
  set("beta2", b.beta2);
  set("kappa3", b.kappa3);
  set("kappa4", b.kappa4);
  set("alpha", b.alpha);
  if (auto v = r.opt_num("kappa5")) b.kappa5 = *v;
}

void parse_kernel(const Json& j, Context& ctx, Issues& issues) {
  const Reader r(j, "kernel", issues);
  const long dim = r.integer("dim");
  if (dim != 1 && dim != 2) {
    r.fail("dim", "must be 1 or 2");
    return;
  }
  ctx.dim = static_cast<int>(dim);
  ctx.family = r.str("family");
  const Reader bounds(j.at("bounds"), "kernel.bounds", issues);
  const std::size_t before = issues.list.size();
  try {
    std::optional<KernelSpec> k;
    if (ctx.family == "stable") {
      const double alpha = r.num("alpha"), kappa = r.num("kappa");
      if (!(alpha > 0.0 && alpha < 2.0)) r.fail("alpha", "must lie in (0, 2)");
      r.positive("kappa", kappa);
      if (issues.list.size() != before) return;
      k = KernelSpec::isotropic_stable(ctx.dim, alpha, kappa);
      ctx.order_max = alpha;
    } else if (ctx.family == "variable-order") {
      const Reader o(j.at("order"), "kernel.order", issues);
      const double base = o.num("base"), amp = std::fabs(o.num("amplitude")), freq = o.num("frequency");
      const double eps = o.num("epsilon"), lip = o.num("log_lip"), intensity = r.num("intensity");
      if (!(eps > 0.0 && eps < 1.0)) o.fail("epsilon", "must lie in (0, 1)");
      if (!(base - amp > eps && base + amp < 2.0 - eps))
        o.fail("base", "base +- amplitude must stay inside (epsilon, 2 - epsilon)");
      if (!(lip >= 0.0)) o.fail("log_lip", "must be nonnegative");
      r.positive("intensity", intensity);
      if (issues.list.size() != before) return;
      const double smin = base - amp, smax = base + amp;
      KernelBounds b;
      b.kappa1 = intensity;
      b.kappa2 = intensity;
      b.beta1 = smin;
      b.beta2 = smax;
      b.kappa3 = intensity * unit_sphere_area(ctx.dim) / smin;
      b.kappa4 = intensity;
      b.alpha = smin;
      apply_bound_overrides(b, bounds);
      k = KernelSpec::variable_order(ctx.dim, OrderField::sine(ctx.dim, base, amp, freq, eps, lip), intensity, intensity,
                                     intensity, b);
      ctx.order_max = smax;
    } else if (ctx.family == "tabulated") {
      if (ctx.dim != 1) r.fail("dim", "tabulated kernels are one-dimensional");
      const std::string path = r.str("table");
      std::ifstream in(path);
      if (!in) r.fail("table", "cannot open '" + path + "'");
      if (issues.list.size() != before) return;
      KernelBounds b;
      apply_bound_overrides(b, bounds);
      k = load_tabulated_csv(in, b);
      ctx.order_max = 0.0;
    } else {
      r.fail("family", "expected stable, variable-order or tabulated");
      return;
    }
    if (ctx.family != "tabulated") {
      KernelBounds b = k->bounds();
      apply_bound_overrides(b, bounds);
      k = k->with_bounds(b);
    }
    const Reader m(j.at("modulation"), "kernel.modulation", issues);
    const double amp = m.num("amplitude"), omega = m.num("omega");
    if (amp != 0.0) {
      if (!(std::fabs(amp) < 1.0)) m.fail("amplitude", "must satisfy |amplitude| < 1");
      else k = KernelSpec::modulated(*k, Modulation::oscillatory(ctx.dim, amp, omega));
    }
    if (auto t = r.opt_num("truncation")) {
      r.positive("truncation", *t);
      if (*t > 0.0) k = k->with_truncation(*t);
    }
    k->bounds().validate();
    if (issues.list.size() == before) ctx.kernel = std::move(k);
  } catch (const ConfigError& e) {
    issues.add(std::string("kernel: ") + e.what());
  }
}

void parse_context(const Json& config, Context& ctx, Issues& issues) {
  const Reader top(config, "", issues);
  const long seed = top.integer("seed");
  if (seed < 0) top.fail("seed", "must be nonnegative");
  ctx.seed = static_cast<std::uint64_t>(seed);
  parse_kernel(config.at("kernel"), ctx, issues);

  const Reader lat(config.at("lattice"), "lattice", issues);
  const std::size_t before_lattice = issues.list.size();
  const long n = lat.integer("n");
  if (n < 2 || n > 4096) lat.fail("n", "must lie in [2, 4096]");
  ctx.n = static_cast<int>(n);
  ctx.lo = lat.point("lo", ctx.dim);
  ctx.hi = lat.point("hi", ctx.dim);
  if (issues.list.size() == before_lattice) {
    try {
      ctx.lattice = build_lattice(ctx.dim, ctx.n, ctx.lo, ctx.hi);
    } catch (const ConfigError& e) {
      issues.add(std::string("lattice: ") + e.what());
    }
  }

  const Reader ch(config.at("chain"), "chain", issues);
  try {
    ctx.policy = parse_adjacent_policy(ch.str("policy"));
  } catch (const ConfigError& e) {
    ch.fail("policy", e.what());
  }
  try {
    ctx.mode = parse_generator_mode(ch.str("mode"));
  } catch (const ConfigError& e) {
    ch.fail("mode", e.what());
  }
  const long q = ch.integer("quad_order");
  if (q < 1 || q > 20) ch.fail("quad_order", "must lie in [1, 20]");
  ctx.quad_order = static_cast<int>(q);

  const Reader seq(config.at("sequence"), "sequence", issues);
  ctx.sequence.amplitude = seq.num("amplitude");
  if (!(std::fabs(ctx.sequence.amplitude) < 1.0)) seq.fail("amplitude", "must satisfy |amplitude| < 1");
  ctx.sequence.omegas = seq.list("omegas");
  seq.positive_list("omegas", ctx.sequence.omegas, true);
}

void require_generator(const Context& ctx, const std::string& type, Issues& issues) {
  if (ctx.policy == AdjacentPolicy::Literal && ctx.order_max >= 1.0)
    issues.add(type + ": literal conductances diverge for touching cells when the kernel order reaches 1; "
                      "set chain.policy to moment-matched");
}

void require_spectral(const Context& ctx, const std::string& type, Issues& issues) {
  if (ctx.lattice && ctx.lattice->size() > kDenseSpectralLimit)
    issues.add(type + ": dense spectral work is limited to " + std::to_string(kDenseSpectralLimit) + " sites, lattice has " +
               std::to_string(ctx.lattice->size()));
}

std::size_t site_for(const Context& ctx, const Reader& r, const std::string& key) {
  const Point x = r.point(key, ctx.dim);
  if (!ctx.lattice) return 0;
  for (int i = 0; i < ctx.dim; ++i)
    if (!(x[i] >= ctx.lo[i] && x[i] <= ctx.hi[i])) {
      r.fail(key, "lies outside the lattice box");
      return 0;
    }
  return ctx.lattice->nearest(x);
}

void require_ball(const Context& ctx, const Reader& r, const std::string& key, std::size_t x0, double radius,
                  double margin) {
  if (!ctx.lattice) return;
  try {
    check_ball_in_box(*ctx.lattice, x0, radius, margin);
  } catch (const ConfigError& e) {
    r.fail(key, e.what());
  }
}

/// Lattice test functions selectable by name.
std::function<double(const Point&)> named_function(const std::string& name) {
  if (name == "bump")
    return [](const Point& x) {
      double v = 1.0;
      for (int i = 0; i < x.dim(); ++i) v *= bump(x[i], 0.0, 1.0);
      return v;
    };
  if (name == "cos") return [](const Point& x) { return std::cos(2.0 * x[0]); };
  if (name == "one") return [](const Point&) { return 1.0; };
  if (name == "sign") return [](const Point& x) { return x[0] > 0.0 ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0); };
  if (name == "linear") return [](const Point& x) { return x[0]; };
  return nullptr;
}

std::function<double(const Point&)> function_param(const Reader& r, const std::string& key) {
  const std::string name = r.str(key);
  auto f = named_function(name);
  if (!f) r.fail(key, "unknown function '" + name + "' (bump, cos, one, sign, linear)");
  return f;
}

Eigen::VectorXd on_sites(const Lattice& lat, const std::function<double(const Point&)>& f) {
  Eigen::VectorXd v(lat.size());
  for (std::size_t x = 0; x < lat.size(); ++x) v(x) = f(lat.site(x));
  return v;
}

PairFunction pair_function(const std::string& name) {
  if (name == "zero") return [](const Point&, const Point&) { return 0.0; };
  if (name == "capped_distance") return [](const Point& x, const Point& y) { return std::fmin(1.0, distance(x, y)); };
  if (name == "far_indicator") return [](const Point& x, const Point& y) { return distance(x, y) > 0.25 ? 1.0 : 0.0; };
  if (name == "weighted_square")
    return [](const Point& x, const Point& y) {
      const double r = distance(x, y);
      return (1.0 + x[0] * x[0]) * std::fmin(1.0, r * r);
    };
  return nullptr;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

std::vector<double> dyadic(int from, int to) {
  std::vector<double> out;
  for (int k = from; k <= to; ++k) out.push_back(std::ldexp(1.0, -k));
  return out;
}

// ----------------------------------------------------------------------------
// experiments

struct Experiment {
  std::string name;
  std::string summary;
  Json defaults;
  std::function<void(const Json&, Context&, Issues&)> validate;
  std::function<void(const Json&, Context&, ExperimentResult&)> run;
};

void add_check(ExperimentResult& out, std::string name, bool passed, Json detail = Json::object()) {
  out.checks.push_back({std::move(name), passed, std::move(detail)});
}

// kernel-verify ---------------------------------------------------------------

SamplingPlan sampling_plan(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "kernel-verify", issues);
  SamplingPlan p;
  p.center = r.point("center", ctx.dim);
  p.sample_radius = r.num("sample_radius");
  r.positive("sample_radius", p.sample_radius);
  p.halton_points = static_cast<int>(r.integer("halton_points"));
  p.random_points = static_cast<int>(r.integer("random_points"));
  if (p.halton_points < 0 || p.random_points < 0 || p.halton_points + p.random_points < 1)
    r.fail("halton_points", "need at least one sample point");
  p.separations_per_point = static_cast<int>(r.integer("separations"));
  if (p.separations_per_point < 2) r.fail("separations", "must be at least 2");
  p.min_separation = r.num("min_separation");
  if (!(p.min_separation > 0.0 && p.min_separation < 1.0)) r.fail("min_separation", "must lie in (0, 1)");
  p.tail_points = static_cast<int>(r.integer("tail_points"));
  if (p.tail_points < 1) r.fail("tail_points", "must be at least 1");
  p.z0 = r.point("z0", ctx.dim);
  p.r = r.num("r");
  if (!(p.r > 0.0 && p.r <= 1.0 / 6.0)) r.fail("r", "must lie in (0, 1/6] so that B(z0, 3r) pairs stay within unit distance");
  p.check_defect = r.flag("check_defect");
  if (p.check_defect && !(ctx.kernel && ctx.kernel->bounds().kappa5))
    r.fail("check_defect", "needs kernel.bounds.kappa5");
  p.seed = ctx.seed;
  return p;
}

void run_kernel_verify(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const SamplingPlan plan = sampling_plan(j, ctx, ignore);
  const BoundsReport report = verify_bounds(*ctx.kernel, plan);
  Csv csv{"condition", "passed", "worst_ratio", "witness_x", "witness_y", "witness_value", "samples"};
  for (const ConditionResult& c : report.conditions) {
    csv.row(c.name, c.passed, c.worst_ratio, c.witness_x, c.witness_y, c.witness_value, c.samples);
    Json detail{{"worst_ratio", c.worst_ratio},
                {"witness_x", point_json(c.witness_x)},
                {"witness_y", point_json(c.witness_y)},
                {"witness_value", c.witness_value},
                {"samples", c.samples}};
    if (!c.note.empty()) detail["note"] = c.note;
    add_check(out, c.name, c.passed, std::move(detail));
  }
  out.artifacts.push_back({"bounds.csv", csv.str()});
  const KernelBounds& b = ctx.kernel->bounds();
  out.summary = Json{{"family", ctx.kernel->family_name()},
                     {"bounds",
                      {{"kappa1", b.kappa1},
                       {"kappa2", b.kappa2},
                       {"beta1", b.beta1},
                       {"beta2", b.beta2},
                       {"kappa3", b.kappa3},
                       {"kappa4", b.kappa4},
                       {"alpha", b.alpha}}}};
}

// functionals -----------------------------------------------------------------

struct FunctionalsParams {
  Point z0;
  std::vector<double> radii;
  SupremumGrid grid;
  double threshold = 10.0;
};

FunctionalsParams functionals_params(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "functionals", issues);
  FunctionalsParams p;
  p.z0 = r.point("z0", ctx.dim);
  p.radii = r.list("radii");
  r.positive_list("radii", p.radii, false);
  p.grid.points_per_axis = static_cast<int>(r.integer("points_per_axis"));
  if (p.grid.points_per_axis < 1) r.fail("points_per_axis", "must be positive");
  p.grid.inner_dyadic_depth = static_cast<int>(r.integer("inner_dyadic_depth"));
  if (p.grid.inner_dyadic_depth < 0) r.fail("inner_dyadic_depth", "must be nonnegative");
  p.grid.threads = ctx.threads;
  p.threshold = r.num("threshold");
  r.positive("threshold", p.threshold);
  if (ctx.family == "variable-order")
    for (double rr : p.radii)
      if (!(rr < 1.0)) r.fail("radii", "comparability radii must be below 1");
  return p;
}

void run_functionals(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const FunctionalsParams p = functionals_params(j, ctx, ignore);
  const KernelSpec& k = *ctx.kernel;
  const KernelBounds& b = k.bounds();
  Csv csv{"r", "L1", "L2", "L", "lower_bound", "quadrature_error"};
  bool bound_ok = true;
  double worst = 0.0;
  for (double r : p.radii) {
    const FunctionalValue l1 = compute_L1(k, p.z0, r), l2 = compute_L2(k, p.z0, r);
    const LEstimate L = compute_L(k, p.z0, r, b.alpha, p.grid);
    const double lb = exit_functional_lower_bound(ctx.dim, b.kappa4, b.alpha, r);
    bound_ok = bound_ok && L.total.value >= lb;
    worst = std::fmax(worst, lb / L.total.value);
    csv.row(r, l1.value, l2.value, L.total.value, lb, L.total.quadrature_error);
  }
  out.artifacts.push_back({"functionals.csv", csv.str()});
  add_check(out, "exit_functional_lower_bound", bound_ok, Json{{"worst_bound_over_L", worst}});
  if (ctx.family == "variable-order") {
    const ComparabilityReport rep = order_comparability(k, p.z0, p.radii, p.threshold, p.grid);
    Csv comp{"r", "L", "compensated", "quadrature_error"};
    for (const ComparabilityRow& row : rep.rows) comp.row(row.r, row.L, row.compensated, row.quadrature_error);
    out.artifacts.push_back({"comparability.csv", comp.str()});
    add_check(out, "order_comparability", rep.passed, Json{{"ratio", rep.ratio}, {"threshold", rep.threshold}});
    add_check(out, "order_envelope", rep.envelope.passed,
              Json{{"worst_ratio", rep.envelope.worst_ratio}, {"constant", rep.envelope.constant}});
  }
}

// chain-build -----------------------------------------------------------------

void run_chain_build(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const Reader r(j, "chain-build", ignore);
  const ConductanceMatrix& C = ctx.conductances();
  const GeneratorMatrix& A = ctx.generator();
  if (r.flag("write_conductances")) {
    std::ostringstream os;
    write_triples(os, C);
    out.artifacts.push_back({"conductances.csv", os.str()});
  }
  if (r.flag("write_generator")) {
    std::ostringstream os;
    write_triples(os, A, ctx.policy);
    out.artifacts.push_back({"generator.csv", os.str()});
  }
  const double asym = (C.entries - C.entries.transpose()).cwiseAbs().maxCoeff();
  add_check(out, "conductance_symmetry", asym == 0.0, Json{{"max_asymmetry", asym}});
  const Eigen::VectorXd rs = A.row_sum();
  const double row_dev = A.mode() == GeneratorMode::Conservative ? max_abs(rs) : max_abs(rs + A.kill());
  const double row_tol = A.mode() == GeneratorMode::Conservative ? 0.0 : 1e-12 * A.max_total_rate();
  add_check(out, "generator_row_sums", row_dev <= row_tol, Json{{"max_deviation", row_dev}, {"tolerance", row_tol}});
  out.summary = Json{{"sites", A.size()},
                     {"lattice", A.lattice().describe()},
                     {"mode", to_string(A.mode())},
                     {"policy", to_string(ctx.policy)},
                     {"max_total_rate", A.max_total_rate()}};
  if (A.mode() == GeneratorMode::Killed && ctx.dim == 1) {
    const Lattice& lat = A.lattice();
    const Point mid{0.5 * (ctx.lo[0] + ctx.hi[0])};
    const std::size_t x = lat.nearest(mid);
    const double w = std::fmin(lat.cell_box_hi()[0] - lat.site(x)[0], lat.site(x)[0] - lat.cell_box_lo()[0]);
    const double tail = 2.0 * compute_L1(*ctx.kernel, lat.site(x), w).value;
    const double rel = std::fabs(A.kill()(x) - tail) / tail;
    add_check(out, "kill_rate_vs_tail", rel <= 0.05,
              Json{{"site", cell(lat.site(x))}, {"kill_rate", A.kill()(x)}, {"twice_L1", tail}, {"relative", rel}});
  }
}

// exit-mc ---------------------------------------------------------------------

struct ExitParams {
  std::size_t x0 = 0;
  std::vector<double> radii, times;
  std::size_t paths = 0;
  double margin = 1.0;
  SupremumGrid grid;
};

ExitParams exit_params(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "exit-mc", issues);
  ExitParams p;
  p.x0 = site_for(ctx, r, "x0");
  p.radii = r.list("radii");
  r.positive_list("radii", p.radii, false);
  p.times = r.list("times");
  r.positive_list("times", p.times, true);
  const long paths = r.integer("paths");
  if (paths < 2) r.fail("paths", "must be at least 2");
  p.paths = static_cast<std::size_t>(std::max(paths, 0L));
  p.margin = r.num("margin");
  if (!(p.margin >= 0.0)) r.fail("margin", "must be nonnegative");
  p.grid.points_per_axis = static_cast<int>(r.integer("points_per_axis"));
  if (p.grid.points_per_axis < 1) r.fail("points_per_axis", "must be positive");
  p.grid.threads = ctx.threads;
  for (double rad : p.radii) require_ball(ctx, r, "radii", p.x0, rad, p.margin);
  return p;
}

void run_exit_mc(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const ExitParams p = exit_params(j, ctx, ignore);
  const GeneratorMatrix& A = ctx.generator();
  const McOptions mc = ctx.mc(p.paths, p.margin);
  Csv csv{"r", "t", "estimate", "stderr", "N", "seed", "L_value", "ratio"};
  bool monotone = true, finite = true;
  double sup_ratio = 0.0, worst_drop = 0.0;
  for (double r : p.radii) {
    const auto curve = estimate_exit_curve(A, p.x0, r, p.times, mc);
    const double L = compute_L(*ctx.kernel, A.lattice().site(p.x0), r, ctx.kernel->bounds().alpha, p.grid).total.value;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const ExitEstimate& e = curve[i];
      const double ratio = e.probability / (e.t * L);
      finite = finite && std::isfinite(ratio);
      sup_ratio = std::fmax(sup_ratio, ratio);
      csv.row(r, e.t, e.probability, e.stderr_of_estimate, e.samples, e.seed, L, ratio);
      if (i > 0) {
        const ExitEstimate& prev = curve[i - 1];
        const double joint = std::hypot(prev.stderr_of_estimate, e.stderr_of_estimate);
        const double drop = prev.probability - e.probability;
        worst_drop = std::fmax(worst_drop, drop);
        monotone = monotone && drop <= 3.0 * joint;
      }
    }
  }
  out.artifacts.push_back({"exit.csv", csv.str()});
  add_check(out, "exit_probability_nondecreasing_in_t", monotone, Json{{"largest_drop", worst_drop}});
  add_check(out, "exit_ratio_finite", finite, Json{{"sup_ratio", sup_ratio}});
  out.summary = Json{{"sup_ratio", sup_ratio}, {"paths", p.paths}, {"seed", ctx.seed}};
}

// mean-exit-mc ----------------------------------------------------------------

struct MeanExitParams {
  std::size_t x0 = 0;
  std::vector<double> radii;
  std::size_t paths = 0;
  double margin = 1.0;
  double expected_slope = 0.0;
  double tolerance = 0.15;
};

MeanExitParams mean_exit_params(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "mean-exit-mc", issues);
  MeanExitParams p;
  p.x0 = site_for(ctx, r, "x0");
  p.radii = r.list("radii");
  r.positive_list("radii", p.radii, true);
  if (p.radii.size() < 2) r.fail("radii", "need at least two radii for a slope");
  const long paths = r.integer("paths");
  if (paths < 2) r.fail("paths", "must be at least 2");
  p.paths = static_cast<std::size_t>(std::max(paths, 0L));
  p.margin = r.num("margin");
  if (!(p.margin >= 0.0)) r.fail("margin", "must be nonnegative");
  if (auto s = r.opt_num("expected_slope"))
    p.expected_slope = *s;
  else if (ctx.kernel)
    p.expected_slope = ctx.kernel->bounds().alpha;
  p.tolerance = r.num("slope_tolerance");
  r.positive("slope_tolerance", p.tolerance);
  for (double rad : p.radii) require_ball(ctx, r, "radii", p.x0, rad, p.margin);
  return p;
}

void run_mean_exit(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const MeanExitParams p = mean_exit_params(j, ctx, ignore);
  const GeneratorMatrix& A = ctx.generator();
  const McOptions mc = ctx.mc(p.paths, p.margin);
  Csv csv{"r", "mean", "stderr", "N", "censored", "t_max", "seed"};
  std::vector<double> lr, lm;
  bool flagged = false;
  for (double r : p.radii) {
    const MeanExitEstimate e = estimate_mean_exit(A, p.x0, r, ctx.kernel->bounds().beta1, mc);
    csv.row(r, e.mean, e.stderr_of_mean, e.samples, e.censored, e.t_max, e.seed);
    lr.push_back(std::log(r));
    lm.push_back(std::log(e.mean));
    flagged = flagged || e.flagged;
  }
  const LinearFit fit = least_squares(lr, lm);
  out.artifacts.push_back({"mean_exit.csv", csv.str()});
  add_check(out, "mean_exit_slope", std::fabs(fit.slope - p.expected_slope) <= p.tolerance,
            Json{{"slope", fit.slope}, {"expected", p.expected_slope}, {"tolerance", p.tolerance}});
  out.summary = Json{{"slope", fit.slope}, {"rms_residual", fit.rms_residual}, {"censoring_flagged", flagged}};
}

// levy-check ------------------------------------------------------------------

struct LevyParams {
  std::size_t x0 = 0;
  double T = 0.5;
  std::size_t paths = 0;
  std::vector<std::string> functions;
};

LevyParams levy_params(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "levy-check", issues);
  LevyParams p;
  p.x0 = site_for(ctx, r, "x0");
  p.T = r.num("T");
  r.positive("T", p.T);
  const long paths = r.integer("paths");
  if (paths < 2) r.fail("paths", "must be at least 2");
  p.paths = static_cast<std::size_t>(std::max(paths, 0L));
  p.functions = r.strings("functions");
  if (p.functions.empty()) r.fail("functions", "must not be empty");
  for (const auto& f : p.functions)
    if (!pair_function(f)) r.fail("functions", "unknown function '" + f + "' (zero, capped_distance, far_indicator, weighted_square)");
  return p;
}

void run_levy(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const LevyParams p = levy_params(j, ctx, ignore);
  const GeneratorMatrix& A = ctx.generator();
  const McOptions mc = ctx.mc(p.paths);
  Csv csv{"function", "jump_sum", "compensator", "jump_stderr", "compensator_stderr", "difference_stderr",
          "discrepancy", "passed"};
  for (const auto& name : p.functions) {
    const LevySystemReport rep = levy_system_check(A, pair_function(name), p.x0, p.T, mc);
    csv.row(name, rep.jump_sum, rep.compensator, rep.jump_stderr, rep.compensator_stderr, rep.difference_stderr,
            rep.discrepancy, rep.passed);
    add_check(out, "levy_system/" + name, rep.passed,
              Json{{"jump_sum", rep.jump_sum}, {"compensator", rep.compensator}, {"discrepancy", rep.discrepancy}});
  }
  out.artifacts.push_back({"levy.csv", csv.str()});
}

// heat-kernel -----------------------------------------------------------------

struct HeatParams {
  std::vector<double> times;
  std::size_t y = 0;
};

HeatParams heat_params(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "heat-kernel", issues);
  HeatParams p;
  p.times = r.list("times");
  r.positive_list("times", p.times, true);
  p.y = site_for(ctx, r, "y");
  require_spectral(ctx, "heat-kernel", issues);
  return p;
}

void run_heat(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const HeatParams p = heat_params(j, ctx, ignore);
  const SpectralDecomp& D = ctx.spectral();
  const Lattice& lat = ctx.generator().lattice();
  Csv csv{"t", "x", "value"};
  double asym = 0.0, ck = 0.0, negative = 0.0;
  for (double t : p.times) {
    const HeatKernelMatrix hk = heat_kernel(D, t);
    const double scale = hk.values.cwiseAbs().maxCoeff();
    for (std::size_t x = 0; x < lat.size(); ++x) csv.row(t, lat.site(x), hk.values(x, p.y));
    asym = std::fmax(asym, (hk.values - hk.values.transpose()).cwiseAbs().maxCoeff() / scale);
    negative = std::fmax(negative, -hk.values.minCoeff() / scale);
    const HeatKernelMatrix twice = heat_kernel(D, 2.0 * t);
    const Eigen::MatrixXd composed = hk.values * hk.values * D.nu;
    ck = std::fmax(ck, (composed - twice.values).cwiseAbs().maxCoeff() / twice.values.cwiseAbs().maxCoeff());
  }
  out.artifacts.push_back({"heat_kernel.csv", csv.str()});
  add_check(out, "heat_kernel_symmetry", asym <= 1e-8, Json{{"relative_asymmetry", asym}});
  add_check(out, "chapman_kolmogorov", ck <= 1e-8, Json{{"relative_error", ck}});
  add_check(out, "heat_kernel_nonnegative", negative <= 1e-8, Json{{"relative_negative_part", negative}});
  out.summary = Json{{"lowest_eigenvalue", D.eigenvalues(0)}, {"sites", lat.size()}};
}

// resolvent-check -------------------------------------------------------------

struct ResolventParams {
  double lambda = 1.0, t = 0.3;
  std::function<double(const Point&)> f, g;
};

ResolventParams resolvent_params(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "resolvent-check", issues);
  ResolventParams p;
  p.lambda = r.num("lambda");
  r.positive("lambda", p.lambda);
  p.t = r.num("t");
  r.positive("t", p.t);
  p.f = function_param(r, "f");
  p.g = function_param(r, "g");
  require_spectral(ctx, "resolvent-check", issues);
  return p;
}

void run_resolvent(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const ResolventParams p = resolvent_params(j, ctx, ignore);
  const ConductanceMatrix& C = ctx.conductances();
  const GeneratorMatrix& A = ctx.generator();
  const SpectralDecomp& D = ctx.spectral();
  const Lattice& lat = A.lattice();
  const Eigen::VectorXd f = on_sites(lat, p.f), g = on_sites(lat, p.g);
  const double fscale = std::fmax(1.0, max_abs(f));

  const ResolventIdentityReport id = verify_resolvent_identity(C, A, p.lambda, f, g);
  add_check(out, "resolvent_identity", id.relative <= 1e-8 && id.energy_relative <= 1e-8,
            Json{{"form", id.form}, {"right_side", id.right_side}, {"relative", id.relative},
                 {"energy_relative", id.energy_relative}});

  const Eigen::VectorXd pt_unif = semigroup_apply(A, p.t, f), pt_spec = spectral_semigroup(D, p.t, f);
  const double sg = max_abs(pt_unif - pt_spec) / fscale;
  add_check(out, "spectral_vs_uniformization", sg <= 1e-8, Json{{"relative_error", sg}});

  const Eigen::VectorXd u = resolvent(A, p.lambda, f);
  const double rs = max_abs(u - spectral_resolvent(D, p.lambda, f)) / std::fmax(max_abs(u), 1e-300);
  add_check(out, "spectral_vs_cholesky_resolvent", rs <= 1e-8, Json{{"relative_error", rs}});

  const Eigen::VectorXd h = semigroup_preimage(D, p.lambda, p.t, f);
  const double pre = max_abs(resolvent(A, p.lambda, h) - pt_spec) / std::fmax(max_abs(pt_spec), 1e-300);
  add_check(out, "resolvent_of_preimage_equals_semigroup", pre <= 1e-9, Json{{"relative_error", pre}});

  if (A.mode() == GeneratorMode::Conservative) {
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(lat.size());
    const double p1 = max_abs(semigroup_apply(A, p.t, one) - one);
    const double u1 = max_abs(resolvent(A, p.lambda, one) - one / p.lambda);
    add_check(out, "semigroup_preserves_constants", p1 == 0.0, Json{{"max_deviation", p1}});
    add_check(out, "resolvent_of_constants", u1 == 0.0, Json{{"max_deviation", u1}});
  }
  out.summary = Json{{"energy", id.energy}, {"energy_bound", inner_product(lat, f, u)}};
}

// harmonic --------------------------------------------------------------------

struct HarmonicParams {
  std::size_t x0 = 0;
  double radius = 0.5;
  std::function<double(const Point&)> boundary;
  std::vector<double> times;
  std::size_t paths = 0;
};

HarmonicParams harmonic_params(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "harmonic", issues);
  HarmonicParams p;
  p.x0 = site_for(ctx, r, "x0");
  p.radius = r.num("radius");
  r.positive("radius", p.radius);
  p.boundary = function_param(r, "boundary");
  p.times = r.list("martingale_times");
  r.positive_list("martingale_times", p.times, true);
  const long paths = r.integer("paths");
  if (paths < 2) r.fail("paths", "must be at least 2");
  p.paths = static_cast<std::size_t>(std::max(paths, 0L));
  require_ball(ctx, r, "radius", p.x0, p.radius, 0.0);
  return p;
}

void run_harmonic(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const HarmonicParams p = harmonic_params(j, ctx, ignore);
  const GeneratorMatrix& A = ctx.generator();
  const Lattice& lat = A.lattice();
  const Eigen::VectorXd bd = on_sites(lat, p.boundary);
  const HarmonicSolution h = solve_harmonic(A, Ball{p.x0, p.radius}, bd);
  Csv csv{"x", "value", "interior"};
  std::vector<char> inside(lat.size(), 0);
  for (std::size_t x : h.interior) inside[x] = 1;
  double lo = A.mode() == GeneratorMode::Killed ? 0.0 : std::numeric_limits<double>::infinity();
  double hi = A.mode() == GeneratorMode::Killed ? 0.0 : -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < lat.size(); ++x) {
    csv.row(lat.site(x), h.values(x), static_cast<bool>(inside[x]));
    if (!inside[x]) {
      lo = std::fmin(lo, bd(x));
      hi = std::fmax(hi, bd(x));
    }
  }
  double violation = 0.0;
  for (std::size_t x : h.interior) violation = std::fmax(violation, std::fmax(h.values(x) - hi, lo - h.values(x)));
  out.artifacts.push_back({"harmonic.csv", csv.str()});
  add_check(out, "harmonic_residual", h.max_residual <= 1e-10, Json{{"max_residual", h.max_residual}});
  add_check(out, "maximum_principle", violation <= 1e-12, Json{{"violation", violation}, {"lower", lo}, {"upper", hi}});
  const MartingaleReport m = martingale_check(A, h, p.times, ctx.mc(p.paths, 0.0));
  Json points = Json::array();
  for (const auto& pt : m.points)
    points.push_back(Json{{"t", pt.t}, {"mean", pt.mean}, {"stderr", pt.stderr_of_mean}, {"consistent", pt.consistent}});
  add_check(out, "martingale", m.passed, Json{{"start_value", m.start_value}, {"points", points}});
  out.summary = Json{{"value_at_center", h.values(p.x0)}, {"interior_sites", h.interior.size()}};
}

// holder ----------------------------------------------------------------------

struct HolderParams {
  std::string target;
  std::size_t x0 = 0;
  Point center;
  double radius = 0.25, harmonic_radius = 0.5, t = 0.1, lambda = 1.0;
  std::function<double(const Point&)> boundary, f;
  HolderOptions fit;
  std::optional<long> refine_n;
};

HolderParams holder_params(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "holder", issues);
  HolderParams p;
  p.target = r.str("target");
  if (p.target != "harmonic" && p.target != "heat" && p.target != "resolvent")
    r.fail("target", "expected harmonic, heat or resolvent");
  p.center = r.point("x0", ctx.dim);
  p.x0 = site_for(ctx, r, "x0");
  p.radius = r.num("radius");
  r.positive("radius", p.radius);
  p.harmonic_radius = r.num("harmonic_radius");
  r.positive("harmonic_radius", p.harmonic_radius);
  p.t = r.num("t");
  r.positive("t", p.t);
  p.lambda = r.num("lambda");
  r.positive("lambda", p.lambda);
  p.boundary = function_param(r, "boundary");
  p.f = function_param(r, "f");
  try {
    p.fit.policy = parse_pair_policy(r.str("policy"));
  } catch (const ConfigError& e) {
    r.fail("policy", e.what());
  }
  p.fit.min_distance = r.num("min_distance");
  p.fit.max_distance = r.num("max_distance");
  if (p.fit.min_distance < 0.0 || p.fit.max_distance < 0.0) r.fail("min_distance", "distances must be nonnegative");
  p.refine_n = r.opt_integer("refine_n");
  if (p.refine_n && (*p.refine_n < 2 || *p.refine_n > 4096)) r.fail("refine_n", "must lie in [2, 4096]");
  if (p.target == "harmonic") require_ball(ctx, r, "harmonic_radius", p.x0, p.harmonic_radius, 0.0);
  if (p.target == "heat") {
    require_spectral(ctx, "holder", issues);
    if (p.refine_n && ctx.lattice &&
        ctx.lattice->size() * std::pow(static_cast<double>(*p.refine_n) / ctx.n, ctx.dim) > kDenseSpectralLimit)
      r.fail("refine_n", "the refined lattice exceeds the dense spectral limit");
  }
  return p;
}

HolderFit holder_on(const HolderParams& p, const GeneratorMatrix& A) {
  const Lattice& lat = A.lattice();
  const std::size_t x0 = lat.nearest(p.center);
  Eigen::VectorXd u;
  if (p.target == "harmonic") {
    u = solve_harmonic(A, Ball{x0, p.harmonic_radius}, on_sites(lat, p.boundary)).values;
  } else if (p.target == "heat") {
    u = heat_kernel(spectral_decompose(A), p.t).values.col(static_cast<Eigen::Index>(x0));
  } else {
    u = resolvent(A, p.lambda, on_sites(lat, p.f));
  }
  return holder_fit(lat, u, lat.site(x0), p.radius, p.fit);
}

Json holder_json(const HolderFit& fit) {
  return Json{{"exponent", fit.exponent},     {"constant", fit.constant}, {"residual", fit.residual},
              {"points", fit.points},         {"pairs", fit.pairs},       {"pair_set", fit.pair_set}};
}

void run_holder(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const HolderParams p = holder_params(j, ctx, ignore);
  const HolderFit fit = holder_on(p, ctx.generator());
  Json record = holder_json(fit);
  record["target"] = p.target;
  record["n"] = ctx.n;
  add_check(out, "holder_exponent_positive", fit.exponent > 0.0, Json{{"exponent", fit.exponent}});
  if (p.refine_n) {
    const Lattice fine = build_lattice(ctx.dim, static_cast<int>(*p.refine_n), ctx.lo, ctx.hi);
    const GeneratorMatrix Af = assemble_generator(build_conductances(*ctx.kernel, fine, ctx.conductance_options()),
                                                  ctx.mode, *ctx.kernel);
    const HolderFit refined = holder_on(p, Af);
    const double shift = std::fabs(refined.exponent - fit.exponent);
    record["refined"] = holder_json(refined);
    record["refined"]["n"] = *p.refine_n;
    add_check(out, "holder_exponent_positive_refined", refined.exponent > 0.0, Json{{"exponent", refined.exponent}});
    add_check(out, "holder_exponent_refinement_shift", shift < 0.1, Json{{"shift", shift}});
  }
  out.artifacts.push_back({"holder.json", record.dump(2) + "\n"});
  out.summary = record;
}

// uic-check -------------------------------------------------------------------

KernelSequenceSpec sequence_of(const Context& ctx) {
  return KernelSequenceSpec::oscillatory(*ctx.kernel, ctx.sequence.amplitude, ctx.sequence.omegas);
}

struct UicParams {
  std::vector<double> etas;
  std::vector<Point> xs;
};

UicParams uic_params(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "uic-check", issues);
  UicParams p;
  p.etas = r.list("etas");
  if (p.etas.size() < 2) r.fail("etas", "need at least two values");
  for (std::size_t i = 0; i < p.etas.size(); ++i)
    if (!(p.etas[i] > 0.0 && p.etas[i] < 1.0) || (i > 0 && !(p.etas[i] < p.etas[i - 1]))) {
      r.fail("etas", "must decrease inside (0, 1)");
      break;
    }
  p.xs = r.points("x_samples", ctx.dim);
  return p;
}

void run_uic(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const UicParams p = uic_params(j, ctx, ignore);
  const UicReport rep = verify_uic(sequence_of(ctx), p.etas, p.xs);
  Csv csv{"eta", "far_tail", "near_moment"};
  for (const UicRow& row : rep.rows) csv.row(row.eta, row.far_tail, row.near_moment);
  out.artifacts.push_back({"uic.csv", csv.str()});
  add_check(out, "uic_far_tail", rep.far_decreasing && rep.far_final_ratio < 0.1,
            Json{{"final_ratio", rep.far_final_ratio}, {"decreasing", rep.far_decreasing}});
  add_check(out, "uic_near_moment", rep.near_decreasing && rep.near_final_ratio < 0.1,
            Json{{"final_ratio", rep.near_final_ratio}, {"decreasing", rep.near_decreasing}});
  out.summary = Json{{"note", rep.note}};
}

// weak-probe ------------------------------------------------------------------

struct WeakParams {
  double eta = 0.05;
  WeakProbeOptions opts;
};

WeakParams weak_params(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "weak-probe", issues);
  WeakParams p;
  p.eta = r.num("eta");
  if (!(p.eta > 0.0 && p.eta < 1.0)) r.fail("eta", "must lie in (0, 1)");
  p.opts.panels = static_cast<int>(r.integer("panels"));
  p.opts.order = static_cast<int>(r.integer("order"));
  if (p.opts.panels < 1) r.fail("panels", "must be positive");
  if (p.opts.order < 1 || p.opts.order > 64) r.fail("order", "must lie in [1, 64]");
  if (ctx.dim != 1) issues.add("weak-probe: only d = 1 is supported");
  return p;
}

void run_weak(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const WeakParams p = weak_params(j, ctx, ignore);
  const WeakProbeReport rep = weak_convergence_probe(sequence_of(ctx), p.eta, default_test_functions(), p.opts);
  Csv csv{"function", "omega", "member_value", "limit_value", "gap"};
  for (const WeakProbeRow& row : rep.rows) {
    for (std::size_t i = 0; i < rep.indices.size(); ++i)
      csv.row(row.function, rep.indices[i], row.member_values[i], row.limit_value, row.gaps[i]);
    add_check(out, "weak_probe/" + row.function, row.passed,
              Json{{"decreasing", row.decreasing},
                   {"final_over_first", row.gaps.front() > 0.0 ? row.gaps.back() / row.gaps.front() : 0.0}});
  }
  out.artifacts.push_back({"weak_probe.csv", csv.str()});
  out.summary = Json{{"note", rep.note}};
}

// converge --------------------------------------------------------------------

struct ConvergeParams {
  double t = 0.5, lambda = 1.0;
  std::function<double(const Point&)> f;
  Point compact_lo, compact_hi;
  std::optional<long> refine_n;
};

ConvergeParams converge_params(const Json& j, const Context& ctx, Issues& issues) {
  const Reader r(j, "converge", issues);
  ConvergeParams p;
  p.t = r.num("t");
  if (!(p.t >= 0.0)) r.fail("t", "must be nonnegative");
  p.lambda = r.num("lambda");
  r.positive("lambda", p.lambda);
  p.f = function_param(r, "f");
  p.compact_lo = r.point("compact_lo", ctx.dim);
  p.compact_hi = r.point("compact_hi", ctx.dim);
  p.refine_n = r.opt_integer("refine_n");
  if (p.refine_n && (*p.refine_n < 2 || *p.refine_n > 4096)) r.fail("refine_n", "must lie in [2, 4096]");
  if (ctx.kernel && issues.list.empty()) {
    try {
      const KernelSequenceSpec seq = sequence_of(ctx);
      check_resolution(seq, ctx.n);
      if (p.refine_n) check_resolution(seq, static_cast<int>(*p.refine_n));
    } catch (const ConfigError& e) {
      issues.add(std::string("converge: ") + e.what());
    }
  }
  if (ctx.policy == AdjacentPolicy::Literal && ctx.order_max >= 1.0) require_generator(ctx, "converge", issues);
  return p;
}

struct ConvergeTables {
  ErrorTable semigroup, resolvent;
};

ConvergeTables converge_at(const ConvergeParams& p, const Context& ctx, int n) {
  const KernelSequenceSpec seq = sequence_of(ctx);
  const Lattice lat = build_lattice(ctx.dim, n, ctx.lo, ctx.hi);
  const ConductanceOptions co = ctx.conductance_options();
  const GeneratorMatrix limit = build_generator(seq.limit, lat, co);
  std::vector<std::unique_ptr<GeneratorMatrix>> owned;
  std::vector<const GeneratorMatrix*> members;
  for (double w : seq.index_set) {
    owned.push_back(std::make_unique<GeneratorMatrix>(build_generator(seq.member(w), lat, co)));
    members.push_back(owned.back().get());
  }
  const Eigen::VectorXd f = on_sites(lat, p.f);
  return {semigroup_convergence(limit, members, seq.index_set, p.t, f, p.compact_lo, p.compact_hi, ctx.threads),
          resolvent_convergence(limit, members, seq.index_set, p.lambda, f, p.compact_lo, p.compact_hi, ctx.threads)};
}

std::string error_csv(const ErrorTable& table) {
  Csv csv{"n_or_omega", "sup_error", "resolution", "t_or_lambda"};
  for (const ErrorRow& row : table.rows) csv.row(row.index, row.sup_error, row.resolution, row.parameter);
  return csv.str();
}

double refinement_change(const ErrorTable& coarse, const ErrorTable& fine) {
  double worst = 0.0;
  for (std::size_t i = 0; i < coarse.rows.size(); ++i) {
    const double a = coarse.rows[i].sup_error, b = fine.rows[i].sup_error;
    if (a == 0.0 && b == 0.0) continue;
    worst = std::fmax(worst, std::fabs(a - b) / std::fmax(a, b));
  }
  return worst;
}

void run_converge(const Json& j, Context& ctx, ExperimentResult& out) {
  Issues ignore;
  const ConvergeParams p = converge_params(j, ctx, ignore);
  const ConvergeTables tables = converge_at(p, ctx, ctx.n);
  out.artifacts.push_back({"semigroup_errors.csv", error_csv(tables.semigroup)});
  out.artifacts.push_back({"resolvent_errors.csv", error_csv(tables.resolvent)});
  auto table_check = [&](const char* name, const ErrorTable& t) {
    add_check(out, name, t.passed, Json{{"decreasing", t.decreasing}, {"final_ratio", t.final_ratio}});
  };
  table_check("semigroup_convergence", tables.semigroup);
  table_check("resolvent_convergence", tables.resolvent);
  if (p.refine_n) {
    const ConvergeTables fine = converge_at(p, ctx, static_cast<int>(*p.refine_n));
    out.artifacts.push_back({"semigroup_errors_refined.csv", error_csv(fine.semigroup)});
    out.artifacts.push_back({"resolvent_errors_refined.csv", error_csv(fine.resolvent)});
    const double sg = refinement_change(tables.semigroup, fine.semigroup);
    const double rs = refinement_change(tables.resolvent, fine.resolvent);
    add_check(out, "refinement_stability", sg < 0.25 && rs < 0.25,
              Json{{"semigroup_max_change", sg}, {"resolvent_max_change", rs}, {"refine_n", *p.refine_n}});
  }
}

// registry --------------------------------------------------------------------

template <class Parse>
auto validator(Parse parse, bool needs_generator) {
  return [parse, needs_generator](const Json& j, Context& ctx, Issues& issues) {
    (void)parse(j, ctx, issues);
    if (needs_generator) require_generator(ctx, j.at("type").get<std::string>(), issues);
  };
}

const std::vector<Experiment>& registry() {
  static const std::vector<Experiment> table = [] {
    std::vector<Experiment> t;
    auto none = [](const Json&, const Context&, Issues&) { return 0; };
    t.push_back({"kernel-verify", "sampled certificates for the declared kernel bounds",
                 Json{{"center", {0.0}},
                      {"sample_radius", 1.0},
                      {"halton_points", 48},
                      {"random_points", 48},
                      {"separations", 24},
                      {"min_separation", 1e-4},
                      {"tail_points", 6},
                      {"z0", {0.0}},
                      {"r", 0.1},
                      {"check_defect", false}},
                 validator(sampling_plan, false), run_kernel_verify});
    t.push_back({"functionals", "L1, L2 and L on a radius grid, order comparability for variable-order kernels",
                 Json{{"z0", {0.0}},
                      {"radii", dyadic(1, 8)},
                      {"points_per_axis", 33},
                      {"inner_dyadic_depth", 0},
                      {"threshold", 10.0}},
                 validator(functionals_params, false), run_functionals});
    t.push_back({"chain-build", "conductance and generator matrices as coordinate triples",
                 Json{{"write_conductances", true}, {"write_generator", true}}, validator(none, true),
                 run_chain_build});
    t.push_back({"exit-mc", "Monte Carlo exit probabilities against t L(x0, r)",
                 Json{{"x0", {0.0}},
                      {"radii", {0.1, 0.2, 0.4}},
                      {"times", {0.01, 0.02, 0.05}},
                      {"paths", 10000},
                      {"margin", 1.0},
                      {"points_per_axis", 33}},
                 validator(exit_params, true), run_exit_mc});
    t.push_back({"mean-exit-mc", "mean exit times and their log-log slope in r",
                 Json{{"x0", {0.0}},
                      {"radii", {0.05, 0.1, 0.2, 0.4}},
                      {"paths", 10000},
                      {"margin", 1.0},
                      {"expected_slope", nullptr},
                      {"slope_tolerance", 0.15}},
                 validator(mean_exit_params, true), run_mean_exit});
    t.push_back({"levy-check", "jump sums against their compensators",
                 Json{{"x0", {0.0}},
                      {"T", 0.5},
                      {"paths", 10000},
                      {"functions", {"zero", "capped_distance", "weighted_square"}}},
                 validator(levy_params, true), run_levy});
    t.push_back({"heat-kernel", "spectral heat kernel slices, symmetry and Chapman-Kolmogorov",
                 Json{{"times", {0.05, 0.1}}, {"y", {0.0}}}, validator(heat_params, true), run_heat});
    t.push_back({"resolvent-check", "exact finite-dimensional resolvent and semigroup identities",
                 Json{{"lambda", 1.0}, {"t", 0.3}, {"f", "bump"}, {"g", "cos"}}, validator(resolvent_params, true),
                 run_resolvent});
    t.push_back({"harmonic", "nonlocal Dirichlet problem, maximum principle and martingale check",
                 Json{{"x0", {0.0}},
                      {"radius", 0.5},
                      {"boundary", "sign"},
                      {"martingale_times", {0.05, 0.2}},
                      {"paths", 10000}},
                 validator(harmonic_params, true), run_harmonic});
    t.push_back({"holder", "Hoelder fit of a harmonic function, heat kernel slice or resolvent",
                 Json{{"target", "harmonic"},
                      {"x0", {0.0}},
                      {"radius", 0.25},
                      {"harmonic_radius", 0.5},
                      {"boundary", "sign"},
                      {"t", 0.1},
                      {"lambda", 1.0},
                      {"f", "sign"},
                      {"policy", "distance-envelope"},
                      {"min_distance", 0.0},
                      {"max_distance", 0.0},
                      {"refine_n", nullptr}},
                 validator(holder_params, true), run_holder});
    t.push_back({"uic-check", "far-tail and near-moment columns of the kernel sequence",
                 Json{{"etas", dyadic(1, 8)}, {"x_samples", {{0.0}, {0.5}}}}, validator(uic_params, false), run_uic});
    t.push_back({"weak-probe", "annulus-restricted integrals of the sequence against tensor bumps",
                 Json{{"eta", 0.05}, {"panels", 48}, {"order", 16}}, validator(weak_params, false), run_weak});
    t.push_back({"converge", "semigroup and resolvent error tables of the sequence against its limit",
                 Json{{"t", 0.5},
                      {"lambda", 1.0},
                      {"f", "bump"},
                      {"compact_lo", {-1.0}},
                      {"compact_hi", {1.0}},
                      {"refine_n", nullptr}},
                 validator(converge_params, false), run_converge});
    return t;
  }();
  return table;
}

const Experiment& find_experiment(const std::string& type) {
  for (const Experiment& e : registry())
    if (e.name == type) return e;
  throw ConfigError("unknown experiment type '" + type + "'");
}

/// Point-valued defaults follow the kernel dimension.
Json resolve_dimension(Json params, int dim) {
  for (auto& [key, value] : params.items()) {
    if (value.is_array() && value.size() == 1 && value[0].is_number() && dim > 1) {
      Json p = Json::array();
      for (int i = 0; i < dim; ++i) p.push_back(value[0]);
      value = p;
    }
  }
  return params;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

Context make_context(const Scenario& scenario, int threads) {
  Issues issues;
  Context ctx;
  ctx.threads = threads;
  parse_context(scenario.config, ctx, issues);
  if (!issues.list.empty()) throw ConfigError(join(issues.list, "; "));
  return ctx;
}

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

const std::vector<std::string>& experiment_types() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const Experiment& e : registry()) out.push_back(e.name);
    return out;
  }();
  return names;
}

Json default_config() {
  return Json{{"seed", 1},
              {"kernel", kernel_defaults()},
              {"sequence", {{"amplitude", 0.5}, {"omegas", {2.0, 4.0, 8.0, 16.0, 32.0}}}},
              {"lattice", {{"n", 128}, {"lo", {-1.0}}, {"hi", {1.0}}}},
              {"chain", {{"policy", "literal"}, {"mode", "killed"}, {"quad_order", 4}}},
              {"experiments", Json::array()}};
}

Json experiment_defaults(const std::string& type) { return find_experiment(type).defaults; }

std::string config_reference() {
  std::ostringstream os;
  os << "# jumplab configuration reference\n\n"
     << "A scenario is one JSON file. Unlisted keys take the defaults below; unknown keys are errors.\n"
     << "Point-valued defaults such as `[0.0]` are repeated across coordinates when `kernel.dim` is 2.\n\n"
     << "## Top level\n\n```json\n"
     << default_config().dump(2) << "\n```\n\n"
     << "- `kernel.family`: `stable` (kappa |x-y|^(-d-alpha)), `variable-order` (intensity |x-y|^(-d-(s(x)+s(y))/2) "
        "with s = base + amplitude sin(frequency x1)), or `tabulated` (d = 1, `table` names a CSV of x,y,value "
        "triples with a header line).\n"
     << "- `kernel.bounds`: overrides for the declared constants; `null` keeps the family default.\n"
     << "- `kernel.modulation`: a nonzero amplitude multiplies the kernel by 1 + amplitude sin(omega (x1 + y1)).\n"
     << "- `sequence`: the oscillatory family J_n = J (1 + amplitude sin(omega_n (x1 + y1))) used by `uic-check`, "
        "`weak-probe` and `converge`.\n"
     << "- `chain.policy`: `literal` or `moment-matched`; `chain.mode`: `killed` or `conservative`.\n"
     << "- `experiments`: a list of objects, each with a `type` and any parameters to override.\n\n"
     << "Lattice functions (`f`, `g`, `boundary`): bump, cos, one, sign, linear.\n"
     << "Levy-system pair functions: zero, capped_distance, far_indicator, weighted_square.\n\n"
     << "## Experiments\n";
  for (const Experiment& e : registry())
    os << "\n### " << e.name << "\n\n" << e.summary << ".\n\n```json\n" << e.defaults.dump(2) << "\n```\n";
  return os.str();
}

Json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

Scenario load_scenario(const Json& user, const std::optional<std::string>& only_type,
                       std::optional<std::uint64_t> seed_override) {
  Issues issues;
  Json config = default_config();
  Json user_top = user.is_null() ? Json::object() : user;
  Json listed = Json::array();
  if (user_top.is_object() && user_top.contains("experiments")) {
    listed = user_top["experiments"];
    user_top.erase("experiments");
    if (!listed.is_array()) {
      issues.add("experiments: expected a list");
      listed = Json::array();
    }
  }
  merge(config, user_top, "", issues);
  if (seed_override) config["seed"] = *seed_override;

  Context ctx;
  parse_context(config, ctx, issues);

  Scenario scenario;
  std::vector<Json> selected;
  for (std::size_t i = 0; i < listed.size(); ++i) {
    const Json& e = listed[i];
    const std::string where = "experiments[" + std::to_string(i) + "]";
    if (!e.is_object() || !e.contains("type") || !e["type"].is_string()) {
      issues.add(where + ": needs a string \"type\"");
      continue;
    }
    const std::string type = e["type"].get<std::string>();
    if (only_type && type != *only_type) continue;
    Json params;
    try {
      params = resolve_dimension(experiment_defaults(type), ctx.dim);
    } catch (const ConfigError& err) {
      issues.add(where + ": " + err.what());
      continue;
    }
    Json overrides = e;
    overrides.erase("type");
    merge(params, overrides, type, issues);
    Json full{{"type", type}};
    full.update(params);
    selected.push_back(std::move(full));
  }
  if (only_type && selected.empty()) {
    Json full{{"type", *only_type}};
    try {
      full.update(resolve_dimension(experiment_defaults(*only_type), ctx.dim));
      selected.push_back(std::move(full));
    } catch (const ConfigError& err) {
      issues.add(err.what());
    }
  }
  if (selected.empty() && issues.list.empty()) issues.add("experiments: nothing to run");

  if (ctx.kernel && ctx.lattice)
    for (const Json& e : selected) find_experiment(e["type"].get<std::string>()).validate(e, ctx, issues);
  if (!issues.list.empty()) throw ConfigError(join(issues.list, "; "));

  config["experiments"] = Json::array();
  for (const Json& e : selected) config["experiments"].push_back(e);
  scenario.config = std::move(config);
  scenario.experiments = std::move(selected);
  scenario.seed = ctx.seed;
  return scenario;
}

bool ScenarioResult::all_passed() const {
  for (const ExperimentResult& e : experiments) {
    if (e.status != "ok") return false;
    for (const Check& c : e.checks)
      if (!c.passed) return false;
  }
  return true;
}

Json ScenarioResult::summary(const Scenario& scenario) const {
  Json exps = Json::array();
  std::string status = "ok";
  for (const ExperimentResult& e : experiments) {
    Json checks = Json::array();
    for (const Check& c : e.checks) checks.push_back(Json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    Json item{{"type", e.type}, {"status", e.status}};
    if (!e.error.empty()) item["error"] = e.error;
    item["checks"] = checks;
    item["results"] = e.summary;
    exps.push_back(item);
    if (e.status != "ok") status = e.status;
  }
  return Json{{"version", kVersion},
              {"seed", scenario.seed},
              {"status", status},
              {"passed", all_passed()},
              {"experiments", exps},
              {"config", scenario.config}};
}

ScenarioResult run_scenario(const Scenario& scenario, int threads) {
  Context ctx = make_context(scenario, threads);
  ScenarioResult result;
  for (const Json& e : scenario.experiments) {
    ExperimentResult r;
    r.type = e.at("type").get<std::string>();
    try {
      find_experiment(r.type).run(e, ctx, r);
    } catch (const ConfigError& err) {
      r.status = "config-error";
      r.error = err.what();
    } catch (const std::exception& err) {
      r.status = "error";
      r.error = err.what();
    }
    result.experiments.push_back(std::move(r));
  }
  return result;
}

void write_outputs(const ScenarioResult& result, const Scenario& scenario, const std::filesystem::path& out,
                   int threads, double wall_seconds) {
  std::filesystem::create_directories(out);
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out / name).string());
    f << content;
  };
  std::map<std::string, int> seen;
  for (const ExperimentResult& e : result.experiments) {
    const int k = ++seen[e.type];
    const std::string label = k == 1 ? e.type : e.type + "-" + std::to_string(k);
    for (const Artifact& a : e.artifacts) write(label + "_" + a.name, a.content);
  }
  write("summary.json", result.summary(scenario).dump(2) + "\n");
  const Json meta{{"version", kVersion},
                  {"threads", threads},
                  {"wall_seconds", wall_seconds},
                  {"timestamp", timestamp_utc()}};
  write("metadata.json", meta.dump(2) + "\n");
}

int exit_code(const ScenarioResult& result) {
  for (const ExperimentResult& e : result.experiments)
    if (e.status == "config-error") return 2;
  return result.all_passed() ? 0 : 1;
}

}  // namespace jumplab::cli

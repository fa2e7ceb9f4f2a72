#include "chmy/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

namespace chmy {

// ---------------------------------------------------------------------------
// Configuration

std::vector<double> SweepConfig::geometric_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw ConfigError("invalid geometric grid");
  std::vector<double> s;
  if (n == 1) return {lo};
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) s.push_back(std::pow(10.0, a + (b - a) * i / (n - 1)));
  s.front() = lo;
  s.back() = hi;
  return s;
}

void SweepConfig::validate() const {
  if (dimension != 2) throw ConfigError("only dimension = 2 is implemented");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(radius > 0.0 && radius < 0.5)) throw ConfigError("radius must lie in (0, 0.5)");
  if (n0 < 1) throw ConfigError("n0 must be >= 1");
  if (cycles < 1) throw ConfigError("cycles must be >= 1");
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("theta must lie in (0, 1)");
  if (s_values.empty()) throw ConfigError("s_values is empty");
  for (std::size_t i = 0; i < s_values.size(); ++i) {
    if (!(s_values[i] > 0.0) || !std::isfinite(s_values[i])) throw ConfigError("s values must be positive");
    if (i > 0 && !(s_values[i] > s_values[i - 1])) throw ConfigError("s values must be strictly increasing");
  }
  if (k_values.empty() || schemes.empty()) throw ConfigError("k and scheme lists must be non-empty");
  for (int k : k_values) {
    if (k < PenaltyPower::kMin || k > PenaltyPower::kMax) throw ConfigError("k must be in {2, 3, 4}");
    for (PenaltyScheme sc : schemes) {
      if (sc == PenaltyScheme::Exact && k != 2) {
        throw ConfigError("scheme 'exact' is only available for k = 2");
      }
    }
  }
  if (!(newton.abs_tol > 0.0) || !(newton.rel_tol >= 0.0) || newton.max_iterations < 1 ||
      !(newton.damping > 0.0 && newton.damping <= 1.0) || !(newton.divergence_factor > 1.0)) {
    throw ConfigError("invalid Newton settings");
  }
}

SweepConfig preset(const std::string& name) {
  SweepConfig cfg;
  if (name == "desk" || name.empty()) return cfg;
  if (name == "paper2d") {
    cfg.eps = 0.01;
    cfg.tau = 0.01;
    cfg.n0 = 32;
    cfg.max_vertices = 60000;
    cfg.schemes = {PenaltyScheme::Exact, PenaltyScheme::Lumped, PenaltyScheme::Interpolated};
    return cfg;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  for (char ch : s) {
    if (ch == ',' || ch == ' ' || ch == '\t' || ch == ';') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else {
      item.push_back(ch);
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("bad number for '" + key + "': '" + v + "'");
  }
  return x;
}

long to_int(const std::string& key, const std::string& v) {
  long x = 0;
  const auto t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("bad integer for '" + key + "': '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto t = trim(v);
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw ConfigError("bad boolean for '" + key + "': '" + v + "'");
}

}  // namespace

void apply_setting(SweepConfig& cfg, const std::string& raw_key, const std::string& value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "dimension") {
    cfg.dimension = static_cast<int>(to_int(key, value));
  } else if (key == "eps") {
    cfg.eps = to_double(key, value);
  } else if (key == "tau") {
    cfg.tau = to_double(key, value);
  } else if (key == "radius") {
    cfg.radius = to_double(key, value);
  } else if (key == "center") {
    const auto parts = split_list(value);
    if (parts.size() != 2) throw ConfigError("center needs two coordinates");
    cfg.center = {to_double(key, parts[0]), to_double(key, parts[1])};
  } else if (key == "n0") {
    cfg.n0 = static_cast<int>(to_int(key, value));
  } else if (key == "cycles") {
    cfg.cycles = static_cast<int>(to_int(key, value));
  } else if (key == "theta") {
    cfg.theta = to_double(key, value);
  } else if (key == "max_vertices") {
    const long n = to_int(key, value);
    if (n < 1) throw ConfigError("max_vertices must be positive");
    cfg.max_vertices = static_cast<std::size_t>(n);
  } else if (key == "s_values") {
    cfg.s_values.clear();
    for (const auto& p : split_list(value)) cfg.s_values.push_back(to_double(key, p));
  } else if (key == "s_grid") {
    // "lo hi n"
    const auto parts = split_list(value);
    if (parts.size() != 3) throw ConfigError("s_grid needs 'lo hi count'");
    cfg.s_values = SweepConfig::geometric_grid(to_double(key, parts[0]), to_double(key, parts[1]),
                                               static_cast<int>(to_int(key, parts[2])));
  } else if (key == "k") {
    cfg.k_values.clear();
    for (const auto& p : split_list(value)) cfg.k_values.push_back(static_cast<int>(to_int(key, p)));
  } else if (key == "schemes" || key == "scheme") {
    cfg.schemes.clear();
    try {
      for (const auto& p : split_list(value)) cfg.schemes.push_back(parse_scheme(p));
    } catch (const PenaltyError& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "abs_tol") {
    cfg.newton.abs_tol = to_double(key, value);
  } else if (key == "rel_tol") {
    cfg.newton.rel_tol = to_double(key, value);
  } else if (key == "max_iterations") {
    cfg.newton.max_iterations = static_cast<int>(to_int(key, value));
  } else if (key == "damping") {
    cfg.newton.damping = to_double(key, value);
  } else if (key == "divergence_factor") {
    cfg.newton.divergence_factor = to_double(key, value);
  } else if (key == "out" || key == "output") {
    cfg.output = trim(value);
  } else if (key == "parallel_groups") {
    cfg.parallel_groups = to_bool(key, value);
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_config_file(SweepConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  for (const auto& [key, value] : parse_key_values(in)) apply_setting(cfg, key, value);
}

// ---------------------------------------------------------------------------
// Sweep

namespace {

std::string group_label(int k, PenaltyScheme scheme) {
  return "k=" + std::to_string(k) + " scheme=" + std::string(scheme_name(scheme));
}

std::vector<SweepRecord> run_group(const SweepConfig& cfg, int k, PenaltyScheme scheme,
                                   const SweepLog& log) {
  const SphereInitialCondition ic{cfg.eps, cfg.center, cfg.radius};
  AdaptOptions options;
  options.cycles = cfg.cycles;
  options.mark.theta = cfg.theta;
  options.max_vertices = cfg.max_vertices;
  const auto samples = default_ball_samples();

  MeshPtr mesh = std::make_shared<const Mesh>(unit_square_mesh(cfg.n0));
  std::optional<WarmStart> warm;
  std::vector<SweepRecord> out;
  for (double s : cfg.s_values) {
    AdaptiveProblem problem;
    problem.eps = cfg.eps;
    problem.tau = cfg.tau;
    problem.s = s;
    problem.k = PenaltyPower(k);
    problem.scheme = scheme;
    problem.phi_prev = ic;

    const auto t0 = std::chrono::steady_clock::now();
    const AdaptiveResult res = adaptive_cycle(problem, mesh, options, cfg.newton, warm);
    const auto t1 = std::chrono::steady_clock::now();

    SweepRecord rec;
    rec.s = s;
    rec.k = k;
    rec.scheme = scheme;
    rec.dofs = 2 * res.mesh()->num_vertices();
    rec.cells = res.mesh()->num_cells();
    rec.newton_iterations = 0;
    for (const auto& d : res.solves) rec.newton_iterations += d.newton_iterations;
    rec.status = res.solution.status;
    rec.wall_time = std::chrono::duration<double>(t1 - t0).count();
    rec.diagnostic = res.failure;

    std::ostringstream line;
    line << group_label(k, scheme) << " s=" << s << ": ";
    if (res.converged()) {
      const ViolationReport v = violation_report(res.problem, *res.ops, res.solution, samples);
      rec.linf = v.linf;
      rec.l1 = v.l1;
      rec.structural_K = v.structural_K;
      rec.mass_error = v.mass_error;
      rec.h1_phi = h1_norm(*res.ops, res.solution.phi.values);
      rec.h1_mu = h1_norm(*res.ops, res.solution.mu.values);
      mesh = res.mesh();
      warm = WarmStart{res.solution.phi, res.solution.mu};
      line << "converged, linf=" << v.linf << " l1=" << v.l1 << " vertices=" << mesh->num_vertices()
           << " newton=" << rec.newton_iterations;
    } else {
      // Failures are data: record and restart cold on the last good mesh.
      warm.reset();
      line << "FAILED (" << res.failure << ")";
      if (scheme == PenaltyScheme::Interpolated) line << " [expected regime for interpolation]";
    }
    if (log) log(line.str());
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::vector<SweepRecord> run_sweep(const SweepConfig& cfg, const SweepLog& log) {
  cfg.validate();
  std::vector<std::pair<int, PenaltyScheme>> groups;
  for (int k : cfg.k_values) {
    for (PenaltyScheme sc : cfg.schemes) groups.emplace_back(k, sc);
  }
  std::vector<SweepRecord> records;
  if (cfg.parallel_groups && groups.size() > 1) {
    std::mutex log_mutex;
    SweepLog locked;
    if (log) {
      locked = [&](const std::string& line) {
        const std::lock_guard<std::mutex> lock(log_mutex);
        log(line);
      };
    }
    std::vector<std::future<std::vector<SweepRecord>>> jobs;
    for (const auto& [k, sc] : groups) {
      jobs.push_back(std::async(std::launch::async, run_group, std::cref(cfg), k, sc, std::cref(locked)));
    }
    for (auto& j : jobs) {
      auto part = j.get();
      records.insert(records.end(), part.begin(), part.end());
    }
  } else {
    for (const auto& [k, sc] : groups) {
      auto part = run_group(cfg, k, sc, log);
      records.insert(records.end(), part.begin(), part.end());
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Rates

SlopeFit fit_loglog_slope(const std::vector<SweepRecord>& records, Metric metric) {
  std::vector<double> xs, ys;
  SlopeFit fit;
  for (const SweepRecord& r : records) {
    if (!r.converged()) continue;
    const std::optional<double>& m = metric == Metric::Linf ? r.linf : r.l1;
    if (!m) continue;
    if (*m <= 0.0) {
      ++fit.excluded_zero;
      continue;
    }
    xs.push_back(std::log10(r.s));
    ys.push_back(std::log10(*m));
  }
  if (xs.size() < 4) {
    throw std::invalid_argument("slope fit needs at least 4 converged records with positive metric");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("slope fit needs distinct s values");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  fit.points = xs.size();
  fit.s_min = std::pow(10.0, *std::min_element(xs.begin(), xs.end()));
  fit.s_max = std::pow(10.0, *std::max_element(xs.begin(), xs.end()));
  return fit;
}

std::vector<SweepRecord> select(const std::vector<SweepRecord>& records, int k, PenaltyScheme scheme) {
  std::vector<SweepRecord> out;
  for (const auto& r : records) {
    if (r.k == k && r.scheme == scheme) out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.s < b.s; });
  return out;
}

bool unexpected_failure(const SweepRecord& r) {
  return !r.converged() && r.scheme != PenaltyScheme::Interpolated;
}

// ---------------------------------------------------------------------------
// Output

const char* const kCsvHeader =
    "s,k,scheme,dofs,cells,newton_iterations,status,linf,l1,structural_K,h1_phi,h1_mu,mass_error,wall_time";

namespace {

std::string sci(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific, 16);
  return std::string(buf, ptr);
}

std::string opt_sci(const std::optional<double>& x) { return x ? sci(*x) : std::string(); }

NewtonStatus parse_status(const std::string& s) {
  if (s == "converged") return NewtonStatus::Converged;
  if (s == "diverged") return NewtonStatus::Diverged;
  if (s == "max_iterations") return NewtonStatus::MaxIterations;
  throw std::invalid_argument("unknown status '" + s + "'");
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("bad CSV number '" + s + "'");
  return x;
}

void open_or_throw(std::ofstream& f, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  f.open(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

void write_csv(std::ostream& os, const std::vector<SweepRecord>& records) {
  os << kCsvHeader << '\n';
  for (const SweepRecord& r : records) {
    os << sci(r.s) << ',' << r.k << ',' << scheme_name(r.scheme) << ',' << r.dofs << ',' << r.cells << ','
       << r.newton_iterations << ',' << status_name(r.status) << ',' << opt_sci(r.linf) << ','
       << opt_sci(r.l1) << ',' << opt_sci(r.structural_K) << ',' << opt_sci(r.h1_phi) << ','
       << opt_sci(r.h1_mu) << ',' << opt_sci(r.mass_error) << ',' << sci(r.wall_time) << '\n';
  }
}

void emit_csv(const std::vector<SweepRecord>& records, const std::filesystem::path& path) {
  if (records.empty()) throw std::invalid_argument("emit_csv: no records");
  std::ofstream f;
  open_or_throw(f, path);
  write_csv(f, records);
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

std::vector<SweepRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw std::invalid_argument("unexpected CSV header");
  std::vector<SweepRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 14) throw std::invalid_argument("CSV row with " + std::to_string(f.size()) + " fields");
    SweepRecord r;
    r.s = *parse_opt(f[0]);
    r.k = std::stoi(f[1]);
    r.scheme = parse_scheme(f[2]);
    r.dofs = std::stoul(f[3]);
    r.cells = std::stoul(f[4]);
    r.newton_iterations = std::stoi(f[5]);
    r.status = parse_status(f[6]);
    r.linf = parse_opt(f[7]);
    r.l1 = parse_opt(f[8]);
    r.structural_K = parse_opt(f[9]);
    r.h1_phi = parse_opt(f[10]);
    r.h1_mu = parse_opt(f[11]);
    r.mass_error = parse_opt(f[12]);
    r.wall_time = parse_opt(f[13]).value_or(0.0);
    out.push_back(std::move(r));
  }
  return out;
}

void write_plot_script(std::ostream& os, const std::vector<SweepRecord>& records,
                       const std::string& csv_name) {
  std::set<std::pair<int, PenaltyScheme>> groups;
  for (const auto& r : records) groups.emplace(r.k, r.scheme);

  os << "# gnuplot script: constraint violation versus penalty parameter\n"
     << "set datafile separator ','\n"
     << "set logscale xy\n"
     << "set format x '10^{%L}'\n"
     << "set format y '10^{%L}'\n"
     << "set xlabel 's'\n"
     << "set ylabel 'violation'\n"
     << "set key bottom left\n"
     << "set terminal pngcairo size 800,600\n";
  for (const auto& [k, scheme] : groups) {
    const auto group = select(records, k, scheme);
    const std::string name = std::string(scheme_name(scheme));
    // Anchor the reference line at the first converged point.
    double s0 = 0.0, v0 = 0.0;
    for (const auto& r : group) {
      if (r.converged() && r.linf && *r.linf > 0.0) {
        s0 = r.s;
        v0 = *r.linf;
        break;
      }
    }
    const double rate = -1.0 / (k - 1);
    os << "\nset output 'violation_k" << k << "_" << name << ".png'\n"
       << "set title 'k = " << k << ", " << name << "'\n"
       << "ref(x) = " << sci(v0 > 0.0 ? v0 : 1.0) << " * (x / " << sci(s0 > 0.0 ? s0 : 1.0) << ")**("
       << sci(rate) << ")\n"
       << "plot '" << csv_name << "' skip 1 using 1:(($2 == " << k << " && strcol(3) eq '" << name
       << "' && strcol(7) eq 'converged') ? $8 : 1/0) with linespoints title 'L^inf', \\\n"
       << "     '" << csv_name << "' skip 1 using 1:(($2 == " << k << " && strcol(3) eq '" << name
       << "' && strcol(7) eq 'converged') ? $9 : 1/0) with linespoints title 'L^1', \\\n"
       << "     ref(x) with lines dashtype 2 title 's^{" << (k == 2 ? "-1" : "-1/" + std::to_string(k - 1))
       << "}'\n";
  }
}

void emit_plot_script(const std::vector<SweepRecord>& records, const std::filesystem::path& path) {
  if (records.empty()) throw std::invalid_argument("emit_plot_script: no records");
  std::ofstream f;
  open_or_throw(f, path);
  write_plot_script(f, records);
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

void write_slopes(std::ostream& os, const std::vector<SweepRecord>& records) {
  std::set<std::pair<int, PenaltyScheme>> groups;
  for (const auto& r : records) groups.emplace(r.k, r.scheme);
  for (const auto& [k, scheme] : groups) {
    const auto group = select(records, k, scheme);
    for (Metric m : {Metric::Linf, Metric::L1}) {
      os << "k=" << k << " scheme=" << scheme_name(scheme) << " metric=" << (m == Metric::Linf ? "linf" : "l1");
      try {
        const SlopeFit fit = fit_loglog_slope(group, m);
        os << " slope=" << sci(fit.slope) << " r2=" << sci(fit.r_squared) << " points=" << fit.points;
      } catch (const std::invalid_argument&) {
        os << " slope=n/a r2=n/a points=0";
      }
      if (m == Metric::Linf) {
        os << " target=" << sci(-1.0 / (k - 1));
      } else {
        os << " target=" << (k == 2 ? sci(-1.0) : std::string("n/a"));
      }
      os << '\n';
    }
  }
}

}  // namespace chmy

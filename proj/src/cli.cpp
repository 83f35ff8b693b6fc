#include "qpj/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "qpj/error.hpp"
#include "qpj/greens.hpp"
#include "qpj/jensen.hpp"
#include "qpj/parallel.hpp"

namespace qpj::cli {

using json = nlohmann::ordered_json;

namespace {

// Width of the band around each Lhat_i / 2pi where eps-dependent Green's
// checks are skipped.
constexpr double kGuardBand = 2e-2;

struct Options {
  // model
  std::string preset = "amo";
  double lambda = 2.0;
  double lambda1 = 0.6, lambda2 = 0.3;
  std::string potential;
  double alpha = Frequency::kGolden;
  // energies and eps
  std::string energy = "auto";
  std::string energy_grid;
  std::string eps;
  // estimator
  int phases = 32;
  long orbit_length = 0;
  int stride = 1;
  long warmup = -1;
  std::string seed;
  std::string isa = "auto";
  int threads = 0;
  // output
  std::string csv, json_path;
  // tolerance overrides
  double tau_l = kTauL;
  double fit_tol = 0.0;
  double group_tol = 0.0;
  // spectrum approximation (also used by --energy auto)
  int spec_size = 1000, spec_phases = 8;
  double merge_tol = 0.02;
  // lyapunov
  std::string cocycle = "schrodinger";
  // dual-spectrum
  double analytic = 0.0;
  std::string degrees = "1,2,3,4,5";
  // greens-check
  double x = 0.3;
  int theta_samples = 16;
  long truncation = 1000;
  int average_phases = 256;
  // winding
  long box = 200;
  long theta_steps = 0;
  bool no_cross_check = false;
};

struct Resolved {
  TrigPotential v;
  std::string model;
  Frequency alpha;
  std::uint64_t seed = kDefaultSeed;
  std::optional<kern::Isa> isa;
  std::vector<std::string> warnings;
};

double parse_double(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &pos);
  } catch (const std::exception&) {
    fail(ErrorKind::ParseError, "cannot read " + what + " from '" + s + "'");
  }
  // trailing garbage
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  require(pos == s.size() && std::isfinite(x), ErrorKind::ParseError,
          "cannot read " + what + " from '" + s + "'");
  return x;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

std::string format_energy(cplx e) {
  if (e.imag() == 0.0) return format_number(e.real());
  const std::string im = format_number(e.imag());
  return format_number(e.real()) + (im.front() == '-' ? "" : "+") + im + "i";
}

Resolved resolve(const Options& o, std::ostream& err) {
  Resolved r;
  r.alpha = Frequency(o.alpha);
  if (!o.potential.empty()) {
    auto loaded = load_potential(o.potential);
    r.v = loaded.potential;
    r.warnings = loaded.warnings;
    for (const auto& w : r.warnings) err << json{{"warning", w}}.dump() << "\n";
    r.model = "file:" + o.potential;
  } else if (o.preset == "amo") {
    r.v = amo(o.lambda);
    r.model = "amo";
  } else if (o.preset == "sem") {
    r.v = sem(o.lambda1, o.lambda2);
    r.model = "sem";
  } else {
    fail(ErrorKind::InvalidArgument, "unknown preset '" + o.preset + "' (amo|sem)");
  }
  if (o.seed.empty()) {
    r.seed = default_seed();
  } else {
    try {
      std::size_t pos = 0;
      r.seed = std::stoull(o.seed, &pos, 0);
      require(pos == o.seed.size(), ErrorKind::ParseError, "bad seed");
    } catch (const std::logic_error&) {
      fail(ErrorKind::ParseError, "cannot read seed from '" + o.seed + "'");
    }
  }
  if (o.isa == "scalar") {
    r.isa = kern::Isa::Scalar;
  } else if (o.isa == "avx2") {
    require(kern::isa_available(kern::Isa::Avx2), ErrorKind::InvalidArgument,
            "avx2 kernel not available on this machine");
    r.isa = kern::Isa::Avx2;
  } else {
    require(o.isa == "auto", ErrorKind::InvalidArgument, "unknown isa '" + o.isa + "'");
  }
  require(o.phases >= 1, ErrorKind::InvalidArgument, "phases must be positive");
  require(o.orbit_length >= 0, ErrorKind::InvalidArgument, "orbit length must be >= 0");
  require(o.stride >= 1, ErrorKind::InvalidArgument, "stride must be positive");
  require(o.threads >= 0, ErrorKind::InvalidArgument, "threads must be >= 0");
  set_thread_count(o.threads);
  return r;
}

LeParams le_params(const Options& o, const Resolved& r) {
  LeParams p;
  p.phase_count = o.phases;
  p.n = o.orbit_length;
  p.qr_stride = o.stride;
  p.warmup = o.warmup;
  p.seed = r.seed;
  p.isa = r.isa;
  return p;
}

DualParams dual_params(const Options& o, const Resolved& r) {
  DualParams p;
  p.le = le_params(o, r);
  p.alpha = r.alpha;
  if (o.group_tol > 0) p.group_tol = o.group_tol;
  return p;
}

JensenParams jensen_params(const Options& o, const Resolved& r) {
  JensenParams p;
  p.le = le_params(o, r);
  p.dual = dual_params(o, r);
  p.tau_l = o.tau_l;
  if (o.fit_tol > 0) p.fit_tol = o.fit_tol;
  return p;
}

SpectrumParams spectrum_params(const Options& o, const Resolved& r) {
  SpectrumParams p;
  p.size = o.spec_size;
  p.phases = o.spec_phases;
  p.merge_tol = o.merge_tol;
  p.seed = r.seed;
  p.alpha = r.alpha;
  return p;
}

cplx resolve_energy(const Options& o, const Resolved& r) {
  if (o.energy == "auto") return auto_energy(r.v, spectrum_params(o, r));
  return parse_complex(o.energy);
}

json config_json(const Options& o, const Resolved& r) {
  json c;
  c["model"] = r.model;
  if (r.model == "amo") c["lambda"] = o.lambda;
  if (r.model == "sem") {
    c["lambda1"] = o.lambda1;
    c["lambda2"] = o.lambda2;
  }
  json coeffs = json::array();
  for (const auto& [k, z] : r.v.to_map()) coeffs.push_back(json::array({k, z.real(), z.imag()}));
  c["coefficients"] = coeffs;
  c["alpha"] = r.alpha.value();
  c["energy"] = o.energy;
  if (!o.energy_grid.empty()) c["energy_grid"] = o.energy_grid;
  if (!o.eps.empty()) c["eps"] = o.eps;
  c["phases"] = o.phases;
  c["orbit_length"] = o.orbit_length;
  c["stride"] = o.stride;
  c["warmup"] = o.warmup;
  c["seed"] = r.seed;
  c["isa"] = r.isa ? std::string(kern::isa_name(*r.isa)) : std::string("auto");
  c["tau_l"] = o.tau_l;
  if (o.fit_tol > 0) c["fit_tol"] = o.fit_tol;
  if (o.group_tol > 0) c["group_tol"] = o.group_tol;
  c["spectrum_size"] = o.spec_size;
  c["spectrum_phases"] = o.spec_phases;
  c["merge_tol"] = o.merge_tol;
  return c;
}

json envelope(const Options& o, const Resolved& r) {
  json j;
  j["version"] = kVersion;
  j["config"] = config_json(o, r);
  return j;
}

// Writes to `path` when given, else to `fallback`.
void emit(const std::string& path, std::ostream& fallback, const std::string& text) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::InvalidArgument, "cannot open '" + path + "' for writing");
  f << text;
  require(static_cast<bool>(f), ErrorKind::InvalidArgument, "write to '" + path + "' failed");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- commands

void cmd_lyapunov(const Options& o, std::ostream& out, std::ostream& err) {
  const auto r = resolve(o, err);
  const cplx e = resolve_energy(o, r);
  const double eps = o.eps.empty() ? 0.0 : parse_double(o.eps, "eps");
  CocycleSpec c;
  if (o.cocycle == "schrodinger") {
    c = schrodinger_cocycle(r.v, e, eps, r.alpha);
  } else if (o.cocycle == "dual") {
    c = build_dual(r.v, e, eps, r.alpha).cocycle();
  } else {
    fail(ErrorKind::InvalidArgument, "unknown cocycle '" + o.cocycle + "' (schrodinger|dual)");
  }
  const auto s = lyapunov_spectrum(c, le_params(o, r));
  json j = envelope(o, r);
  j["cocycle"] = o.cocycle;
  j["energy"] = cjson(e);
  j["eps"] = eps;
  j["exponents"] = s.exponents;
  j["stderr"] = s.std_err;
  j["orbit_length"] = s.orbit_length;
  j["phase_count"] = s.phase_count;
  j["log_det_rate"] = s.log_det_rate;
  emit(o.json_path, out, dump(j));
}

void cmd_dual_spectrum(const Options& o, std::ostream& out, std::ostream& err) {
  const auto r = resolve(o, err);
  const cplx e = resolve_energy(o, r);
  const auto p = dual_params(o, r);
  json j = envelope(o, r);
  j["energy"] = cjson(e);
  if (o.analytic > 0.0) {
    // V_k = r^|k|, analytic in |Im x| < ln(1/r) / 2pi
    require(o.analytic < 1.0, ErrorKind::InvalidArgument, "--analytic ratio must lie in (0,1)");
    std::vector<int> ds;
    for (const auto& s : split(o.degrees, ',')) ds.push_back(static_cast<int>(parse_double(s, "degree")));
    require(!ds.empty(), ErrorKind::InvalidArgument, "empty degree list");
    const int dmax = *std::max_element(ds.begin(), ds.end());
    const double ratio = o.analytic;
    const auto seq = AnalyticPotential::from_coefficients(
        [ratio](int k) -> cplx { return k == 0 ? 0.0 : std::pow(ratio, std::abs(k)); }, dmax,
        std::log(1.0 / ratio) / kTwoPi);
    const auto rows = dual_limit_table(seq, e, ds, p);
    json table = json::array();
    std::string csv = "d,i,lhat,cauchy\n";
    for (const auto& row : rows) {
      table.push_back({{"d", row.d}, {"lhat", row.lhat}, {"cauchy", row.cauchy}, {"group_count", row.group_count}});
      for (std::size_t i = 0; i < row.lhat.size(); ++i) {
        csv += std::to_string(row.d) + "," + std::to_string(i + 1) + "," + format_number(row.lhat[i]) + "," +
               (i < row.cauchy.size() ? format_number(row.cauchy[i]) : "") + "\n";
      }
    }
    j["analytic_ratio"] = ratio;
    j["strip_half_width"] = seq.h;
    j["table"] = table;
    if (!o.csv.empty()) emit(o.csv, out, csv);
    emit(o.json_path, out, dump(j));
    return;
  }
  const auto s = dual_spectrum(r.v, e, p);
  j["lhat"] = s.lhat;
  j["gamma"] = s.gamma;
  j["stderr"] = s.std_err;
  j["raw"] = s.raw;
  j["raw_stderr"] = s.raw_err;
  json groups = json::array();
  for (const auto& g : s.groups) groups.push_back({{"value", g.value}, {"multiplicity", g.multiplicity}, {"k", g.k}});
  j["groups"] = groups;
  j["group_tol"] = s.group_tol;
  j["real_energy"] = s.real_energy;
  if (s.real_energy) j["pairing_defect"] = s.pairing_defect;
  emit(o.json_path, out, dump(j));
}

void cmd_jensen(const Options& o, std::ostream& out, std::ostream& err) {
  const auto r = resolve(o, err);
  const cplx e = resolve_energy(o, r);
  const auto grid = parse_grid(o.eps.empty() ? "0:0.5:64" : o.eps);
  const auto pr = profile(r.v, e, grid, jensen_params(o, r));

  std::string csv = "eps,L_measured,L_predicted,stderr\n";
  for (std::size_t i = 0; i < pr.eps.size(); ++i) {
    csv += format_number(pr.eps[i]) + "," + format_number(pr.measured[i]) + "," +
           (pr.predicted[i] ? format_number(*pr.predicted[i]) : "") + "," + format_number(pr.std_err[i]) + "\n";
  }
  json j = envelope(o, r);
  j["energy"] = cjson(e);
  j["points"] = pr.eps.size();
  j["l0"] = pr.l0;
  j["lhat"] = pr.dual.lhat;
  j["gamma"] = pr.dual.gamma;
  json tps = json::array(), ptps = json::array(), segs = json::array(), slopes = json::array();
  for (const auto& t : pr.turning_points) tps.push_back({{"eps", t.eps}, {"increment", t.increment}});
  for (const auto& t : pr.predicted_turning_points) ptps.push_back({{"eps", t.eps}, {"increment", t.increment}});
  for (const auto& s : pr.segments) {
    segs.push_back({{"eps_lo", s.eps_lo},
                    {"eps_hi", s.eps_hi},
                    {"slope", s.slope},
                    {"raw_slope", s.raw_slope},
                    {"intercept", s.intercept},
                    {"residual", s.residual}});
    slopes.push_back(s.slope);
  }
  j["turning_points"] = tps;
  j["predicted_turning_points"] = ptps;
  j["slopes"] = slopes;
  j["segments"] = segs;
  j["fit_tol"] = pr.fit_tol;
  j["sup_deviation"] = pr.sup_deviation;
  if (std::isfinite(pr.turning_point_error)) j["turning_point_error"] = pr.turning_point_error;
  j["increments_match"] = pr.increments_match;

  // stdout carries the CSV unless it went to a file, then the summary
  if (!o.csv.empty()) {
    emit(o.csv, out, csv);
    emit(o.json_path, out, dump(j));
  } else {
    out << csv;
    if (!o.json_path.empty()) emit(o.json_path, out, dump(j));
  }
}

void cmd_classify(const Options& o, std::ostream& out, std::ostream& err) {
  const auto r = resolve(o, err);
  std::vector<cplx> energies;
  if (!o.energy_grid.empty()) {
    for (double e : parse_grid(o.energy_grid)) energies.emplace_back(e, 0.0);
  } else {
    energies.push_back(resolve_energy(o, r));
  }
  const auto p = jensen_params(o, r);
  std::string csv = "E,L0,Lhat1,regime,omega,h,uniform\n";
  for (cplx e : energies) {
    try {
      const auto c = classify(r.v, e, p);
      csv += format_energy(e) + "," + format_number(c.l0) + "," + format_number(c.lhat1) + "," +
             to_string(c.regime) + "," + std::to_string(c.omega) + "," + (c.h ? format_number(*c.h) : "") + "," +
             (c.uniform ? "true" : "false") + "\n";
    } catch (const Error& x) {
      // the row stays, the classification is withheld
      if (x.kind() != ErrorKind::BorderlineEnergy && x.kind() != ErrorKind::SnapFailure &&
          x.kind() != ErrorKind::AccelerationMismatch) {
        throw;
      }
      csv += format_energy(e) + ",,,Withheld(" + std::string(to_string(x.kind())) + "),,,\n";
      err << json{{"warning", to_string(x.kind())}, {"energy", cjson(e)}, {"message", x.what()}}.dump() << "\n";
    }
  }
  emit(o.csv, out, csv);
  if (!o.json_path.empty()) {
    json j = envelope(o, r);
    j["rows"] = energies.size();
    emit(o.json_path, out, dump(j));
  }
}

json skipped(const std::string& why) { return json{{"skipped", why}}; }

// Runs `body` unless the cocycle turns out not to be uniformly hyperbolic.
json guarded(const std::function<json()>& body) {
  try {
    return body();
  } catch (const Error& x) {
    if (x.kind() == ErrorKind::NotUniformlyHyperbolic || x.kind() == ErrorKind::FrameNotConverged) {
      return skipped(std::string(to_string(x.kind())) + ": " + x.what());
    }
    throw;
  }
}

void cmd_greens_check(const Options& o, std::ostream& out, std::ostream& err) {
  const auto r = resolve(o, err);
  const cplx e = o.energy == "auto" ? cplx(2, 1) : parse_complex(o.energy);
  const double eps = o.eps.empty() ? 0.1 : parse_double(o.eps, "eps");
  require(o.theta_samples >= 1 && o.average_phases >= 1 && o.truncation >= 10, ErrorKind::InvalidArgument,
          "sample counts must be positive");
  const int d = r.v.degree();
  require(d >= 1, ErrorKind::ZeroLeadingCoefficient, "constant potential has no dual operator");

  GreensParams gp;
  gp.alpha = r.alpha;
  gp.seed = r.seed;
  StripParams sp;
  sp.greens = gp;

  json j = envelope(o, r);
  j["energy"] = cjson(e);
  j["eps"] = eps;
  j["x"] = o.x;

  const auto ds = dual_spectrum(r.v, e, dual_params(o, r));
  bool inside = false;
  for (double g : ds.gamma) inside = inside || std::abs(std::abs(eps) - g) < kGuardBand;
  j["guard_band"] = {{"width", kGuardBand}, {"gamma", ds.gamma}, {"inside", inside}};

  // strip identities over theta samples
  j["strip"] = guarded([&] {
    const auto th = phase_grid(o.theta_samples, r.seed);
    std::vector<StripGreens> res(th.size());
    parallel_for(th.size(), [&](std::size_t i) { res[i] = strip_greens(r.v, e, th[i], sp); });
    double rce = 0, rce2 = 0, gm = 0, ga = 0, g3 = 0;
    for (const auto& s : res) {
      rce = std::max(rce, s.rce);
      rce2 = std::max(rce2, s.rce2);
      gm = std::max(gm, s.green_matrix);
      ga = std::max(ga, s.green_alternate);
      g3 = std::max(g3, s.g3);
    }
    const auto tr = strip_trace_average(r.v, e, o.theta_samples, sp);
    return json{{"samples", th.size()},   {"rce", rce},
                {"rce2", rce2},          {"green_matrix", gm},
                {"green_alternate", ga}, {"g3", g3},
                {"trace_dynamical", cjson(tr.dynamical)}, {"trace_dense", cjson(tr.dense)},
                {"trace_difference", tr.difference}};
  });

  // cofactor kernel for the dual operator against the dense oracle
  const auto kernel_check = [&](const BandedOperator& op, const CocycleSpec& c, int order) {
    const long lo = -60, hi = 60, w = 400;
    const auto k = greens_kernel(op, e, lo - order, cocycle_solutions(c, order, o.x, lo, hi));
    double rel = 0.0, def = 0.0;
    for (long q : {-1L, 0L, 3L}) {
      def = std::max(def, k.defining_residual(q));
      const CVector col = truncated_green_column(op, e, -w, w, q);
      const double scale = col.cwiseAbs().maxCoeff();
      for (long pp = -5; pp <= 5; ++pp) rel = std::max(rel, std::abs(k.value(pp, q) - col(pp + w)) / scale);
    }
    return json{{"d", order},
                {"equation_residual", k.equation_residual},
                {"defining_residual", def},
                {"dense_difference", rel}};
  };
  j["dual_kernel"] = guarded([&] {
    const auto dc = build_dual(r.v, e, 0.0, r.alpha);
    return kernel_check(dual_operator(r.v, o.x, 0.0, r.alpha), dc.cocycle(), d);
  });

  if (inside) {
    const std::string why = "eps within the guard band of a dual exponent";
    j["schrodinger_kernel"] = skipped(why);
    j["scalar"] = skipped(why);
    j["duality"] = skipped(why);
    j["johnson_moser"] = skipped(why);
  } else {
    j["schrodinger_kernel"] = guarded([&] {
      require_hyperbolic(schrodinger_cocycle(r.v, e, eps, r.alpha), 1, gp);
      return kernel_check(schrodinger_operator(r.v, o.x, eps, r.alpha), schrodinger_cocycle(r.v, e, eps, r.alpha), 1);
    });
    j["scalar"] = guarded([&] {
      const auto s = scalar_greens(r.v, o.x, eps, e, gp);
      const long w = 2000;
      const CVector col = truncated_green_column(schrodinger_operator(r.v, o.x, eps, r.alpha), e, -w, w, 0);
      return json{{"g", cjson(s.g)},
                  {"dense", cjson(col(w))},
                  {"difference", std::abs(s.g - col(w))},
                  {"m_plus", cjson(s.m_plus)},
                  {"m_minus", cjson(s.m_minus)},
                  {"ricatti_residual", s.ricatti_residual}};
    });
    j["duality"] = guarded([&] {
      const auto a = duality_residual(r.v, e, eps, o.truncation, o.average_phases, r.alpha);
      return json{{"n", a.n},
                  {"phase_count", o.average_phases},
                  {"schrodinger", cjson(a.lhs)},
                  {"dual", cjson(a.rhs)},
                  {"difference", a.difference},
                  {"difference_doubled", a.difference_doubled}};
    });
    j["johnson_moser"] = guarded([&] {
      JohnsonMoserParams jp;
      jp.le = le_params(o, r);
      jp.greens = gp;
      const auto m = johnson_moser_residual(r.v, e, eps, jp);
      return json{{"derivative", m.derivative}, {"green_term", m.green_term}, {"residual", m.residual}};
    });
  }
  emit(o.json_path, out, dump(j));
}

void cmd_winding(const Options& o, std::ostream& out, std::ostream& err) {
  const auto r = resolve(o, err);
  const cplx e = resolve_energy(o, r);
  const auto grid = parse_grid(o.eps.empty() ? "0.1" : o.eps);
  WindingParams p;
  p.alpha = r.alpha;
  p.theta_steps = o.theta_steps;
  p.cross_check = !o.no_cross_check;
  p.le = le_params(o, r);
  // a single eps is a check, a sweep is a picture: only the check throws
  p.strict = grid.size() == 1;
  json j = envelope(o, r);
  j["energy"] = cjson(e);
  j["n"] = o.box;
  json results = json::array();
  std::string csv = "eps,nu,snapped,slope_nu,near_integer,slope_match\n";
  for (double eps : grid) {
    const auto w = winding_number(r.v, e, eps, o.box, p);
    json row{{"eps", w.eps},
             {"eps_used", w.eps_used},
             {"nu", w.nu},
             {"snapped", w.snapped},
             {"near_integer", w.near_integer},
             {"slope_match", w.slope_match},
             {"samples", w.samples}};
    if (w.slope_nu) row["slope_nu"] = *w.slope_nu;
    results.push_back(row);
    csv += format_number(w.eps) + "," + format_number(w.nu) + "," + std::to_string(w.snapped) + "," +
           (w.slope_nu ? format_number(*w.slope_nu) : "") + "," + (w.near_integer ? "true" : "false") + "," +
           (w.slope_match ? "true" : "false") + "\n";
  }
  j["results"] = results;
  if (!o.csv.empty()) emit(o.csv, out, csv);
  emit(o.json_path, out, dump(j));
}

void cmd_spectrum(const Options& o, std::ostream& out, std::ostream& err) {
  const auto r = resolve(o, err);
  const auto iv = approximate_spectrum(r.v, spectrum_params(o, r));
  std::string csv = "lo,hi\n";
  for (const auto& i : iv) csv += format_number(i.lo) + "," + format_number(i.hi) + "\n";
  emit(o.csv, out, csv);
  if (!o.json_path.empty()) {
    json j = envelope(o, r);
    json arr = json::array();
    for (const auto& i : iv) arr.push_back(json::array({i.lo, i.hi}));
    j["intervals"] = arr;
    emit(o.json_path, out, dump(j));
  }
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--preset", o.preset, "amo | sem")->capture_default_str();
  app->add_option("--lambda", o.lambda, "amo coupling")->capture_default_str();
  app->add_option("--lambda1", o.lambda1, "sem first harmonic")->capture_default_str();
  app->add_option("--lambda2", o.lambda2, "sem second harmonic")->capture_default_str();
  app->add_option("--potential", o.potential, "coefficient file, one 'k re im' per line");
  app->add_option("--alpha", o.alpha, "frequency")->capture_default_str();
  app->add_option("--threads", o.threads, "worker cap, 0 = all cores")->capture_default_str();
  app->add_option("--phases", o.phases, "phases per average")->capture_default_str();
  app->add_option("--orbit-length", o.orbit_length, "steps per orbit, 0 = default")->capture_default_str();
  app->add_option("--stride", o.stride, "QR stride")->capture_default_str();
  app->add_option("--warmup", o.warmup, "burn-in steps, -1 = default")->capture_default_str();
  app->add_option("--seed", o.seed, "phase seed (default QPJ_SEED or 0x5EED)");
  app->add_option("--isa", o.isa, "auto | scalar | avx2")->capture_default_str();
  app->add_option("--csv", o.csv, "CSV output path");
  app->add_option("--json", o.json_path, "JSON output path");
  app->add_option("--tau-l", o.tau_l, "zero-exponent threshold")->capture_default_str();
  app->add_option("--fit-tol", o.fit_tol, "segment fit tolerance, 0 = from stderr");
  app->add_option("--group-tol", o.group_tol, "dual grouping tolerance, 0 = from stderr");
  app->add_option("--spectrum-size", o.spec_size, "truncation size for the spectrum estimate")->capture_default_str();
  app->add_option("--spectrum-phases", o.spec_phases, "phases for the spectrum estimate")->capture_default_str();
  app->add_option("--merge-tol", o.merge_tol, "gap below which intervals merge")->capture_default_str();
}

}  // namespace

std::vector<double> parse_grid(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() == 1) return {parse_double(parts[0], "grid value")};
  require(parts.size() == 3, ErrorKind::ParseError, "grid must be a:b:n, got '" + text + "'");
  const double a = parse_double(parts[0], "grid start"), b = parse_double(parts[1], "grid end");
  const double n = parse_double(parts[2], "grid size");
  require(n >= 1 && n == std::floor(n) && n <= 1e7, ErrorKind::ParseError, "grid size must be a positive integer");
  if (n == 1) {
    require(a == b, ErrorKind::ParseError, "a one-point grid needs a == b");
    return {a};
  }
  return linear_grid(a, b, static_cast<int>(n));
}

cplx parse_complex(const std::string& text) {
  const auto parts = split(text, ',');
  require(parts.size() == 1 || parts.size() == 2, ErrorKind::ParseError, "complex value must be re,im");
  const double re = parse_double(parts[0], "real part");
  const double im = parts.size() == 2 ? parse_double(parts[1], "imaginary part") : 0.0;
  return {re, im};
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"quasi-periodic Jensen toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options o;

  auto* lyap = app.add_subcommand("lyapunov", "Lyapunov spectrum of the Schrodinger or dual cocycle");
  add_common(lyap, o);
  lyap->add_option("--energy", o.energy, "re,im or auto")->capture_default_str();
  lyap->add_option("--eps", o.eps, "imaginary phase shift");
  lyap->add_option("--cocycle", o.cocycle, "schrodinger | dual")->capture_default_str();

  auto* dual = app.add_subcommand("dual-spectrum", "nonnegative dual exponents");
  add_common(dual, o);
  dual->add_option("--energy", o.energy, "re,im or auto")->capture_default_str();
  dual->add_option("--analytic", o.analytic, "ratio r of V_k = r^|k|; prints the degree table");
  dual->add_option("--degrees", o.degrees, "degrees for --analytic")->capture_default_str();

  auto* jen = app.add_subcommand("jensen", "L_eps profile against the dual prediction");
  add_common(jen, o);
  jen->add_option("--energy", o.energy, "re,im or auto")->capture_default_str();
  jen->add_option("--eps", o.eps, "a:b:n (default 0:0.5:64)");

  auto* cls = app.add_subcommand("classify", "regime, acceleration and h per energy");
  add_common(cls, o);
  cls->add_option("--energy", o.energy, "re,im or auto")->capture_default_str();
  cls->add_option("--energy-grid", o.energy_grid, "a:b:n real energies");

  auto* gc = app.add_subcommand("greens-check", "residuals of the Green's function identities");
  add_common(gc, o);
  gc->add_option("--energy", o.energy, "re,im (default 2,1)");
  gc->add_option("--eps", o.eps, "imaginary phase shift (default 0.1)");
  gc->add_option("--x", o.x, "phase for pointwise checks")->capture_default_str();
  gc->add_option("--theta-samples", o.theta_samples, "strip samples")->capture_default_str();
  gc->add_option("--truncation", o.truncation, "half-width N for the duality check")->capture_default_str();
  gc->add_option("--average-phases", o.average_phases, "phases for the duality average")->capture_default_str();

  auto* wind = app.add_subcommand("winding", "winding number of det(H_N - E_B)");
  add_common(wind, o);
  wind->add_option("--energy", o.energy, "base energy re,im or auto")->capture_default_str();
  wind->add_option("--eps", o.eps, "eps or a:b:n sweep (default 0.1)");
  wind->add_option("--size", o.box, "box size N")->capture_default_str();
  wind->add_option("--theta-steps", o.theta_steps, "coarse theta grid, 0 = automatic")->capture_default_str();
  wind->add_flag("--no-cross-check", o.no_cross_check, "skip the profile slope comparison");

  auto* spec = app.add_subcommand("spectrum-approx", "outer approximation of the spectrum");
  add_common(spec, o);

  const auto error_json = [&](std::string_view kind, const std::string& msg, int code) {
    err << json{{"error", kind}, {"message", msg}, {"exit_code", code}, {"version", kVersion}}.dump() << "\n";
    return code;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    return error_json("ParseError", e.what(), kConfigError);
  }

  try {
    if (!o.potential.empty() && (lyap->count("--preset") || dual->count("--preset") || jen->count("--preset") ||
                                 cls->count("--preset") || gc->count("--preset") || wind->count("--preset") ||
                                 spec->count("--preset"))) {
      fail(ErrorKind::InvalidArgument, "--preset and --potential are exclusive");
    }
    if (*lyap) cmd_lyapunov(o, out, err);
    if (*dual) cmd_dual_spectrum(o, out, err);
    if (*jen) cmd_jensen(o, out, err);
    if (*cls) cmd_classify(o, out, err);
    if (*gc) cmd_greens_check(o, out, err);
    if (*wind) cmd_winding(o, out, err);
    if (*spec) cmd_spectrum(o, out, err);
    out.flush();
    return kOk;
  } catch (const Error& e) {
    return error_json(to_string(e.kind()), e.what(), is_config_error(e.kind()) ? kConfigError : kNumericalError);
  } catch (const std::exception& e) {
    return error_json("InternalError", e.what(), kNumericalError);
  }
}

}  // namespace qpj::cli

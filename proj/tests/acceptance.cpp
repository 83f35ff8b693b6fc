// Acceptance run: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails.
//
//   acceptance [output-dir]
//
// The jensen CSV/JSON and the winding CSV are left in output-dir (default
// acceptance_out) for the figure renderer.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "qpj/cli.hpp"
#include "qpj/error.hpp"
#include "qpj/greens.hpp"
#include "qpj/jensen.hpp"
#include "test_util.hpp"

using namespace qpj;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// pinned tolerances
constexpr double kRescaleTol = 1e-12;
constexpr double kSymplecticTol = 1e-12;
constexpr double kPairingTol = 5e-3 * kTwoPi;
constexpr double kHaroPuigTol = 1e-2;
constexpr double kAmoLTol = 1e-2;
constexpr double kAmoHTol = 5e-3;
constexpr double kJensenSupTol = 2e-2;
constexpr double kTurningTol = 2e-2;
constexpr double kTailSlopeTol = 1e-3 * kTwoPi;
constexpr double kTailInterceptTol = 1e-2;
constexpr double kScalarJensenTol = 1e-8;
constexpr double kKernelTol = 1e-8;
constexpr double kDualityTol = 1e-3;
constexpr double kJohnsonMoserTol = 1e-2;
constexpr double kStripTol = 1e-8;
constexpr double kWindingSlopeTol = 0.25;
constexpr double kGuardBand = 2e-2;

fs::path g_out = "acceptance_out";

struct Outcome {
  bool pass = true;
  std::string detail;
};

void note(Outcome& o, bool ok, const std::string& what) {
  if (!ok) o.pass = false;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += (ok ? "" : "FAILED ") + what;
}

std::string num(double x, int digits = 3) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// ------------------------------------------------------------------------

Outcome rescaling() {
  Outcome o;
  testing::Gen g(101);
  for (const auto& [name, v] : std::map<std::string, TrigPotential>{{"amo", amo(2.0)}, {"sem", sem(0.6, 0.3)}}) {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const double th = g.uniform(), eps = g.uniform(-0.3, 0.3);
      const cplx e = g.complex(3.0);
      worst = std::max(worst, rescaling_residual(v, e, eps, {th}));
    }
    note(o, worst < kRescaleTol, name + " max " + num(worst));
  }
  return o;
}

Outcome symplectic() {
  Outcome o;
  testing::Gen g(102);
  for (int d = 1; d <= 3; ++d) {
    std::map<int, cplx> m;
    m[0] = g.uniform(-1, 1);
    for (int k = 1; k <= d; ++k) {
      cplx c = g.complex(0.8) + (k == d ? cplx(0.5, 0) : cplx{});
      m[k] = c;
      m[-k] = std::conj(c);
    }
    std::vector<double> th(100);
    for (auto& t : th) t = g.uniform();
    const double r = symplectic_residual(build_dual(TrigPotential::from_map(m), g.uniform(-3, 3)), th);
    note(o, r < kSymplecticTol, "d=" + std::to_string(d) + " " + num(r));
  }
  return o;
}

// five real energies spread over the truncation eigenvalues
std::vector<double> spectral_energies(const TrigPotential& v) {
  const auto ev = truncation_eigenvalues(v);
  std::vector<double> out;
  for (double q : {0.1, 0.3, 0.5, 0.7, 0.9}) out.push_back(ev[static_cast<std::size_t>(q * double(ev.size() - 1))]);
  return out;
}

Outcome pairing() {
  Outcome o;
  const auto v = sem(0.6, 0.3);
  double worst = 0.0;
  for (double e : spectral_energies(v)) {
    try {
      const auto s = dual_spectrum(v, e);
      const std::size_t n = s.raw.size();
      for (std::size_t i = 0; i < n / 2; ++i) {
        const double lim = std::max(kPairingTol, 3.0 * std::max(s.raw_err[i], s.raw_err[n - 1 - i]));
        const double dev = std::abs(s.raw[i] + s.raw[n - 1 - i]);
        worst = std::max(worst, dev);
        if (dev >= lim) note(o, false, "E=" + num(e) + " pair " + std::to_string(i) + " " + num(dev));
      }
    } catch (const Error& x) {
      note(o, false, "E=" + num(e) + " " + std::string(to_string(x.kind())));
    }
  }
  note(o, true, "max |l_i + l_2d+1-i| " + num(worst));
  return o;
}

Outcome haro_puig() {
  Outcome o;
  testing::Gen g(104);
  for (const auto& [name, v] : std::map<std::string, TrigPotential>{{"amo2", amo(2.0)}, {"sem", sem(0.6, 0.3)}}) {
    std::vector<cplx> es;
    for (double e : spectral_energies(v)) es.emplace_back(e, 0.0);
    for (int i = 0; i < 5; ++i) es.emplace_back(g.uniform(-3, 3), g.uniform(0.2, 1.5));
    double worst = 0.0;
    for (cplx e : es) worst = std::max(worst, haro_puig_residual(v, e));
    note(o, worst < kHaroPuigTol, name + " max " + num(worst));
  }
  return o;
}

Outcome amo_constants() {
  Outcome o;
  const auto v2 = amo(2.0);
  const double e2 = auto_energy(v2);
  const double l2 = complexified_exponent(v2, e2, 0.0, {}).value;
  const auto a2 = acceleration(v2, e2);
  note(o, std::abs(l2 - std::log(2.0)) < kAmoLTol, "L(2)=" + num(l2, 6));
  note(o, a2.omega == 1, "omega(2)=" + std::to_string(a2.omega));

  const auto vh = amo(0.5);
  const double eh = auto_energy(vh);
  const auto c = classify(vh, eh);
  note(o, c.l0 < kAmoLTol, "L(1/2)=" + num(c.l0));
  note(o, c.omega == 0, "omega(1/2)=" + std::to_string(c.omega));
  note(o, c.h && std::abs(*c.h - std::log(2.0) / kTwoPi) < kAmoHTol, "h=" + num(c.h.value_or(NAN), 6));
  return o;
}

std::vector<std::string> jensen_args(const fs::path& csv, const fs::path& js) {
  return {"qpj",   "jensen", "--preset", "sem", "--lambda1", "0.4", "--lambda2", "0.2", "--energy",
          "auto",  "--eps",  "0:0.5:64", "--csv", csv.string(), "--json", js.string()};
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

Outcome jensen() {
  Outcome o;
  const auto csv = g_out / "jensen.csv", js = g_out / "jensen.json";
  if (run_cli(jensen_args(csv, js)) != 0) {
    note(o, false, "jensen command failed");
    return o;
  }
  std::ifstream f(js);
  const auto j = json::parse(f);
  const double sup = j["sup_deviation"];
  note(o, sup < kJensenSupTol, "sup_deviation " + num(sup));
  const auto& tps = j["turning_points"];
  const auto& gamma = j["gamma"];
  // every positive gamma needs a measured turning point nearby
  double worst = 0.0;
  bool matched = true;
  for (const auto& gv : gamma) {
    const double gm = gv;
    if (gm <= kTurningTol) continue;
    double best = 1e9;
    for (const auto& t : tps) best = std::min(best, std::abs(t["eps"].get<double>() - gm));
    worst = std::max(worst, best);
    matched = matched && best < kTurningTol;
  }
  // and no measured turning point away from the predicted ones
  for (const auto& t : tps) {
    const double te = t["eps"];
    if (te == 0.0) continue;
    double best = 1e9;
    for (const auto& gv : gamma) best = std::min(best, std::abs(te - gv.get<double>()));
    matched = matched && best < kTurningTol;
  }
  note(o, matched, "turning points " + std::to_string(tps.size()) + ", max distance " + num(worst));
  note(o, j["increments_match"].get<bool>(), "increments vs multiplicities");
  return o;
}

Outcome tail() {
  Outcome o;
  for (const auto& [name, v] : std::map<std::string, TrigPotential>{{"amo2", amo(2.0)}, {"sem", sem(0.6, 0.3)}}) {
    const int d = v.degree();
    const auto pr = profile(v, 0.4, linear_grid(-0.9, -0.6, 16));
    if (pr.segments.size() != 1) {
      note(o, false, name + " " + std::to_string(pr.segments.size()) + " segments");
      continue;
    }
    const auto& s = pr.segments[0];
    const double ds = std::abs(s.raw_slope * kTwoPi + kTwoPi * d);
    const double di = std::abs(s.intercept - std::log(std::abs(v.coeff(d))));
    note(o, ds < kTailSlopeTol && di < kTailInterceptTol, name + " slope " + num(ds) + " intercept " + num(di));
  }
  return o;
}

Outcome scalar_jensen_check() {
  Outcome o;
  testing::Gen g(108);
  int used = 0;
  double worst = 0.0;
  while (used < 20) {
    const auto v = (used % 2) ? sem(g.uniform(0.1, 1), g.uniform(0.1, 1)) : amo(g.uniform(0.3, 3));
    const auto s = scalar_jensen(v, g.complex(3.0), g.uniform(-0.4, 0.4));
    if (s.root_near_circle) continue;
    ++used;
    worst = std::max(worst, s.difference);
  }
  note(o, worst < kScalarJensenTol, "20 samples, max " + num(worst));
  return o;
}

double kernel_error(const BandedOperator& op, const CocycleSpec& c, int d, cplx e, double th) {
  const auto k = greens_kernel(op, e, -60 - d, cocycle_solutions(c, d, th, -60, 60));
  double worst = 0.0;
  for (long q : {-2L, 0L, 3L}) {
    const CVector col = truncated_green_column(op, e, -400, 400, q);
    const double scale = col.cwiseAbs().maxCoeff();
    for (long p = -5; p <= 5; ++p) worst = std::max(worst, std::abs(k.value(p, q) - col(p + 400)) / scale);
  }
  return worst;
}

Outcome kernel() {
  Outcome o;
  const auto v1 = amo(2.0);
  const cplx e1(0.4, 0.5);
  const double r1 = kernel_error(schrodinger_operator(v1, 0.27, 0.0), schrodinger_cocycle(v1, e1, 0.0), 1, e1, 0.27);
  note(o, r1 < kKernelTol, "d=1 " + num(r1));
  const auto v2 = sem(0.6, 0.3);
  const cplx e2(2, 1);
  double r2 = 0.0;
  for (double th : {0.05, 0.61}) {
    r2 = std::max(r2, kernel_error(dual_operator(v2, th, 0.0), build_dual(v2, e2).cocycle(), 2, e2, th));
  }
  note(o, r2 < kKernelTol, "d=2 " + num(r2));
  return o;
}

Outcome duality() {
  Outcome o;
  struct Case {
    std::string name;
    TrigPotential v;
    cplx e;
    double eps;
  };
  for (const auto& c : {Case{"amo1 E=i", amo(1.0), cplx(0, 1), 0.0}, Case{"sem E=1+i eps=0.1", sem(0.6, 0.3), cplx(1, 1), 0.1}}) {
    try {
      const auto r = duality_residual(c.v, c.e, c.eps, 1000, 256);
      const bool halves = r.difference_doubled <= std::max(r.difference / 2, kTruncationFloor);
      note(o, r.difference < kDualityTol && halves,
           c.name + " diff " + num(r.difference) + " at 2N " + num(r.difference_doubled));
    } catch (const Error& x) {
      note(o, false, c.name + " " + std::string(to_string(x.kind())) + ": " + x.what());
    }
  }
  // context for the sem row: distance to the nearest turning point and the
  // same average with more phases
  const auto g = dual_spectrum(sem(0.6, 0.3), cplx(1, 1)).gamma;
  double dist = 1e9;
  for (double x : g) dist = std::min(dist, std::abs(x - 0.1));
  const auto more = duality_residual(sem(0.6, 0.3), cplx(1, 1), 0.1, 1000, 1024);
  note(o, true, "info: sem eps is " + num(dist) + " from Lhat/2pi; 1024 phases give " + num(more.difference));
  return o;
}

Outcome johnson_moser() {
  Outcome o;
  struct Case {
    std::string name;
    TrigPotential v;
    cplx e;
    double eps;
  };
  const std::vector<Case> cases = {{"amo2 0.5i", amo(2.0), cplx(0, 0.5), 0.0},
                                   {"amo2 1+i eps .3", amo(2.0), cplx(1, 1), 0.3},
                                   {"sem.4,.2 2+i eps .1", sem(0.4, 0.2), cplx(2, 1), 0.1},
                                   {"sem.4,.2 .5+.7i eps .05", sem(0.4, 0.2), cplx(0.5, 0.7), 0.05},
                                   {"sem.6,.3 1+i eps .05", sem(0.6, 0.3), cplx(1, 1), 0.05}};
  for (const auto& c : cases) {
    for (double gm : dual_spectrum(c.v, c.e).gamma) {
      if (std::abs(std::abs(c.eps) - gm) < kGuardBand) note(o, false, c.name + " inside guard band");
    }
    try {
      const double r = johnson_moser_residual(c.v, c.e, c.eps).residual;
      note(o, r < kJohnsonMoserTol, c.name + " " + num(r));
    } catch (const Error& x) {
      note(o, false, c.name + " " + std::string(to_string(x.kind())));
    }
  }
  return o;
}

Outcome strip() {
  Outcome o;
  double worst = 0.0;
  for (double th : phase_grid(16, default_seed())) worst = std::max(worst, strip_greens(sem(0.6, 0.3), cplx(2, 1), th).max_residual());
  note(o, worst < kStripTol, "16 phases, max " + num(worst));
  return o;
}

Outcome winding() {
  Outcome o;
  const auto v = sem(0.6, 0.3);
  const double e = auto_energy(v);
  const auto g = dual_spectrum(v, e).gamma;
  if (g.size() != 2) {
    note(o, false, "expected two dual exponents");
    return o;
  }
  const std::vector<double> eps = {g[0] / 2, (g[0] + g[1]) / 2, g[1] + 0.1};
  std::string csv = "eps,nu,snapped,slope_nu\n";
  for (int i = 0; i < 3; ++i) {
    try {
      const auto w = winding_number(v, e, eps[i], 200);
      const bool ok = w.snapped == -i && w.slope_nu && std::abs(*w.slope_nu + i) <= kWindingSlopeTol;
      note(o, ok, "eps " + num(eps[i]) + " nu " + num(w.nu) + " slope " + num(w.slope_nu.value_or(NAN)));
      csv += cli::format_number(eps[i]) + "," + cli::format_number(w.nu) + "," + std::to_string(w.snapped) + "," +
             cli::format_number(w.slope_nu.value_or(NAN)) + "\n";
    } catch (const Error& x) {
      note(o, false, "eps " + num(eps[i]) + " " + std::string(to_string(x.kind())));
    }
  }
  std::ofstream(g_out / "winding.csv", std::ios::binary) << csv;
  return o;
}

Outcome determinism() {
  Outcome o;
  const auto a = g_out / "jensen_a.csv", aj = g_out / "jensen_a.json";
  const auto b = g_out / "jensen_b.csv", bj = g_out / "jensen_b.json";
  if (run_cli(jensen_args(a, aj)) != 0 || run_cli(jensen_args(b, bj)) != 0) {
    note(o, false, "jensen command failed");
    return o;
  }
  const auto sa = slurp(a), sb = slurp(b);
  note(o, !sa.empty() && sa == sb, "CSV " + std::to_string(sa.size()) + " bytes");
  note(o, slurp(aj) == slurp(bj), "JSON summary");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_out = argv[1];
  fs::create_directories(g_out);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "rescaling identity", 1, rescaling},
      {2, "symplectic dual cocycle", 1, symplectic},
      {3, "dual pairing at real E", 30, pairing},
      {4, "Haro-Puig", 120, haro_puig},
      {5, "AMO constants", 60, amo_constants},
      {6, "multiplicative Jensen", 300, jensen},
      {7, "large-eps tail", 60, tail},
      {8, "scalar Jensen", 5, scalar_jensen_check},
      {9, "cofactor kernel vs dense", 10, kernel},
      {10, "duality of averaged Green's functions", 120, duality},
      {11, "Johnson-Moser", 60, johnson_moser},
      {12, "strip identities", 30, strip},
      {13, "winding", 120, winding},
      {14, "determinism", 600, determinism},
  };
  int failures = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %-40s %7.1fs (budget %gs)  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, dt, c.budget_s,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failures, all.size());
  return failures == 0 ? 0 : 1;
}

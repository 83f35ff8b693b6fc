#include "qpj/model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "qpj/error.hpp"

namespace qpj {

TrigPotential TrigPotential::from_map(const std::map<int, cplx>& coeffs, bool* trimmed) {
  double scale = 0.0;
  for (const auto& [k, v] : coeffs) {
    require(std::isfinite(v.real()) && std::isfinite(v.imag()), ErrorKind::InvalidArgument,
            "non-finite coefficient at k=" + std::to_string(k));
    scale = std::max(scale, std::abs(v));
  }
  bool dropped = false;
  int d = 0;
  std::map<int, cplx> kept;
  for (const auto& [k, v] : coeffs) {
    if (v == cplx{}) continue;
    if (std::abs(v) <= kTrimThreshold * scale) {
      dropped = true;
      continue;
    }
    kept[k] = v;
    d = std::max(d, std::abs(k));
  }
  if (trimmed) *trimmed = dropped;

  TrigPotential out;
  out.coeffs_.assign(2 * d + 1, cplx{});
  for (const auto& [k, v] : kept) out.coeffs_[k + d] = v;
  return out;
}

cplx TrigPotential::coeff(int k) const {
  const int d = degree();
  if (k < -d || k > d) return {};
  return coeffs_[k + d];
}

double TrigPotential::max_abs() const {
  double m = 0.0;
  for (auto v : coeffs_) m = std::max(m, std::abs(v));
  return m;
}

bool TrigPotential::is_real(double tol) const {
  const double scale = std::max(1.0, max_abs());
  for (int k = 0; k <= degree(); ++k) {
    if (std::abs(coeff(-k) - std::conj(coeff(k))) > tol * scale) return false;
  }
  return true;
}

cplx TrigPotential::evaluate(double x, double eps) const {
  const int d = degree();
  // reduce the phase first so large x does not lose digits in sin/cos
  const double xr = x - std::floor(x);
  cplx sum{};
  for (int k = -d; k <= d; ++k) {
    const cplx v = coeffs_[k + d];
    if (v == cplx{}) continue;
    const double ang = kTwoPi * std::remainder(k * xr, 1.0);
    sum += v * std::exp(-kTwoPi * k * eps) * cplx(std::cos(ang), std::sin(ang));
  }
  return sum;
}

TrigPotential TrigPotential::shifted(double eps) const {
  TrigPotential out = *this;
  const int d = degree();
  for (int k = -d; k <= d; ++k) out.coeffs_[k + d] *= std::exp(-kTwoPi * k * eps);
  return out;
}

TrigPotential TrigPotential::truncated(int d) const {
  require(d >= 0, ErrorKind::InvalidArgument, "truncated: negative degree");
  std::map<int, cplx> m;
  for (int k = -std::min(d, degree()); k <= std::min(d, degree()); ++k) m[k] = coeff(k);
  TrigPotential out;
  const int dd = std::min(d, degree());
  out.coeffs_.assign(2 * dd + 1, cplx{});
  for (const auto& [k, v] : m) out.coeffs_[k + dd] = v;
  return out;
}

std::map<int, cplx> TrigPotential::to_map() const {
  std::map<int, cplx> m;
  for (int k = -degree(); k <= degree(); ++k) {
    if (coeff(k) != cplx{}) m[k] = coeff(k);
  }
  return m;
}

TrigPotential amo(double lambda) {
  return TrigPotential::from_map({{-1, lambda}, {1, lambda}});
}

TrigPotential sem(double lambda1, double lambda2) {
  return TrigPotential::from_map({{-2, lambda2}, {-1, lambda1}, {1, lambda1}, {2, lambda2}});
}

const TrigPotential& AnalyticPotential::at_degree(int d) const {
  if (d < 1 || d > static_cast<int>(truncations.size())) {
    fail(ErrorKind::InvalidArgument, "no truncation of degree " + std::to_string(d));
  }
  return truncations[d - 1];
}

Frequency::Frequency(double alpha) : alpha_(alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidArgument, "alpha must lie in (0,1)");
  for (int q = 1; q <= 50; ++q) {
    const double p = std::round(alpha * q);
    if (std::abs(alpha - p / q) <= 1e-9) {
      fail(ErrorKind::InvalidArgument, "alpha is too close to the rational " +
                                           std::to_string(static_cast<int>(p)) + "/" +
                                           std::to_string(q));
    }
  }
}

LoadResult parse_potential(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::map<int, cplx> coeffs;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok_k;
    if (!(ls >> tok_k)) continue;  // blank or comment only

    auto bad = [&](const std::string& why) {
      fail(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": " + why);
    };
    int k = 0;
    double re = 0, im = 0;
    try {
      std::size_t used = 0;
      k = std::stoi(tok_k, &used);
      if (used != tok_k.size()) bad("invalid index '" + tok_k + "'");
    } catch (const std::logic_error&) {
      bad("invalid index '" + tok_k + "'");
    }
    std::string tok_re, tok_im, extra;
    if (!(ls >> tok_re >> tok_im)) bad("expected `k re im`");
    if (ls >> extra) bad("trailing token '" + extra + "'");
    try {
      std::size_t u1 = 0, u2 = 0;
      re = std::stod(tok_re, &u1);
      im = std::stod(tok_im, &u2);
      if (u1 != tok_re.size() || u2 != tok_im.size()) bad("invalid number");
    } catch (const std::logic_error&) {
      bad("invalid number");
    }
    if (!std::isfinite(re) || !std::isfinite(im)) bad("non-finite coefficient");
    if (!coeffs.emplace(k, cplx(re, im)).second) bad("duplicate index " + std::to_string(k));
  }
  if (coeffs.empty()) fail(ErrorKind::EmptyPotential, "potential file lists no coefficients");

  LoadResult out;
  bool trimmed = false;
  double scale = 0.0;
  for (const auto& [k, v] : coeffs) scale = std::max(scale, std::abs(v));
  // The single line `0 0 0` is the explicit spelling of the free potential;
  // any other all-zero file is rejected.
  const bool explicit_free = coeffs.size() == 1 && coeffs.begin()->first == 0;
  if (scale == 0.0 && !explicit_free) fail(ErrorKind::EmptyPotential, "all coefficients are zero");
  out.potential = TrigPotential::from_map(coeffs, &trimmed);
  if (trimmed) {
    out.warnings.push_back("coefficients below " + std::to_string(kTrimThreshold) +
                           " relative to max were trimmed; degree is now " +
                           std::to_string(out.potential.degree()));
  }
  return out;
}

LoadResult load_potential(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::ParseError, "cannot open potential file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_potential(ss.str());
}

void save_potential(const TrigPotential& v, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::ParseError, "cannot write potential file " + path.string());
  f << "# k re im\n" << std::setprecision(17);
  const auto m = v.to_map();
  if (m.empty()) f << "0 0 0\n";
  for (const auto& [k, c] : m) f << k << ' ' << c.real() << ' ' << c.imag() << '\n';
}

}  // namespace qpj

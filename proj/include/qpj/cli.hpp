#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qpj/model.hpp"

namespace qpj::cli {

inline constexpr const char* kVersion = "qpj 0.1.0";

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kNumericalError = 3;

/// `a:b:n`, n points from a to b inclusive. A bare number is a one-point grid.
std::vector<double> parse_grid(const std::string& text);

/// `re,im` or `re`.
cplx parse_complex(const std::string& text);

/// %.17g
std::string format_number(double x);

/// Runs one invocation. Results go to `out` (or to --csv / --json files),
/// diagnostics and the error object to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qpj::cli

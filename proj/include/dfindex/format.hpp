#pragma once

#include <cmath>
#include <iomanip>
#include <locale>
#include <sstream>
#include <string>

#include "json.hpp"

namespace dfindex {

/// Real for CSV output: '.' decimal regardless of locale, 17 significant
/// digits, and the literals inf, -inf, nan.
inline std::string csv_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << v;
  return os.str();
}

/// JSON has no infinities: they become the strings "inf"/"-inf", NaN becomes null.
inline nlohmann::json json_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace dfindex

#pragma once

#include <string>

namespace pcaplab {

/// 12 significant digits, "nan"/"inf" spelled out.
std::string format_number(double v);
/// v rounded to 12 significant digits (NaN and infinities unchanged).
double round12(double v);

}  // namespace pcaplab

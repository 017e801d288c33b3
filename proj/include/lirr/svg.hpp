#pragma once

#include <string>
#include <vector>

#include "lirr/sweep.hpp"

namespace lirr {

struct SvgCurve {
  std::string svg;
  /// Empty unless the data forced a fallback (e.g. a single ratio point).
  std::string warning;
  std::size_t polylines = 0;
};

/// Mean target metric against labeled-target ratio, one polyline per method
/// in first-seen order. With fewer than two distinct ratios the points are
/// drawn as a scatter and a warning is returned.
SvgCurve emit_curve_svg(const std::vector<CellSummary>& summary, TaskKind kind);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace lirr

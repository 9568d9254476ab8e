#ifndef HOIGEN_DIAGNOSE_H_
#define HOIGEN_DIAGNOSE_H_

#include <string>
#include <utility>
#include <vector>

#include "hoigen/matrix.h"

namespace hoigen {

// Projects rows of `x` onto its top `k` principal components (n x k). Signs
// are fixed so the largest-magnitude loading of each component is positive.
Matrix PcaProject(const Matrix& x, int k);

struct ScatterPoint {
  double x = 0;
  double y = 0;
  int category = 0;  // index into the legend
  bool synthesized = false;
};

// SVG scatter: realistic points drawn light, synthesized points dark, one
// hue per category.
std::string ScatterSvg(const std::string& title, const std::vector<ScatterPoint>& points,
                       const std::vector<std::string>& legend);

// SVG line plot of one or more named series against epoch.
std::string CurveSvg(const std::string& title,
                     const std::vector<std::pair<std::string, std::vector<double>>>& series);

}  // namespace hoigen

#endif  // HOIGEN_DIAGNOSE_H_

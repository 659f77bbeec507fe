#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qlse {

using Real = double;
using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using IVec = std::vector<int>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Hard bounds applied to every stored variance in the message-passing loop.
inline constexpr double kVarFloor = 1e-11;
inline constexpr double kVarCap = 1e11;

// Subset of observed array elements: strictly increasing indices in [0, n).
struct RowSet {
  int n = 0;            // full aperture size
  IVec rows;            // observed element indices, strictly increasing

  int m() const { return static_cast<int>(rows.size()); }

  void validate() const {
    if (n <= 0) throw std::invalid_argument("RowSet: aperture size must be positive");
    if (rows.empty()) throw std::invalid_argument("RowSet: empty observation set");
    int prev = -1;
    for (int r : rows) {
      if (r < 0 || r >= n)
        throw std::invalid_argument("RowSet: element index out of range");
      if (r <= prev)
        throw std::invalid_argument("RowSet: indices must be strictly increasing");
      prev = r;
    }
  }
};

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double x) {
  double y = std::fmod(x + kPi, 2.0 * kPi);
  if (y < 0) y += 2.0 * kPi;
  return y - kPi;
}

}  // namespace qlse

#ifndef IMH_CORE_HPP
#define IMH_CORE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace imh {

/// A point in R^D. Finite coordinates only; dimension is the vector length.
using Point = std::vector<double>;

enum class SampleSource { kTarget, kProposal, kChain };

struct SampleSet {
  std::vector<Point> points;
  SampleSource source = SampleSource::kTarget;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

/// Raised when a log-density is requested where the density is exactly zero.
struct ZeroDensityError : Error {
  using Error::Error;
};

struct NonFiniteError : Error {
  using Error::Error;
};

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite value in ") + what);
}

inline void check_dim(const Point& x, std::size_t expected, const char* what) {
  if (x.size() != expected) {
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(x.size()) +
                         ", expected " + std::to_string(expected));
  }
}

/// Row-major index into a K x K table.
inline std::size_t at(std::size_t row, std::size_t col, std::size_t k) { return row * k + col; }

}  // namespace imh

#endif

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "tvarnet/errors.hpp"

namespace tvarnet {

/// Contiguous, ordered, non-overlapping windows covering the target range
/// [L+1, T]. Coefficients are held constant within each window.
struct WindowPartition {
  int first = 0;            // L+1
  int last = 0;             // T
  std::vector<int> starts;  // starts[0] == first, strictly increasing

  int num_windows() const { return static_cast<int>(starts.size()); }
  int window_start(int n) const { return starts[n]; }  // n is 0-based
  int window_end(int n) const {
    return n + 1 < num_windows() ? starts[n + 1] - 1 : last;
  }
  int window_length(int n) const { return window_end(n) - window_start(n) + 1; }

  /// 0-based index of the window containing t.
  int index_of(int t) const {
    if (t < first || t > last)
      throw ArgumentError("time " + std::to_string(t) + " outside [" + std::to_string(first) +
                          ", " + std::to_string(last) + "]");
    auto it = std::upper_bound(starts.begin(), starts.end(), t);
    return static_cast<int>(it - starts.begin()) - 1;
  }

  void validate() const {
    if (starts.empty() || starts.front() != first)
      throw ArgumentError("partition must start at L+1");
    for (std::size_t k = 1; k < starts.size(); ++k)
      if (starts[k] <= starts[k - 1])
        throw ArgumentError("window starts must be strictly increasing");
    if (starts.back() > last) throw ArgumentError("window start beyond T");
  }
};

/// Consecutive windows of the nominal length; the final window absorbs the
/// remainder so its length lies in [window_len, 2*window_len - 1]. A nominal
/// length >= T-L yields a single window.
inline WindowPartition uniform_partition(int order, int num_samples, int window_len) {
  if (window_len < 1) throw ArgumentError("window_len must be >= 1");
  if (num_samples <= order) throw ArgumentError("need T > L");
  WindowPartition part;
  part.first = order + 1;
  part.last = num_samples;
  const int span = num_samples - order;
  const int count = std::max(1, span / window_len);
  part.starts.reserve(count);
  for (int n = 0; n < count; ++n) part.starts.push_back(part.first + n * window_len);
  return part;
}

inline WindowPartition unit_partition(int order, int num_samples) {
  return uniform_partition(order, num_samples, 1);
}

/// 1-based window id n(t).
inline int window_index(const WindowPartition& part, int t) { return part.index_of(t) + 1; }

}  // namespace tvarnet

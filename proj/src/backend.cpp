// SPDX-License-Identifier: Apache-2.0
#include "ulx/backend.hpp"

#include "ulx/error.hpp"

namespace ulx {

ValidationSet Provider::validation_set(std::span<const int> /*layers*/) const {
  throw BackendError("provider has no validation corpus");
}

void check_step_output(const StepOutput& out, std::size_t dim, std::span<const int> layers, const PathId& path,
                       int step) {
  const std::string where = " (path " + path.str() + ", step " + std::to_string(step) + ")";
  for (int m : layers) {
    const auto it = out.states.find(m);
    if (it == out.states.end()) throw BackendError("missing state for layer " + std::to_string(m) + where);
    if (it->second.size() != dim)
      throw BackendError("state at layer " + std::to_string(m) + " has dimension " +
                         std::to_string(it->second.size()) + where);
    if (!all_finite(it->second.span())) throw BackendError("non-finite state at layer " + std::to_string(m) + where);
  }
}

}  // namespace ulx

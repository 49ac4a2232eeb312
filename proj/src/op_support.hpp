#pragma once

#include "wgcn/autodiff.hpp"
#include "wgcn/errors.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace wgcn::detail {

using NodePtr = std::shared_ptr<Node>;

// Builds the output node of an operation. Records it on the active tape when
// any input needs a gradient; otherwise the backward closure is dropped.
Var make_result(const char* op, Tensor value, std::vector<NodePtr> inputs,
                std::function<void(Node&)> backward);

inline void require(bool cond, const std::string& what) {
  if (!cond) throw DimensionError(what);
}

}  // namespace wgcn::detail

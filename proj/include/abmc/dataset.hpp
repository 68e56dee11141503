#pragma once

#include <string>
#include <vector>

#include "abmc/tensor.hpp"

namespace abmc {

// One observed dataset: an observation matrix plus any direct conditioning
// values (e.g. a randomized prior scale) that ride along with it.
struct Dataset {
  std::string id;
  Tensor obs;                   // [rows, obs_cols]
  std::vector<double> context;  // appended to the summary output; often empty
};

}  // namespace abmc

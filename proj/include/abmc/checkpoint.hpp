#pragma once

#include <string>

#include "json.hpp"

#include "abmc/optimizer.hpp"

namespace abmc {

// Checkpoint document: {"meta": {...}, "params": [{name, rows, cols, values}]}.
// Doubles are serialized shortest-round-trip, so a save/load cycle is
// bit-exact. `meta` is whatever the owning network needs to rebuild its
// architecture before the parameter values are poured back in.
void save_checkpoint(const ParamStore& store, const nlohmann::json& meta,
                     const std::string& path);

nlohmann::json read_checkpoint(const std::string& path);

// Fills an already-constructed store from `doc`; names, order, and shapes
// must match exactly.
void load_params(ParamStore& store, const nlohmann::json& doc);

}  // namespace abmc

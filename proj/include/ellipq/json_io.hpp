#pragma once

// JSON conversions for the library types: complex numbers as two-element
// [re, im] arrays (numbers round-trip bit-exactly through the shortest
// decimal representation), model configurations as flat objects with
// documented keys, and result structures (weight-block matrices, root
// solutions, completeness reports) as plain nested objects.  Unknown object
// keys are rejected so that a typo in a config never passes silently.

#include <string>
#include <vector>

#include <json.hpp>

#include "ellipq/bethe.hpp"
#include "ellipq/model.hpp"
#include "ellipq/rmatrix.hpp"

namespace ellipq {

using Json = nlohmann::json;

// [re, im] array or a bare number (imaginary part zero).
cplx complex_from_json(const Json& node);
Json complex_to_json(cplx value);

// Keys: tau, eta (required), p (optional), lambdas, z (required arrays of
// complex), m (optional; defaults to sum(lambdas)/2 when that is a
// nonnegative integer), truncation (optional integer array, -1 = unbounded),
// allow_coincident_z (optional bool).  Unknown keys throw ConfigError.
ModelConfig model_from_json(const Json& node);
Json model_to_json(const ModelConfig& config);

Json block_to_json(const WeightBlockMatrix& block);
Json solution_to_json(const BetheSolution& solution);
Json completeness_to_json(const CompletenessReport& report);

// Reads and parses a whole JSON file; throws ConfigError on I/O or syntax
// problems (with the filename in the message).
Json load_json_file(const std::string& path);

}  // namespace ellipq

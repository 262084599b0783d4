#pragma once

#include <string>
#include <utility>
#include <vector>

#include "opposd/adam.hpp"
#include "opposd/mlp.hpp"

namespace opposd {

// Binary container: magic "OPSD0001", then for each matrix a record of
//   u32 name length, name bytes, u64 rows, u64 cols, rows*cols f64 values,
// all little-endian. The companion .json sidecar carries layer sizes, the
// head type, and optimizer scalars.
using NamedMatrices = std::vector<std::pair<std::string, DenseMatrix>>;

void write_named_matrices(const std::string& path, const NamedMatrices& matrices);
NamedMatrices read_named_matrices(const std::string& path);

// Model checkpoint = <stem>.bin + <stem>.json. The optimizer state rides
// along so training can resume bit-for-bit. `extra_json` (optional, may be
// empty) is merged into the sidecar under "extra".
void save_model(const std::string& stem, const MlpParams& params,
                const AdamState& opt, const std::string& extra_json = "");

struct LoadedModel {
  MlpParams params;
  AdamState opt;
  std::string extra_json;  // "{}" when absent
};
LoadedModel load_model(const std::string& stem);

}  // namespace opposd

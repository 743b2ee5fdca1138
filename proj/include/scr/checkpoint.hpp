#pragma once

// Self-describing binary tensor file:
//   "SCRCKPT1" | u64 header length | JSON header | raw float64 tensors | u64 FNV-1a of all prior bytes
// The header lists every tensor (name, rows, cols) in payload order plus any
// metadata the caller adds. Values are written bit-exact.

#include "scr/common.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace scr {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix& tensor(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace scr

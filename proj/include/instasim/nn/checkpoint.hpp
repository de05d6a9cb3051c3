#ifndef INSTASIM_NN_CHECKPOINT_HPP_
#define INSTASIM_NN_CHECKPOINT_HPP_

#include <filesystem>
#include <string>

#include <json.hpp>

#include "instasim/nn/param_store.hpp"

namespace instasim::nn {

inline constexpr int kCheckpointFormatVersion = 1;

// "ckpt_000050"
std::string checkpoint_stem(int epoch);

// Writes <dir>/<stem>.bin (little-endian float32 blob of every parameter
// value and both Adam moments) and <dir>/<stem>.json (manifest with name,
// shape, byte offset, format version and `extra`). Returns the .bin path.
std::filesystem::path save_checkpoint(const std::filesystem::path& dir, int epoch,
                                      const std::map<std::string, const ParamStore*>& stores,
                                      const nlohmann::json& extra = nlohmann::json::object());

// Restores every store listed in the manifest next to `bin_path`. Throws
// std::runtime_error on missing files, unknown names or shape mismatches.
nlohmann::json load_checkpoint(const std::filesystem::path& bin_path,
                               const std::map<std::string, ParamStore*>& stores);

}  // namespace instasim::nn

#endif  // INSTASIM_NN_CHECKPOINT_HPP_

#ifndef INSTASIM_SCENARIO_IO_HPP_
#define INSTASIM_SCENARIO_IO_HPP_

#include <filesystem>
#include <stdexcept>
#include <string>

#include "instasim/scene.hpp"

namespace instasim::scene {

// Raised for malformed scenario documents; what() names the offending field.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& text);

void save_scenario(const Scenario& scenario, const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace instasim::scene

#endif  // INSTASIM_SCENARIO_IO_HPP_

#pragma once

#include <optional>
#include <string_view>
#include <vector>

// Files compiled into the binary: the default prompt templates and the
// stop-word list used by the verifier.
namespace modernkit::resources {

std::optional<std::string_view> find(std::string_view name);
std::vector<std::string_view> names();

}  // namespace modernkit::resources

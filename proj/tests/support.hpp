#pragma once

#include <filesystem>
#include <string>

namespace test {

inline std::filesystem::path data(const std::string& rel) { return std::filesystem::path(RSV_DATA_DIR) / rel; }

}  // namespace test

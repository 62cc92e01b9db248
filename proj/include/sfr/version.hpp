#pragma once

#include <string>

namespace sfr {

// Version of every file layout written by the command-line front end.
inline constexpr int kSchemaVersion = 1;

// Compiler and build-type string fixed at configure time.
std::string build_string();

}  // namespace sfr

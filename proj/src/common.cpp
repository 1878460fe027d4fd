#include "podnet/common.hpp"

#include <iostream>

namespace podnet {

namespace {
bool g_warnings_enabled = true;
}

void warn(const std::string& msg) {
    if (g_warnings_enabled) std::cerr << "[warn] " << msg << "\n";
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled = enabled; }

}  // namespace podnet

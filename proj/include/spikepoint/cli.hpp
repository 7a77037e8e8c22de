#pragma once

#include <string>
#include <vector>

namespace spikepoint {
namespace cli {

// Entry point shared by the binary and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace cli
}  // namespace spikepoint

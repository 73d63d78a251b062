#pragma once

#include <string>
#include <vector>

namespace topp3 {
namespace cli {

// Exit codes: 0 success, 2 solver failure (NoConnection/ExtensionFailed/...),
// 3 schema error. Commands: solve, profiles, singular, check, oracle-compare.
int run(const std::vector<std::string>& args);

}  // namespace cli
}  // namespace topp3

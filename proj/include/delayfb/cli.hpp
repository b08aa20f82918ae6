#pragma once

// Command-line front end: certify / simulate / sweep / verify / maxstep.
// run() is the whole program behind main(), kept callable in-process for
// tests. Exit codes: 0 success or pass, 1 failed check or divergence,
// 2 usage or configuration error.

#include <string>
#include <vector>

namespace delayfb::cli {

int run(const std::vector<std::string>& args);

} // namespace delayfb::cli

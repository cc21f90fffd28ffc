#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace recomed {

// args excludes the program name. Exit codes: 0 ok, 1 runtime failure,
// 2 usage error. `in` feeds --confirm-stoplist.
int cli_run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace recomed

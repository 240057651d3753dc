#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mst {

/// Entry point behind the `mst` binary, callable in-process for tests.
/// Subcommands: train, translate, eval, eval-adversarial, viz, gen-data.
/// Every subcommand accepts --config FILE and repeated --set key=value
/// overrides, prints the resolved configuration and seed first, and returns
/// 0 on success, 1 on usage errors, 2 on runtime errors.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace mst

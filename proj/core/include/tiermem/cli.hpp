#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tiermem {

/// Entry point behind the `tiermem` binary; also invocable in-process
/// by tests. Subcommands: init, commit, retrieve, stats, export, bench,
/// validate, serve. Returns 0 on success, 1 on a domain error, 2 on a
/// usage error. Diagnostics go to `err`, results to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace tiermem

#pragma once

#include "pdmesh/sdf.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace pdmesh::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs the command line `args` (without the program name). Normal output goes
/// to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Samples `field` on `res` nodes per axis laid out so the grid's valid box is
/// exactly the default domain: spacing 2/(res-3), origin -1-spacing. Throws
/// DomainError when a node on or outside the domain boundary is not strictly
/// positive, and std::invalid_argument for res < 4.
GridField domain_grid(const ScalarField& field, int res);

} // namespace pdmesh::cli

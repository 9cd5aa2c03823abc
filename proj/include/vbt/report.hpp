#pragma once

// Plain-text report sections with fixed field order.

#include <ostream>
#include <string>
#include <vector>

#include "vbt/explore.hpp"

namespace vbt {

inline std::string describe_vars(const ProgramDef& prog, const std::vector<VarId>& vars) {
  std::vector<std::string> names;
  for (const auto& v : vars) names.push_back(prog.describe(v));
  return names.empty() ? "-" : join(names, ",");
}

inline void write_exploration(std::ostream& out, const ProgramDef& prog, const ExplorationReport& r) {
  out << "schedules_executed " << r.schedules_executed << '\n';
  out << "schedules_pruned " << r.schedules_pruned << '\n';
  out << "schedules_generated " << r.schedules_generated << '\n';
  out << "var_sets " << r.var_sets << '\n';
  out << "budget_exhausted " << (r.budget_exhausted ? "yes" : "no") << '\n';
  for (const auto& b : r.per_bound) {
    out << "bound " << b.c << " executed " << b.executed << " pruned " << b.pruned << '\n';
  }
  out << "bugs " << r.bugs.size() << '\n';
  for (const auto& b : r.bugs) {
    out << "bug " << b.id << " c_used " << b.c_used << " v_used " << b.v_used << " t_used " << b.t_used
        << " found_at_run " << b.found_at_run << " tracked " << describe_vars(prog, b.tracked) << '\n';
    out << serialize_schedule(b.schedule);
  }
}

}  // namespace vbt

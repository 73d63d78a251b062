#pragma once

#include <iosfwd>
#include <string>

#include "topp3/solver.hpp"

namespace topp3 {

// On-disk problem description (schema 1):
//   { "schema": 1, "path": {...}, "constraints": {...},
//     "boundary": {...}, "options": {...} }
struct Scenario {
  std::shared_ptr<const PathSpec> path;
  Vector jerk_min, jerk_max;
  double eps_a = 1e-8;
  std::optional<double> jerk_cap;
  BoundaryCondition bc;
  double dt = 1e-3;
  int segments = 3;
  std::uint64_t seed = 0;

  Topp3Problem problem(double jerk_scale = 1.0) const;
};

// Throws Error{SchemaError} naming the offending key.
Scenario load_scenario(const std::string& json_text);
Scenario load_scenario_file(const std::string& path);
std::string scenario_to_json(const Scenario& sc);

// Deterministic writers (12 significant digits throughout).
std::string solution_to_json(const Topp3Solution& sol,
                             const std::vector<std::string>& file_refs);
void write_trajectory_csv(std::ostream& os,
                          const std::vector<TrajectorySample>& samples);
std::vector<TrajectorySample> read_trajectory_csv(std::istream& is);
void write_singular_csv(std::ostream& os,
                        const std::vector<SingularCurve>& curves);
std::string trace_to_json(const NewtonTrace& trace);

}  // namespace topp3

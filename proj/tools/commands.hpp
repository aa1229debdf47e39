#pragma once

#include <iosfwd>
#include <vector>

#include "monocuboid/io.hpp"
#include "monocuboid/priors.hpp"
#include "monocuboid/solver.hpp"

namespace monocuboid::cli {

// Exit codes: 0 success, 1 bad input or usage, 2 at least one vehicle failed.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitVehicleFailure = 2;

// Entry point of the monocuboid tool. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Solves every vehicle of the document on `threads` workers. Output order
// follows the document. Failures become records with an error message.
std::vector<PoseRecord> solve_document(const AnnotationDocument& doc, const PriorTable& priors,
                                       const SolverConfig& config, int threads, bool timing);

}  // namespace monocuboid::cli

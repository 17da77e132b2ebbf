#pragma once

#include <filesystem>
#include <string>

#include "lcm/corpus.hpp"
#include "lcm/ir.hpp"

namespace fixtures {

inline std::string corpus_path(const std::string& rel) { return std::string(LCM_CORPUS_DIR) + "/" + rel; }

inline std::string corpus_text(const std::string& rel) { return lcm::corpus::read_file(corpus_path(rel)); }

inline lcm::ir::Program corpus_program(const std::string& rel) { return lcm::ir::parse(corpus_text(rel)); }

inline const char* const kSpectreV1 = R"(
func victim(r0):
e1: r1 = load size
e2: r2 = load y
e3: r3 = lt r2, r1
e4: beqz r3, e8
e5: r4 = load A[r2]
e6: r5 = load B[r4]
e7: store tmp, r5
e8: skip
)";

}  // namespace fixtures

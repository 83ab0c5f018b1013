#pragma once

// Line-oriented description files for structural causal models. Sections
// [node], [noise], [mechanism] hold `key = value` entries; mechanism tables
// are rows of the form `parents=(v1,v2) noise=u -> value`. '#' starts a
// comment, blank lines are ignored, unknown keys are rejected. The exact
// grammar lives in docs/formats.md; print_scm emits the canonical form and
// round-trips bit-exactly through parse_scm.

#include <string>

#include "cfrl/scm.hpp"

namespace cfrl {

Scm parse_scm(const std::string& text);
Scm load_scm(const std::string& path);

std::string print_scm(const Scm& scm);
void save_scm(const Scm& scm, const std::string& path);

}  // namespace cfrl

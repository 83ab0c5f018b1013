#pragma once

// Text forms: POMDP description files (same section grammar as model files;
// tabular observation models only) and policy tables with one
// `key action logit` row per entry. Both round-trip bit-exactly through
// their printers.

#include <string>

#include "cfrl/pomdp.hpp"

namespace cfrl {

PomdpSpec parse_pomdp(const std::string& text);
PomdpSpec load_pomdp(const std::string& path);
std::string print_pomdp(const PomdpSpec& pomdp);
void save_pomdp(const PomdpSpec& pomdp, const std::string& path);

TabularPolicy parse_policy(const std::string& text);
TabularPolicy load_policy(const std::string& path);
std::string print_policy(const TabularPolicy& policy);
void save_policy(const TabularPolicy& policy, const std::string& path);

}  // namespace cfrl

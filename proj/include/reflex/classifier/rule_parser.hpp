#pragma once

#include "reflex/classifier/ruleset.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace reflex::classify {

// ClassBench-style rule file, one rule per line:
//
//   @<sip>/<plen> <dip>/<plen> <sport_lo>:<sport_hi> <dport_lo>:<dport_hi> <proto>/<mask>
//       [<swid>|*] [<linkid>|*] [<qid>|*] [<dropreason>|*] [prio=<n>] [id=<n>]
//       [-> <monitor>[,<monitor>...] [{<field>[,<field>...]}]]
//
// Vanilla ClassBench lines (tabs, "lo : hi" spacing, a trailing flags/mask
// column) load unchanged: the extension fields default to wildcards and the
// action to "-> m0" with the full projection. Without prio=, a rule on the
// i-th rule line gets priority N - i so earlier lines win; without id=, its
// id is i.

inline constexpr std::string_view kDefaultMonitor = "m0";

std::shared_ptr<const RuleSet> parse_ruleset(std::string_view text, const Schema& schema = reflex_schema());
std::shared_ptr<const RuleSet> read_ruleset_file(const std::string& path, const Schema& schema = reflex_schema());

/// Inverse of the parser for rules whose IP fields are prefixes.
std::string format_rule(const Rule& rule, const Schema& schema = reflex_schema());
std::string format_ruleset(const RuleSet& ruleset);

}  // namespace reflex::classify

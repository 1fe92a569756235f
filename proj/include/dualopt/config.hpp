#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dualopt/runner.hpp"

namespace dualopt {

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

// key = value lines; '#' starts a comment, blank lines are skipped. Keys may
// carry dotted prefixes (adamw.beta1); only the last segment is meaningful.
ConfigEntries read_config_file(const std::string& path);

// A single "key=value" token (CLI override form).
std::pair<std::string, std::string> parse_config_entry(const std::string& arg);

// Builds a RunConfig from defaults plus the entries in order (later entries
// win). Unknown keys and malformed values are rejected with the offending
// key named.
RunConfig config_from_entries(const ConfigEntries& entries);

// Canonical flat key=value form of every field; parsing it back yields an
// identical config (floats printed with 17 significant digits).
ConfigEntries config_echo(const RunConfig& config);

std::string entries_to_text(const ConfigEntries& entries);

}  // namespace dualopt

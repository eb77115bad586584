#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace absnet::cli {

// Exit status: 0 ok, 1 usage error, 2 data error, 3 numerical abort.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Subcommand names in dispatch order.
std::vector<std::string> subcommands();

// Every long flag of every subcommand, as "<subcommand> --<flag>".
std::vector<std::string> declared_flags();

// Root --help text.
std::string help_text();

}  // namespace absnet::cli

#pragma once

#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stdn::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

struct CliInvocation {
  std::string subcommand;
  std::map<std::string, std::string> flags;  // every flag of the subcommand, defaults filled in
  std::vector<std::string> positionals;
};

// Thrown by parse_args. `code` is kOk for --help, kUsage otherwise; `text`
// is what should be printed (usage or the error message).
struct UsageError : std::runtime_error {
  UsageError(int code, std::string text) : std::runtime_error(text), code(code) {}
  int code;
};

enum class FlagKind { text, path, count, positive, real, list, condition, optimizer, preset, split, toggle };

struct FlagSpec {
  const char* name;  // without the leading dashes
  FlagKind kind;
  const char* default_value;  // "" with required = true means no default
  const char* help;
  bool required = false;
};

struct CommandSpec {
  const char* name;
  const char* help;
  std::vector<FlagSpec> flags;
};

const std::vector<CommandSpec>& command_table();

CliInvocation parse_args(const std::vector<std::string>& args);

// Runs a parsed invocation. Library errors become exit codes: bad flag
// values 1, unreadable or malformed data 2, non-finite numbers 3.
int dispatch(const CliInvocation& inv, std::ostream& out, std::ostream& err);

// parse_args + dispatch with messages printed; what main() calls.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stdn::cli

#pragma once

#include "config.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace critsense::cli {

struct RunContext {
    std::string command;
    json config;  // resolved
    std::filesystem::path out_dir;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    bool quick = false;
};

struct CommandOutput {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> warnings;
};

// Error kinds map to exit codes: usage, config and io give 2, compute gives 1.
class CliError : public std::runtime_error {
public:
    CliError(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return kind_ == "compute" ? 1 : 2; }

private:
    std::string kind_;
};

CommandOutput run_command(const RunContext& context);

// Full entry point: parses argv, runs, reports. Errors are one JSON line on err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace critsense::cli

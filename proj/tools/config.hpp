// JSON run configuration: one flat object per subcommand. Every key has a
// default; unknown keys are rejected.

#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace critsense::cli {

using json = nlohmann::ordered_json;

struct KeySpec {
    std::string name;
    std::string type;  // "int", "number", "bool", "string", "int[]", "number[]", "string[]", "object"
    json default_value;
    json quick_value;  // null when --quick keeps the default
    std::string help;
};

struct CommandSchema {
    std::string name;
    std::string summary;
    std::vector<KeySpec> keys;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const std::vector<CommandSchema>& schemas();
const CommandSchema& schema(const std::string& command);

// Defaults, then --quick overrides, then the user's values. Throws ConfigError on
// unknown keys or type mismatches.
json resolve_config(const std::string& command, const json& user, bool quick);

json load_config_file(const std::string& path);

// Table of keys for --help.
std::string keys_help(const std::string& command);

}  // namespace critsense::cli

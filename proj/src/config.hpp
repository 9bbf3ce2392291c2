#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace gcrl::config {

// Layered configuration tree. Values are scalars (bool/int/float/string),
// flat lists, or nested maps; keys are addressed with dot paths like
// "algorithm.weight_critic_var".
using ConfigTree = nlohmann::json;

// Command-line override: `key=value` replaces an existing key, `++key=value`
// adds a key that must not exist yet.
struct OverrideDirective {
    std::string path;
    ConfigTree value;
    bool add_mode = false;
};

// Parses the YAML subset used for configuration files: `key: value` scalars,
// nested maps by indentation, flat `- item` lists, `#` comments. Parse errors
// carry the 1-based line number.
ConfigTree parse_config(const std::string& text);
ConfigTree load_config_file(const std::filesystem::path& path);

// Serializes a tree back to the same subset; parse(serialize(t)) == t.
std::string serialize_config(const ConfigTree& tree);

// Scalar literal coercion: true/false -> bool, integer literal -> int,
// decimal literal -> float, [a, b] -> list, anything else -> string.
ConfigTree coerce_scalar(const std::string& literal);

// Deep merge: maps merge key-wise with `overlay` winning; any other value is
// replaced wholesale.
ConfigTree merge(const ConfigTree& base, const ConfigTree& overlay);

// Dot-path access. get_path throws ConfigError when the key is absent.
const ConfigTree* find_path(const ConfigTree& tree, const std::string& path);
const ConfigTree& get_path(const ConfigTree& tree, const std::string& path);
void set_path(ConfigTree& tree, const std::string& path, ConfigTree value);

// Algorithm defaults plus the optional algorithm@env overlay, from
// `<conf_dir>/algorithm/<name>.yaml` and `<conf_dir>/algorithm/<name>@<env>.yaml`.
ConfigTree load_defaults(const std::filesystem::path& conf_dir,
                         const std::string& algorithm_name,
                         const std::string& env_name);

// Parses `key=value` / `++key=value` command-line tokens.
OverrideDirective parse_directive(const std::string& token);
std::vector<OverrideDirective> parse_directives(const std::vector<std::string>& tokens);

// Applies directives left to right. Replace mode on a missing key and add
// mode on an existing key are both fatal ConfigErrors naming the key.
ConfigTree apply_overrides(const ConfigTree& tree,
                           const std::vector<OverrideDirective>& directives);

// Flattens the tree to (dot path, stringified value) pairs, used by the
// tracker's params/ directory.
std::vector<std::pair<std::string, std::string>> flatten(const ConfigTree& tree);

std::string value_to_string(const ConfigTree& value);

}  // namespace gcrl::config

#include "config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gcrl::config {

namespace {

struct Line {
    std::size_t indent = 0;
    std::string content;
    std::size_t number = 0;  // 1-based
};

[[noreturn]] void parse_fail(std::size_t line, const std::string& msg) {
    throw ConfigError("config parse error at line " + std::to_string(line) + ": " + msg);
}

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<Line> scan_lines(const std::string& text) {
    std::vector<Line> lines;
    std::istringstream in(text);
    std::string raw;
    std::size_t number = 0;
    while (std::getline(in, raw)) {
        ++number;
        // Strip comments: a '#' at the start of content or preceded by a space.
        std::size_t cut = std::string::npos;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] == '#' && (i == 0 || raw[i - 1] == ' ' || raw[i - 1] == '\t')) {
                cut = i;
                break;
            }
        }
        if (cut != std::string::npos) raw = raw.substr(0, cut);
        std::size_t indent = 0;
        while (indent < raw.size() && raw[indent] == ' ') ++indent;
        if (indent < raw.size() && raw[indent] == '\t') {
            parse_fail(number, "tab indentation is not supported");
        }
        std::string content = strip(raw);
        if (content.empty()) continue;
        lines.push_back({indent, content, number});
    }
    return lines;
}

bool is_int_literal(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

bool is_float_literal(const std::string& s) {
    if (s.empty()) return false;
    if (s.find_first_of(".eE") == std::string::npos) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

ConfigTree parse_block(const std::vector<Line>& lines, std::size_t& pos,
                       std::size_t indent);

ConfigTree parse_value(const std::string& value_text, const std::vector<Line>& lines,
                       std::size_t& pos, std::size_t parent_indent, std::size_t lineno) {
    if (!value_text.empty()) return coerce_scalar(value_text);
    // Block value: the following lines at deeper indentation.
    if (pos >= lines.size() || lines[pos].indent <= parent_indent) {
        parse_fail(lineno, "key has no value and no indented block follows");
    }
    return parse_block(lines, pos, lines[pos].indent);
}

ConfigTree parse_block(const std::vector<Line>& lines, std::size_t& pos,
                       std::size_t indent) {
    if (lines[pos].content[0] == '-') {
        ConfigTree list = ConfigTree::array();
        while (pos < lines.size() && lines[pos].indent == indent &&
               lines[pos].content[0] == '-') {
            const Line& ln = lines[pos];
            std::string item = strip(ln.content.substr(1));
            if (item.empty()) parse_fail(ln.number, "empty list item");
            ++pos;
            list.push_back(coerce_scalar(item));
        }
        if (pos < lines.size() && lines[pos].indent > indent) {
            parse_fail(lines[pos].number, "unexpected indentation after list");
        }
        return list;
    }
    ConfigTree map = ConfigTree::object();
    while (pos < lines.size() && lines[pos].indent == indent) {
        const Line& ln = lines[pos];
        std::size_t colon = ln.content.find(':');
        if (colon == std::string::npos) {
            parse_fail(ln.number, "expected 'key: value'");
        }
        std::string key = strip(ln.content.substr(0, colon));
        if (key.empty()) parse_fail(ln.number, "empty key");
        if (map.contains(key)) parse_fail(ln.number, "duplicate key '" + key + "'");
        std::string value_text = strip(ln.content.substr(colon + 1));
        ++pos;
        map[key] = parse_value(value_text, lines, pos, indent, ln.number);
    }
    if (pos < lines.size() && lines[pos].indent > indent) {
        parse_fail(lines[pos].number, "unexpected indentation");
    }
    return map;
}

std::string scalar_to_text(const ConfigTree& v) {
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
        std::string s(buf);
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
        return s;
    }
    if (v.is_string()) {
        const std::string& s = v.get_ref<const std::string&>();
        // Quote anything that would reparse as a different type or confuse
        // the grammar.
        bool needs_quotes = s.empty() || s == "true" || s == "false" ||
                            is_int_literal(s) || is_float_literal(s) ||
                            s.front() == '[' || s.front() == '-' ||
                            s.front() == '\'' || s.front() == '"' ||
                            s.find(':') != std::string::npos ||
                            s.find('#') != std::string::npos ||
                            s.front() == ' ' || s.back() == ' ';
        if (needs_quotes) return "'" + s + "'";
        return s;
    }
    throw ConfigError("cannot serialize value of this type as a scalar");
}

void serialize_node(const ConfigTree& node, std::size_t indent, std::string& out) {
    const std::string pad(indent, ' ');
    if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it) {
            const ConfigTree& v = it.value();
            if (v.is_object() && !v.empty()) {
                out += pad + it.key() + ":\n";
                serialize_node(v, indent + 2, out);
            } else if (v.is_array() && !v.empty()) {
                out += pad + it.key() + ":\n";
                for (const auto& item : v) {
                    out += pad + "  - " + scalar_to_text(item) + "\n";
                }
            } else if (v.is_object()) {
                out += pad + it.key() + ": {}\n";
            } else if (v.is_array()) {
                out += pad + it.key() + ": []\n";
            } else {
                out += pad + it.key() + ": " + scalar_to_text(v) + "\n";
            }
        }
    } else {
        throw ConfigError("top-level config must be a map");
    }
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(path);
    while (std::getline(in, part, '.')) {
        if (part.empty()) throw ConfigError("empty segment in key path '" + path + "'");
        parts.push_back(part);
    }
    if (parts.empty()) throw ConfigError("empty key path");
    return parts;
}

void flatten_into(const ConfigTree& node, const std::string& prefix,
                  std::vector<std::pair<std::string, std::string>>& out) {
    if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it) {
            const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
            flatten_into(it.value(), key, out);
        }
    } else {
        out.emplace_back(prefix, value_to_string(node));
    }
}

}  // namespace

ConfigTree coerce_scalar(const std::string& literal) {
    std::string s = strip(literal);
    if (s.size() >= 2 && ((s.front() == '\'' && s.back() == '\'') ||
                          (s.front() == '"' && s.back() == '"'))) {
        return ConfigTree(s.substr(1, s.size() - 2));
    }
    if (s == "true") return ConfigTree(true);
    if (s == "false") return ConfigTree(false);
    if (s == "{}") return ConfigTree::object();
    if (s == "[]") return ConfigTree::array();
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']') {
        ConfigTree list = ConfigTree::array();
        std::string inner = s.substr(1, s.size() - 2);
        std::istringstream in(inner);
        std::string item;
        while (std::getline(in, item, ',')) {
            list.push_back(coerce_scalar(item));
        }
        return list;
    }
    if (is_int_literal(s)) return ConfigTree(static_cast<std::int64_t>(std::stoll(s)));
    if (is_float_literal(s)) return ConfigTree(std::stod(s));
    return ConfigTree(s);
}

ConfigTree parse_config(const std::string& text) {
    std::vector<Line> lines = scan_lines(text);
    if (lines.empty()) return ConfigTree::object();
    if (lines[0].indent != 0) parse_fail(lines[0].number, "top level must not be indented");
    std::size_t pos = 0;
    ConfigTree tree = parse_block(lines, pos, 0);
    if (pos != lines.size()) parse_fail(lines[pos].number, "unexpected content");
    if (!tree.is_object()) {
        throw ConfigError("config parse error at line 1: top level must be a map");
    }
    return tree;
}

ConfigTree load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string serialize_config(const ConfigTree& tree) {
    std::string out;
    serialize_node(tree, 0, out);
    return out;
}

ConfigTree merge(const ConfigTree& base, const ConfigTree& overlay) {
    if (base.is_object() && overlay.is_object()) {
        ConfigTree out = base;
        for (auto it = overlay.begin(); it != overlay.end(); ++it) {
            if (out.contains(it.key())) {
                out[it.key()] = merge(out[it.key()], it.value());
            } else {
                out[it.key()] = it.value();
            }
        }
        return out;
    }
    return overlay;
}

const ConfigTree* find_path(const ConfigTree& tree, const std::string& path) {
    const ConfigTree* node = &tree;
    for (const auto& part : split_path(path)) {
        if (!node->is_object() || !node->contains(part)) return nullptr;
        node = &(*node)[part];
    }
    return node;
}

const ConfigTree& get_path(const ConfigTree& tree, const std::string& path) {
    const ConfigTree* node = find_path(tree, path);
    if (!node) throw ConfigError("unknown config key '" + path + "'");
    return *node;
}

void set_path(ConfigTree& tree, const std::string& path, ConfigTree value) {
    ConfigTree* node = &tree;
    auto parts = split_path(path);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object()) {
            (*node)[parts[i]] = ConfigTree::object();
        }
        node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = std::move(value);
}

ConfigTree load_defaults(const std::filesystem::path& conf_dir,
                         const std::string& algorithm_name,
                         const std::string& env_name) {
    const auto algo_dir = conf_dir / "algorithm";
    const auto algo_file = algo_dir / (algorithm_name + ".yaml");
    if (!std::filesystem::exists(algo_file)) {
        std::string msg = "unknown algorithm '" + algorithm_name + "'; valid choices:";
        if (std::filesystem::is_directory(algo_dir)) {
            for (const auto& entry : std::filesystem::directory_iterator(algo_dir)) {
                const std::string stem = entry.path().stem().string();
                if (entry.path().extension() == ".yaml" &&
                    stem.find('@') == std::string::npos) {
                    msg += " " + stem;
                }
            }
        }
        throw ConfigError(msg);
    }
    ConfigTree algo = load_config_file(algo_file);
    const auto overlay_file = algo_dir / (algorithm_name + "@" + env_name + ".yaml");
    if (std::filesystem::exists(overlay_file)) {
        algo = merge(algo, load_config_file(overlay_file));
    }
    return algo;
}

OverrideDirective parse_directive(const std::string& token) {
    OverrideDirective d;
    std::string body = token;
    if (body.rfind("++", 0) == 0) {
        d.add_mode = true;
        body = body.substr(2);
    }
    std::size_t eq = body.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("malformed override '" + token + "'; expected key=value");
    }
    d.path = body.substr(0, eq);
    d.value = coerce_scalar(body.substr(eq + 1));
    return d;
}

std::vector<OverrideDirective> parse_directives(const std::vector<std::string>& tokens) {
    std::vector<OverrideDirective> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(parse_directive(t));
    return out;
}

ConfigTree apply_overrides(const ConfigTree& tree,
                           const std::vector<OverrideDirective>& directives) {
    ConfigTree out = tree;
    for (const auto& d : directives) {
        const ConfigTree* existing = find_path(out, d.path);
        if (d.add_mode && existing) {
            throw ConfigError("key '" + d.path +
                              "' already exists; drop the ++ prefix to replace it");
        }
        if (!d.add_mode && !existing) {
            throw ConfigError("unknown config key '" + d.path +
                              "'; use ++" + d.path + "=... to add a new key");
        }
        set_path(out, d.path, d.value);
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> flatten(const ConfigTree& tree) {
    std::vector<std::pair<std::string, std::string>> out;
    flatten_into(tree, "", out);
    return out;
}

std::string value_to_string(const ConfigTree& value) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
    if (value.is_number_integer()) return std::to_string(value.get<std::int64_t>());
    // dump() prints the shortest representation that round-trips.
    if (value.is_number_float()) return value.dump();
    if (value.is_array()) {
        std::string s = "[";
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (i) s += ", ";
            s += value_to_string(value[i]);
        }
        return s + "]";
    }
    return value.dump();
}

}  // namespace gcrl::config

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qfg/errors.hpp"

namespace qfg::cli {

enum class FieldKind { Double, Int, Bool, String, List };

struct FieldSpec {
    std::string key;
    FieldKind kind = FieldKind::Double;
    std::string preset;  // default raw value
    std::string help;
};

using Schema = std::vector<FieldSpec>;

/// Flat key-value configuration parsed from an INI-style file: `key = value`
/// lines, optional `[section]` headers that prefix keys as `section.key`,
/// `#` comments.  Values are kept raw and parsed on access; validation
/// rejects unknown keys with the offending line number.
class ConfigMap {
public:
    static ConfigMap parse_file(const std::filesystem::path& path);
    static ConfigMap parse_text(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    /// Applies defaults from the schema and rejects unknown or ill-typed
    /// entries (ConfigError with the source line).
    void finalize(const Schema& schema);

    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::vector<double> get_list(const std::string& key) const;

    /// Canonical sorted `key = value` text of the resolved configuration.
    std::string canonical_text() const;

private:
    struct Entry {
        std::string raw;
        int line = 0;
    };
    std::map<std::string, Entry> entries_;
    const Entry& at(const std::string& key) const;
};

std::uint64_t fnv1a_hash(const std::string& text);
std::string hash_hex(const std::string& text);

/// Per-subcommand schemas (documented in --help output).
const Schema& simulate_schema();
const Schema& analyze_scheme_schema();
const Schema& solve_hjb_schema();
const Schema& exact_circle_schema();
const Schema& policy_eval_schema();
const Schema& two_atom_schema();

std::string describe(const Schema& schema);

/// Subcommand runners: parse + validate happened already; each writes its
/// artifacts (CSV data, one JSON summary, the resolved config) into out_dir
/// and returns 0.  Numerical failures propagate as exceptions.
int run_simulate(ConfigMap config, const std::filesystem::path& out_dir, int threads);
int run_analyze_scheme(ConfigMap config, const std::filesystem::path& out_dir, int threads);
int run_solve_hjb(ConfigMap config, const std::filesystem::path& out_dir, int threads);
int run_exact_circle(ConfigMap config, const std::filesystem::path& out_dir, int threads);
int run_policy_eval(ConfigMap config, const std::filesystem::path& out_dir, int threads);
int run_two_atom(ConfigMap config, const std::filesystem::path& out_dir, int threads);

}  // namespace qfg::cli

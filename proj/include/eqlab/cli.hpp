#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace eqlab {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum ExitCode : int { ExitOk = 0, ExitUnexpected = 1, ExitConfig = 2, ExitNumerical = 3, ExitIo = 4 };

// Flat `key=value` lines; blank lines and lines starting with `#` are skipped.
// Every lookup records the value it resolved to (defaults included), so the
// manifest can echo the full effective configuration.
class Config {
  public:
    static Config parse(std::istream& is);
    static Config load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string str(const std::string& key) const;
    std::string str(const std::string& key, const std::string& fallback) const;
    long long integer(const std::string& key) const;
    long long integer(const std::string& key, long long fallback) const;
    double real(const std::string& key) const;
    double real(const std::string& key, double fallback) const;
    bool flag(const std::string& key, bool fallback) const;

    // Keys present in the file that no experiment read.
    std::vector<std::string> unused() const;
    const std::map<std::string, std::string>& resolved() const { return resolved_; }

  private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> resolved_;
};

// Runs the experiment named by `experiment=` and writes its CSVs into `out`.
// Returns the written file names (manifest excluded).
std::vector<std::string> run_experiment(const Config& cfg, const std::filesystem::path& out);

// Writes manifest.txt: version, resolved configuration and output list.
void write_manifest(const Config& cfg, const std::filesystem::path& out, const std::vector<std::string>& files);

// The command line: --config PATH [--seed N] [--threads N] [--out DIR].
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace eqlab

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace carescope {

// Fatal problem inside a pipeline stage. The CLI prints "<stage>: <message>"
// and exits with a nonzero code.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Bad flags, unreadable config, missing inputs. CLI exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames, so readers never see partial content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
bool icontains(std::string_view haystack, std::string_view needle);
std::vector<std::string> split(std::string_view s, char sep);

// Shortest round-trip decimal rendering, for deterministic CSV output.
std::string format_double(double v);

// Minimal RFC-4180 CSV: quoted fields, escaped quotes, embedded separators
// and newlines. First record is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);
std::string csv_escape(std::string_view field);

}  // namespace carescope

#ifndef STRUCTOSCOPE_SRC_IO_UTIL_HPP
#define STRUCTOSCOPE_SRC_IO_UTIL_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace structoscope::detail {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Strict full-string double parse; throws DataError with `context` on failure.
double parse_double(std::string_view text, std::string_view context);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Version strings of the linked libraries, for the run manifest.
std::string crypto_library_version();
std::string toml_library_version(); // defined with the config parser

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);

/// Square matrix as CSV with `label` row/column headers. NaN entries are
/// written as "NA".
void write_square_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& labels,
                      const std::vector<double>& values);

} // namespace structoscope::detail

#endif

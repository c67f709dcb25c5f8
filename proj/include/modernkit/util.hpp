#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace modernkit::util {

namespace fs = std::filesystem;

bool is_valid_utf8(std::string_view bytes);
std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix);
std::vector<std::string> split_lines(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// UTC timestamp in ISO-8601 with millisecond precision, e.g. 2024-05-01T10:00:00.123Z.
std::string utc_now_iso();

/// Timestamp-plus-random identifier: `<prefix>-<yyyymmddThhmmss>-<6 hex>`.
std::string make_id(std::string_view prefix);

std::string read_file(const fs::path& path);

/// Replaces `from` with `to`. Swappable so tests can simulate a crash at the
/// commit point of an atomic write.
using RenameFn = std::function<void(const fs::path& from, const fs::path& to)>;

void default_rename(const fs::path& from, const fs::path& to);

/// Write-temp-then-rename. The temporary lives next to the target and is
/// removed if anything fails before the rename completes.
void atomic_write(const fs::path& target, std::string_view content, bool sync = true,
                  const RenameFn& rename = default_rename);

/// Appends one line (a trailing '\n' is added) with O_APPEND semantics.
void append_line(const fs::path& target, std::string_view line, bool sync = true);

}  // namespace modernkit::util

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vlmad {

std::string ReadFile(const std::filesystem::path& path);
// Writes atomically enough for our purposes: truncate then write.
void WriteFile(const std::filesystem::path& path, std::string_view content);
void AppendLine(const std::filesystem::path& path, std::string_view line);

std::string Trim(std::string_view s);
std::string ToLower(std::string_view s);
std::vector<std::string> SplitLines(std::string_view text);

// printf-style "%.<digits>f" formatting.
std::string FormatFixed(double value, int digits);

// Minimal leveled logging to stderr. 0 = warnings only, 1 = info, 2 = debug.
void SetVerbosity(int level);
int Verbosity();
void LogInfo(std::string_view msg);
void LogDebug(std::string_view msg);
void LogWarning(std::string_view msg);

}  // namespace vlmad

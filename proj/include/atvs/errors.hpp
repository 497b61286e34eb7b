#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace atvs {

/// Malformed input file. The message carries the file and, when known, the line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::filesystem::path& file, int line, const std::string& what)
      : std::runtime_error(file.string() + (line > 0 ? ":" + std::to_string(line) : "") + ": " +
                           what),
        file_(file),
        line_(line) {}

  const std::filesystem::path& file() const noexcept { return file_; }
  int line() const noexcept { return line_; }

 private:
  std::filesystem::path file_;
  int line_;
};

}  // namespace atvs

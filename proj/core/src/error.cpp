#include "stsreg/error.hpp"

#include <utility>

namespace stsreg {

namespace {

std::string format_parse_error(const std::string& path, std::size_t line, const std::string& what) {
  std::string msg = path;
  if (line > 0) {
    msg += ":" + std::to_string(line);
  }
  msg += ": " + what;
  return msg;
}

}  // namespace

ParseError::ParseError(std::string path, std::size_t line, const std::string& what)
    : Error(format_parse_error(path, line, what)), path_(std::move(path)), line_(line) {}

}  // namespace stsreg

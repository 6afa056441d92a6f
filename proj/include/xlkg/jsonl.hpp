#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

namespace xlkg {

using Json = nlohmann::json;

/// Streams a line-delimited JSON file. Blank lines are skipped and counted;
/// a line that is not a JSON object raises kParse naming the line number.
/// Returns the number of blank lines.
std::size_t for_each_json_line(
    const std::filesystem::path& path,
    const std::function<void(const Json& record, std::size_t line_no)>& fn);

/// Line-delimited JSON writer; throws kIo on open or write failure.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path);
  void write(const Json& record);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Field accessors that throw kParse with the line number on type errors.
const std::string& require_string(const Json& record, const char* key,
                                  std::size_t line_no);

[[noreturn]] void throw_parse_error(const std::filesystem::path& path,
                                    std::size_t line_no,
                                    const std::string& what);

}  // namespace xlkg

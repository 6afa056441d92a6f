#include "xlkg/jsonl.hpp"

#include "xlkg/error.hpp"
#include "xlkg/text.hpp"

namespace xlkg {

std::size_t for_each_json_line(
    const std::filesystem::path& path,
    const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  std::size_t blank = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) {
      ++blank;
      continue;
    }
    Json record = Json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (record.is_discarded() || !record.is_object()) {
      throw_parse_error(path, line_no, "not a JSON object");
    }
    try {
      fn(record, line_no);
    } catch (const Json::exception& e) {
      throw_parse_error(path, line_no, e.what());
    } catch (const Error& e) {
      // Field accessors only know the line; add the file name.
      const std::string what = e.what();
      const std::string prefix = "line " + std::to_string(line_no) + ": ";
      if (e.code() != ErrorCode::kParse || what.rfind(prefix, 0) != 0) throw;
      throw_parse_error(path, line_no, what.substr(prefix.size()));
    }
  }
  return blank;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

void JsonlWriter::write(const Json& record) {
  out_ << record.dump() << '\n';
  if (!out_) throw Error(ErrorCode::kIo, "write failed: " + path_.string());
}

void JsonlWriter::close() {
  out_.close();
  if (out_.fail()) throw Error(ErrorCode::kIo, "close failed: " + path_.string());
}

const std::string& require_string(const Json& record, const char* key,
                                  std::size_t line_no) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                       ": missing string field '" + key + "'");
  }
  return it->get_ref<const std::string&>();
}

void throw_parse_error(const std::filesystem::path& path, std::size_t line_no,
                       const std::string& what) {
  throw Error(ErrorCode::kParse, path.filename().string() + ":" +
                                     std::to_string(line_no) + ": " + what);
}

}  // namespace xlkg

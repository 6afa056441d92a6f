#include "xlkg/binary_io.hpp"

#include <array>
#include <bit>

#include "xlkg/error.hpp"

namespace xlkg::binary {

namespace {

template <std::size_t N>
void put(std::ostream& out, std::uint64_t v) {
  std::array<char, N> buf;
  for (std::size_t i = 0; i < N; ++i) {
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(buf.data(), N);
  if (!out) throw Error(ErrorCode::kIo, "binary write failed");
}

template <std::size_t N>
std::uint64_t get(std::istream& in) {
  std::array<unsigned char, N> buf;
  in.read(reinterpret_cast<char*>(buf.data()), N);
  if (in.gcount() != static_cast<std::streamsize>(N)) {
    throw Error(ErrorCode::kParse, "unexpected end of binary file");
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < N; ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return v;
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { put<4>(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { put<8>(out, v); }
void write_f32(std::ostream& out, float v) {
  put<4>(out, std::bit_cast<std::uint32_t>(v));
}
void write_f64(std::ostream& out, double v) {
  put<8>(out, std::bit_cast<std::uint64_t>(v));
}
void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw Error(ErrorCode::kIo, "binary write failed");
}

std::uint32_t read_u32(std::istream& in) {
  return static_cast<std::uint32_t>(get<4>(in));
}
std::uint64_t read_u64(std::istream& in) { return get<8>(in); }
float read_f32(std::istream& in) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(get<4>(in)));
}
double read_f64(std::istream& in) {
  return std::bit_cast<double>(static_cast<std::uint64_t>(get<8>(in)));
}
std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n)) {
    throw Error(ErrorCode::kParse, "unexpected end of binary file");
  }
  return s;
}

}  // namespace xlkg::binary

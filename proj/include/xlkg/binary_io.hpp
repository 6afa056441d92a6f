#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace xlkg::binary {

// Little-endian fixed-width encoding, independent of host byte order.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f32(std::ostream& out, float v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, const std::string& s);

std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
float read_f32(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in);

}  // namespace xlkg::binary

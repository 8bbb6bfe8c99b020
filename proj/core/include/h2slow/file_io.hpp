#pragma once

#include <string>
#include <string_view>

#include "h2slow/bytes.hpp"

namespace h2slow {

// Writes to "<path>.tmp" and renames over `path`. Throws Error on failure.
void write_file_atomic(const std::string& path, std::string_view contents);
void write_file_atomic(const std::string& path, ByteView contents);

// Throws UnreadableInput.
std::string read_text_file(const std::string& path);

}  // namespace h2slow

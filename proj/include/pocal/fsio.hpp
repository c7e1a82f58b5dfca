#pragma once

#include <string>

namespace pocal {

// Write content to path through a temp file in the same directory plus an
// atomic rename, so readers never observe a partially written file.
void write_text_atomic(const std::string& path, const std::string& content);

std::string read_text_file(const std::string& path);

}  // namespace pocal

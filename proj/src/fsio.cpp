#include "pocal/fsio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace pocal {

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  std::random_device rd;
  std::ostringstream tmp_name;
  tmp_name << target.filename().string() << ".tmp" << std::hex << rd();
  const fs::path tmp = target.has_parent_path()
                           ? target.parent_path() / tmp_name.str()
                           : fs::path(tmp_name.str());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::remove(tmp.string().c_str());
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::remove(tmp.string().c_str());
    throw std::runtime_error("rename failed for " + path + ": " + ec.message());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace pocal

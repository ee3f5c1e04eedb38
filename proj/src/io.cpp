#include "lrw/io.hpp"

#include <fstream>
#include <sstream>

#include "lrw/error.hpp"

namespace lrw {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    os << content;
    os.flush();
    if (!os) throw Error("write to " + tmp.string() + " failed");
  }
  fs::rename(tmp, path);
}

void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& fill) {
  std::ostringstream buf;
  fill(buf);
  write_atomic(path, buf.str());
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_atomic(path, doc.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingDependencyError("missing " + path.string());
  nlohmann::json doc = nlohmann::json::parse(is, nullptr, false);
  if (doc.is_discarded()) throw ConfigError(path.string() + " is not valid JSON");
  return doc;
}

}  // namespace lrw

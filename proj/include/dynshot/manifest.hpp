#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dynshot {

// Flat "key=value" text file echoing every setting of a run, one per line,
// in insertion order.
class RunManifest {
 public:
  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;
  const std::string& require(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string to_string() const;
  static RunManifest parse(const std::string& text);
  void write(const std::filesystem::path& path) const;
  static RunManifest read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace dynshot

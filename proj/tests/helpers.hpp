#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "general/data.hpp"
#include "general/rng.hpp"

#define CHECK_ERRC(expr, errc)                                  \
  do {                                                         \
    try {                                                      \
      (void)(expr);                                            \
      FAIL_CHECK("expected " #errc);                           \
    } catch (const general::Error& e_) {                       \
      CHECK_MESSAGE(e_.code() == (errc), e_.what());           \
    }                                                          \
  } while (0)

namespace testing {

inline general::ProjectTable make_table(const std::string& id, const std::vector<std::vector<double>>& rows,
                                        const std::vector<double>& labels, std::vector<double> effort = {},
                                        general::Task task = general::Task::classification) {
  general::ProjectTable t;
  t.project_id = id;
  t.schema.task = task;
  for (std::size_t f = 0; f < rows.front().size(); ++f) t.schema.feature_names.push_back("f" + std::to_string(f));
  t.schema.label_name = "y";
  if (!effort.empty()) t.schema.effort_name = "loc";
  for (const auto& r : rows) t.rows.push_row(r);
  t.labels = labels;
  t.effort = std::move(effort);
  for (std::size_t i = 0; i < rows.size(); ++i) t.row_ids.push_back(i);
  return t;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("general_test_" + tag + "_" + std::to_string(general::fnv1a(tag) ^ reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing

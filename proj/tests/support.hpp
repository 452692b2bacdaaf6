#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "llmfs/data_pipeline.hpp"

namespace testing_support {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("llmfs_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline llmfs::Dataset make_dataset(std::vector<std::string> names, const std::vector<std::vector<double>>& rows,
                                   std::vector<std::string> labels) {
  llmfs::Dataset d;
  d.feature_names = std::move(names);
  d.matrix = llmfs::Matrix(rows.size(), d.feature_names.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < d.feature_names.size(); ++c) d.matrix(r, c) = rows[r][c];
  }
  d.labels = std::move(labels);
  d.refresh_classes();
  d.validate();
  return d;
}

/// Gaussian blobs: class k is centred at k * separation on every axis.
inline llmfs::Dataset blobs(std::size_t per_class, std::size_t classes, std::size_t dims, double separation,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < dims; ++j) names.push_back("x" + std::to_string(j));
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::vector<double> row(dims);
      for (auto& v : row) v = static_cast<double>(k) * separation + noise(rng);
      rows.push_back(row);
      labels.push_back("c" + std::to_string(k));
    }
  }
  return make_dataset(names, rows, labels);
}

/// Random feature table with labels drawn from `classes` names.
inline llmfs::Dataset random_dataset(std::size_t n, std::size_t dims, const std::vector<std::string>& classes,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, classes.size() - 1);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < dims; ++j) names.push_back("f" + std::to_string(j));
  std::vector<std::vector<double>> rows(n, std::vector<double>(dims));
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : rows[i]) v = noise(rng);
    labels.push_back(classes[i < classes.size() ? i : pick(rng)]);
  }
  return make_dataset(names, rows, labels);
}

}  // namespace testing_support

#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "toolpose/camera.hpp"
#include "toolpose/error.hpp"
#include "toolpose/random.hpp"

namespace testing {

using namespace toolpose;

// Uniform rotation from a normalized Gaussian quaternion.
inline Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(normal01(rng), normal01(rng), normal01(rng), normal01(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Vec3 random_unit(Rng& rng) {
  Vec3 v(normal01(rng), normal01(rng), normal01(rng));
  return v.normalized();
}

inline Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }
inline Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }

inline double max_abs(const Mat3& a, const Mat3& b) { return (a - b).cwiseAbs().maxCoeff(); }

template <typename F>
ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  throw std::runtime_error("expected toolpose::Error");
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("toolpose_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

/// True when both trees hold the same relative paths with identical bytes.
inline bool trees_identical(const std::filesystem::path& a, const std::filesystem::path& b,
                            std::string* first_diff = nullptr) {
  namespace fs = std::filesystem;
  auto collect = [](const fs::path& root) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root).generic_string());
    std::sort(files.begin(), files.end());
    return files;
  };
  const auto fa = collect(a);
  const auto fb = collect(b);
  if (fa != fb) {
    if (first_diff) *first_diff = "file lists differ";
    return false;
  }
  for (const auto& f : fa) {
    if (slurp(a / f) != slurp(b / f)) {
      if (first_diff) *first_diff = f;
      return false;
    }
  }
  return true;
}

}  // namespace testing

#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "adviser/catalog.hpp"

namespace testing {

inline std::string data_path(const std::string& rel) { return std::string(ADVISER_DATA_DIR) + "/" + rel; }

inline const adviser::catalog::CatalogSnapshot& fixture_catalog() {
  static const auto snap = adviser::catalog::load_catalog_file(data_path("catalog_fixture.json"));
  return snap;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("adviser-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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

 private:
  std::filesystem::path path_;
};

inline adviser::catalog::InstanceType make_instance(std::string provider, std::string name, int vcpus,
                                                    double mem, int gpus, double price,
                                                    adviser::catalog::FamilyClass fc =
                                                        adviser::catalog::FamilyClass::general,
                                                    std::string region = "r1") {
  adviser::catalog::InstanceType t;
  t.provider = std::move(provider);
  t.region = std::move(region);
  t.name = std::move(name);
  t.vcpus = vcpus;
  t.memory_gib = mem;
  t.gpus = gpus;
  if (gpus > 0) t.gpu_model = "X";
  t.network_gbps = 10;
  t.price_per_hour = adviser::Money::from_dollars(price);
  t.family_class = fc;
  return t;
}

}  // namespace testing

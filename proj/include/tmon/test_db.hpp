#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tmon/imaging.hpp"
#include "tmon/monitor.hpp"
#include "tmon/scoring.hpp"

namespace tmon {

/// Reference map file ("FMAP1", u32 H, u32 W, H*W float32 row-major).
std::vector<std::uint8_t> serialize_map(const AnomalyMap& map);
/// Cells are returned as float32 bit patterns widened to double.
AnomalyMap parse_map(std::span<const std::uint8_t> bytes);

struct TestCase {
  std::string id;
  std::string telltale_id;
  /// ROI-sized crop; good and corrupted crops are both valid test inputs.
  Image crop;
  std::size_t bank = 0;
  std::size_t model = 0;
};

struct TestEntry {
  std::string test_id;
  std::string telltale_id;
  std::size_t bank = 0;
  std::size_t model = 0;
  std::string image_file;
  std::string map_file;
  std::uint32_t image_crc32 = 0;
  std::uint32_t map_crc32 = 0;
};

struct TestDb {
  std::filesystem::path root;
  std::vector<TestEntry> entries;

  [[nodiscard]] const TestEntry& find(const std::string& test_id) const;
};

/// Computes reference maps through the monitor's current scoring stage and
/// writes `<root>/<id>.png`, `<root>/<id>.fmap` and `<root>/manifest.csv`
/// (test_id,telltale_id,bank,model,image_file,map_file,image_crc32,map_crc32).
TestDb build_test_db(const Monitor& monitor, const std::filesystem::path& root,
                     std::span<const TestCase> cases);
TestDb load_test_db(const std::filesystem::path& root);

struct TestResult {
  std::string test_id;
  bool pass = false;
  /// (y, x) of the first differing cell in row-major order.
  std::optional<std::pair<int, int>> first_diff;
  bool passed_first_attempt = false;
  bool reset_performed = false;
};

/// Anomaly map of a stored crop through the live scoring stage.
AnomalyMap test_map(const Monitor& monitor, const TestEntry& entry, const Image& crop);

/// Compares the live map against the stored reference bit for bit (float32
/// patterns). On a mismatch the scoring stage is reset and the comparison
/// repeated once; the second outcome is reported. Throws DataError when a
/// file fails its checksum and ValidationError for unknown ids.
TestResult run_test_mode(Monitor& monitor, const TestDb& db, const std::string& test_id);

/// First cell whose float32 bit patterns differ, if any.
std::optional<std::pair<int, int>> first_difference(const AnomalyMap& a, const AnomalyMap& b);

}  // namespace tmon

#include "tmon/test_db.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "tmon/error.hpp"
#include "tmon/png_io.hpp"

namespace tmon {

namespace {

constexpr std::string_view kMapMagic = "FMAP1";
constexpr const char* kDbHeader =
    "test_id,telltale_id,bank,model,image_file,map_file,image_crc32,map_crc32";

std::uint32_t crc_of(std::span<const std::uint8_t> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < data.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(data.size() - pos, 1u << 30));
    crc = crc32(crc, data.data() + pos, n);
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> checked_read(const std::filesystem::path& path, std::uint32_t crc) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = io::read_file(path);
  } catch (const IoError& e) {
    throw DataError(std::string("test db: ") + e.what());
  }
  if (crc_of(bytes) != crc) throw DataError("test db: checksum mismatch for " + path.string());
  return bytes;
}

bool valid_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

std::vector<std::uint8_t> serialize_map(const AnomalyMap& map) {
  io::Writer w;
  w.bytes(kMapMagic);
  w.u32(static_cast<std::uint32_t>(map.height()));
  w.u32(static_cast<std::uint32_t>(map.width()));
  w.f32s_from(map.cells());
  return w.take();
}

AnomalyMap parse_map(std::span<const std::uint8_t> bytes) {
  io::Reader r(bytes, "reference map");
  r.expect_magic(kMapMagic);
  const auto h = r.u32();
  const auto w = r.u32();
  if (h == 0 || w == 0 || h > 1u << 12 || w > 1u << 12) {
    throw FormatError("reference map: implausible size");
  }
  const auto vals = r.f32s(static_cast<std::size_t>(h) * w);
  r.expect_end();
  return AnomalyMap(static_cast<int>(h), static_cast<int>(w),
                    std::vector<double>(vals.begin(), vals.end()));
}

const TestEntry& TestDb::find(const std::string& test_id) const {
  for (const auto& e : entries) {
    if (e.test_id == test_id) return e;
  }
  throw ValidationError("unknown test id '" + test_id + "'");
}

AnomalyMap test_map(const Monitor& monitor, const TestEntry& entry, const Image& crop) {
  const std::size_t t = monitor.telltale_index(entry.telltale_id);
  return monitor.stage(t, entry.bank).map(monitor.crop_features(t, crop), entry.model);
}

std::optional<std::pair<int, int>> first_difference(const AnomalyMap& a, const AnomalyMap& b) {
  if (a.height() != b.height() || a.width() != b.width()) return std::pair{0, 0};
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (std::bit_cast<std::uint32_t>(static_cast<float>(a.at(y, x))) !=
          std::bit_cast<std::uint32_t>(static_cast<float>(b.at(y, x)))) {
        return std::pair{y, x};
      }
    }
  }
  return std::nullopt;
}

TestDb build_test_db(const Monitor& monitor, const std::filesystem::path& root,
                     std::span<const TestCase> cases) {
  std::filesystem::create_directories(root);
  TestDb db{root, {}};
  for (const auto& c : cases) {
    if (!valid_id(c.id)) throw ValidationError("test id '" + c.id + "' is not a plain file name");
    for (const auto& e : db.entries) {
      if (e.test_id == c.id) throw ValidationError("duplicate test id '" + c.id + "'");
    }
    TestEntry e{c.id, c.telltale_id, c.bank, c.model, c.id + ".png", c.id + ".fmap", 0, 0};
    const std::size_t t = monitor.telltale_index(c.telltale_id);
    if (c.bank >= monitor.bank_count(t) || c.model >= monitor.stage(t, c.bank).bank.size()) {
      throw ValidationError("test '" + c.id + "' names a missing PCA model");
    }
    write_png(root / e.image_file, c.crop);
    // The reference is computed from the decoded file so that build and
    // replay see the same pixels.
    const auto image_bytes = io::read_file(root / e.image_file);
    const auto map_bytes = serialize_map(test_map(monitor, e, read_png(root / e.image_file)));
    io::write_file(root / e.map_file, map_bytes);
    e.image_crc32 = crc_of(image_bytes);
    e.map_crc32 = crc_of(map_bytes);
    db.entries.push_back(std::move(e));
  }
  std::ofstream out(root / "manifest.csv");
  if (!out) throw IoError("cannot write test db manifest in " + root.string());
  out << kDbHeader << '\n';
  for (const auto& e : db.entries) {
    out << e.test_id << ',' << e.telltale_id << ',' << e.bank << ',' << e.model << ','
        << e.image_file << ',' << e.map_file << ',' << e.image_crc32 << ',' << e.map_crc32 << '\n';
  }
  return db;
}

TestDb load_test_db(const std::filesystem::path& root) {
  std::ifstream in(root / "manifest.csv");
  if (!in) throw DataError("test db: no manifest in " + root.string());
  std::string line;
  if (!std::getline(in, line) || line != kDbHeader) throw DataError("test db: bad manifest header");
  TestDb db{root, {}};
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string s; std::getline(ls, s, ',');) f.push_back(s);
    if (f.size() != 8) {
      throw DataError("test db manifest line " + std::to_string(lineno) + ": expected 8 fields");
    }
    try {
      db.entries.push_back({f[0], f[1], std::stoul(f[2]), std::stoul(f[3]), f[4], f[5],
                            static_cast<std::uint32_t>(std::stoul(f[6])),
                            static_cast<std::uint32_t>(std::stoul(f[7]))});
    } catch (const std::logic_error&) {
      throw DataError("test db manifest line " + std::to_string(lineno) + ": bad number");
    }
  }
  return db;
}

TestResult run_test_mode(Monitor& monitor, const TestDb& db, const std::string& test_id) {
  const TestEntry& e = db.find(test_id);
  (void)checked_read(db.root / e.image_file, e.image_crc32);
  const AnomalyMap reference = parse_map(checked_read(db.root / e.map_file, e.map_crc32));
  const Image crop = read_png(db.root / e.image_file);

  TestResult r{test_id, false, std::nullopt, false, false};
  r.first_diff = first_difference(test_map(monitor, e, crop), reference);
  if (!r.first_diff) {
    r.pass = r.passed_first_attempt = true;
    return r;
  }
  monitor.reset_scoring_stage();
  r.reset_performed = true;
  r.first_diff = first_difference(test_map(monitor, e, crop), reference);
  r.pass = !r.first_diff;
  return r;
}

}  // namespace tmon

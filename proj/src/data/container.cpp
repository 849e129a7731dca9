#include "stdn/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_set>

#include "stdn/error.hpp"

namespace stdn {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw TruncatedFileError("container truncated: need " + std::to_string(n) + " bytes at offset " +
                               std::to_string(pos_) + ", " + std::to_string(remaining()) + " left");
    }
  }

 private:
  std::uint64_t le(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

void check_name(const std::string& name) {
  if (name.empty()) throw ContractError("container entry names must not be empty");
  if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ContractError("container entry name too long: " + name.substr(0, 32) + "...");
  }
  for (unsigned char c : name) {
    if (c >= 0x80) throw ContractError("container entry name is not ASCII: " + name);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_container(const std::vector<StoredTensor>& entries) {
  if (entries.size() > std::numeric_limits<std::uint32_t>::max()) throw ContractError("too many container entries");
  std::unordered_set<std::string> seen;
  Writer w;
  w.raw(kContainerMagic, 4);
  w.u16(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    check_name(e.name);
    if (!seen.insert(e.name).second) throw DuplicateNameError("duplicate container entry name: " + e.name);
    if (e.shape.size() > std::numeric_limits<std::uint8_t>::max()) throw ContractError("rank too large: " + e.name);
    const std::size_t count = std::visit([](const auto& v) { return v.size(); }, e.values);
    if (count != shape_numel(e.shape)) {
      throw DimensionError("entry " + e.name + " has " + std::to_string(count) + " values for shape " +
                           shape_string(e.shape));
    }
    w.u16(static_cast<std::uint16_t>(e.name.size()));
    w.raw(e.name.data(), e.name.size());
    w.u8(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) w.u64(d);
    w.u8(static_cast<std::uint8_t>(e.dtype()));
    if (const auto* f = std::get_if<std::vector<float>>(&e.values)) {
      for (float v : *f) w.u32(std::bit_cast<std::uint32_t>(v));
    } else {
      for (double v : std::get<std::vector<double>>(e.values)) w.u64(std::bit_cast<std::uint64_t>(v));
    }
  }
  return w.take();
}

std::vector<StoredTensor> decode_container(const std::vector<std::uint8_t>& bytes) {
  const std::size_t probe = std::min<std::size_t>(bytes.size(), 4);
  if (std::memcmp(bytes.data(), kContainerMagic, probe) != 0) {
    throw MagicMismatchError("not a container file (bad magic)");
  }
  Reader r(bytes);
  if (bytes.size() < 4) r.need(4);
  r.str(4);
  const std::uint16_t version = r.u16();
  if (version != kContainerVersion) {
    throw FormatError("unsupported container version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<StoredTensor> out;
  std::unordered_set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor e;
    e.name = r.str(r.u16());
    if (!seen.insert(e.name).second) throw DuplicateNameError("duplicate container entry name: " + e.name);
    const std::uint8_t rank = r.u8();
    std::uint64_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = r.u64();
      if (dim == 0) throw FormatError("entry " + e.name + " has a zero dimension");
      if (numel > std::numeric_limits<std::uint64_t>::max() / dim) throw FormatError("entry " + e.name + " too large");
      numel *= dim;
      e.shape.push_back(static_cast<std::size_t>(dim));
    }
    const std::uint8_t dtype = r.u8();
    if (dtype == static_cast<std::uint8_t>(DType::f32)) {
      if (numel > r.remaining() / 4) r.need(std::numeric_limits<std::size_t>::max());
      std::vector<float> v(numel);
      for (auto& x : v) x = std::bit_cast<float>(r.u32());
      e.values = std::move(v);
    } else if (dtype == static_cast<std::uint8_t>(DType::f64)) {
      if (numel > r.remaining() / 8) r.need(std::numeric_limits<std::size_t>::max());
      std::vector<double> v(numel);
      for (auto& x : v) x = std::bit_cast<double>(r.u64());
      e.values = std::move(v);
    } else {
      throw FormatError("entry " + e.name + " has unknown dtype tag " + std::to_string(dtype));
    }
    out.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw FormatError(std::to_string(r.remaining()) + " trailing bytes after last entry");
  return out;
}

void write_container(const std::filesystem::path& path, const std::vector<StoredTensor>& entries) {
  const auto bytes = encode_container(entries);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<StoredTensor> read_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (is.bad()) throw IoError("failed reading " + path.string());
  return decode_container(bytes);
}

const StoredTensor* find_entry(const std::vector<StoredTensor>& entries, const std::string& name) {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

}  // namespace stdn

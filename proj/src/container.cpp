#include "readmem/container.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace readmem {
namespace {

static_assert(std::numeric_limits<float>::is_iec559, "container stores IEEE-754 binary32");

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFFu));
  out.push_back(static_cast<char>((v >> 8) & 0xFFu));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<char>((v >> shift) & 0xFFu));
}

template <typename Derived>
void put_matrix(std::string& out, const Eigen::MatrixBase<Derived>& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
    }
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint16_t u16() {
    const std::uint16_t lo = u8();
    const std::uint16_t hi = u8();
    return static_cast<std::uint16_t>(lo | (hi << 8));
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int shift = 0; shift < 32; shift += 8) v |= static_cast<std::uint32_t>(u8()) << shift;
    return v;
  }
  Matrix<double> matrix(Index rows, Index cols) {
    need(static_cast<std::size_t>(rows * cols) * 4);
    Matrix<double> m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<double>(std::bit_cast<float>(u32()));
    }
    return m;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ContainerError("stream container: truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

Key load_key(Reader& in, const ShapeSpec& shape, std::int64_t frame) {
  try {
    return normalize_key(Key(in.matrix(shape.channels_key, shape.spatial), shape, frame));
  } catch (const ContainerError&) {
    throw;
  } catch (const Error& e) {
    throw ContainerError("stream container: frame " + std::to_string(frame) + ": " + e.what());
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::size_t container_size(const ShapeSpec& shape, bool aliased, std::size_t frame_count) {
  const auto key = static_cast<std::size_t>(shape.channels_key * shape.spatial) * 4;
  const auto value = static_cast<std::size_t>(shape.channels_value * shape.spatial) * 4;
  const std::size_t per_frame = key + (aliased ? 0 : key + value) + 1;
  return kContainerHeaderBytes + frame_count * per_frame;
}

std::string encode_stream(const ShapeSpec& shape, bool aliased, const std::vector<FrameRecord>& frames) {
  shape.validate();
  std::string out;
  out.reserve(container_size(shape, aliased, frames.size()));
  out.append(kContainerMagic, sizeof kContainerMagic);
  put_u16(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(shape.channels_key));
  put_u32(out, static_cast<std::uint32_t>(shape.channels_value));
  put_u32(out, static_cast<std::uint32_t>(shape.spatial));
  put_u32(out, static_cast<std::uint32_t>(frames.size()));
  put_u32(out, aliased ? kFlagAliased : 0u);
  for (const FrameRecord& f : frames) {
    if (!(f.query_key.shape() == shape)) throw ShapeError("encode_stream: frame shape mismatch");
    put_matrix(out, f.query_key.data());
    if (!aliased) {
      put_matrix(out, f.qm_key.data());
      put_matrix(out, f.qm_value.data());
    }
    out.push_back(static_cast<char>(f.ground_truth_present ? 1 : 0));
  }
  return out;
}

StreamFile decode_stream(const std::string& bytes) {
  Reader in(bytes);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(in.u8());
  if (std::memcmp(magic, kContainerMagic, sizeof magic) != 0) {
    throw ContainerError("stream container: bad magic");
  }
  const std::uint16_t version = in.u16();
  if (version != kContainerVersion) {
    throw ContainerError("stream container: unsupported version " + std::to_string(version));
  }
  StreamFile file;
  file.shape.channels_key = in.u32();
  file.shape.channels_value = in.u32();
  file.shape.spatial = in.u32();
  const std::uint32_t count = in.u32();
  const std::uint32_t flags = in.u32();
  try {
    file.shape.validate();
  } catch (const ShapeError& e) {
    throw ContainerError(std::string("stream container: ") + e.what());
  }
  if ((flags & ~kFlagAliased) != 0) throw ContainerError("stream container: unknown flag bits");
  file.aliased = (flags & kFlagAliased) != 0;
  if (bytes.size() != container_size(file.shape, file.aliased, count)) {
    throw ContainerError("stream container: size does not match header");
  }

  file.frames.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto frame = static_cast<std::int64_t>(t);
    Key query = load_key(in, file.shape, frame);
    if (file.aliased) {
      Value value = derive_value(query, file.shape);
      Key qm = query;
      const bool present = in.u8() != 0;
      file.frames.push_back(FrameRecord{frame, std::move(query), std::move(qm), std::move(value), present});
      continue;
    }
    Key qm = load_key(in, file.shape, frame);
    Matrix<double> raw_value = in.matrix(file.shape.channels_value, file.shape.spatial);
    if (!raw_value.allFinite()) throw ContainerError("stream container: non-finite value entry");
    Value value(std::move(raw_value), file.shape, frame);
    const bool present = in.u8() != 0;
    file.frames.push_back(FrameRecord{frame, std::move(query), std::move(qm), std::move(value), present});
  }
  if (!in.at_end()) throw ContainerError("stream container: trailing bytes");
  return file;
}

std::string manifest_text(const StreamSpec& spec) {
  std::string regimes;
  for (Regime r : spec.regimes) {
    if (!regimes.empty()) regimes += ',';
    regimes += to_string(r);
  }
  std::ostringstream os;
  os << "format=RMEM\n"
     << "version=" << kContainerVersion << '\n'
     << "channels_key=" << spec.shape.channels_key << '\n'
     << "channels_value=" << spec.shape.channels_value << '\n'
     << "spatial=" << spec.shape.spatial << '\n'
     << "length=" << spec.length << '\n'
     << "regimes=" << regimes << '\n'
     << "drift_rate=" << format_double(spec.drift_rate) << '\n'
     << "shift_period=" << spec.shift_period << '\n'
     << "area_min=" << format_double(spec.area_min) << '\n'
     << "area_max=" << format_double(spec.area_max) << '\n'
     << "distractor_start=" << spec.distractor_start << '\n'
     << "distractor_end=" << spec.distractor_end << '\n'
     << "foreground_fraction=" << format_double(spec.foreground_fraction) << '\n'
     << "noise_sigma=" << format_double(spec.noise_sigma) << '\n'
     << "seed=" << spec.seed << '\n'
     << "aliased=" << (spec.aliased ? 1 : 0) << '\n';
  return os.str();
}

StreamSpec parse_manifest(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("manifest: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("manifest: missing key '" + key + "'");
    return it->second;
  };
  auto num = [&](const std::string& key) { return std::stod(get(key)); };
  auto integer = [&](const std::string& key) { return static_cast<Index>(std::stoll(get(key))); };

  StreamSpec spec;
  spec.shape = {integer("channels_key"), integer("channels_value"), integer("spatial")};
  spec.length = integer("length");
  spec.regimes.clear();
  std::istringstream regimes(get("regimes"));
  for (std::string r; std::getline(regimes, r, ',');) spec.regimes.push_back(parse_regime(r));
  spec.drift_rate = num("drift_rate");
  spec.shift_period = integer("shift_period");
  spec.area_min = num("area_min");
  spec.area_max = num("area_max");
  spec.distractor_start = integer("distractor_start");
  spec.distractor_end = integer("distractor_end");
  spec.foreground_fraction = num("foreground_fraction");
  spec.noise_sigma = num("noise_sigma");
  spec.seed = std::stoull(get("seed"));
  spec.aliased = get("aliased") == "1";
  return spec;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path manifest_path(const std::filesystem::path& stream_path) {
  std::filesystem::path p = stream_path;
  p += ".manifest";
  return p;
}

void write_stream_file(const std::filesystem::path& path, const StreamSpec& spec,
                       const std::vector<FrameRecord>& frames) {
  write_file_atomic(path, encode_stream(spec.shape, spec.aliased, frames));
  write_file_atomic(manifest_path(path), manifest_text(spec));
}

StreamFile read_stream_file(const std::filesystem::path& path) {
  return decode_stream(read_file(path));
}

}  // namespace readmem

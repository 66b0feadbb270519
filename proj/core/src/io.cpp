#include "reside/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "reside/errors.hpp"

namespace reside {

namespace {

constexpr std::array<char, 8> kMagic{'R', 'S', 'A', 'R', 'R', 'A', 'Y', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(std::string("array file: truncated ") + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is, const char* what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw FormatError(std::string("array file: truncated ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is, const char* what) {
  return std::bit_cast<double>(get_u64(is, what));
}

float get_f32(std::istream& is, const char* what) {
  return std::bit_cast<float>(get_u32(is, what));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  return os;
}

struct Header {
  ElementType type;
  std::vector<std::size_t> shape;
  std::size_t count;
};

void write_header(std::ostream& os, ElementType type,
                  const std::vector<std::size_t>& shape) {
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(type));
  put_u32(os, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u64(os, d);
}

Header read_header(std::istream& is, const std::filesystem::path& path) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw FormatError("not an array file: " + path.string());
  const std::uint32_t version = get_u32(is, "version");
  if (version != kVersion)
    throw FormatError("unsupported array file version in " + path.string());
  const std::uint32_t type = get_u32(is, "element type");
  if (type < 1 || type > 4)
    throw FormatError("unknown element type in " + path.string());
  const std::uint32_t ndim = get_u32(is, "rank");
  if (ndim > 16) throw FormatError("implausible rank in " + path.string());
  Header h;
  h.type = static_cast<ElementType>(type);
  h.count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    const std::uint64_t d = get_u64(is, "shape");
    if (d == 0) throw FormatError("zero dimension in " + path.string());
    h.shape.push_back(static_cast<std::size_t>(d));
    h.count *= static_cast<std::size_t>(d);
  }
  if (ndim == 0) h.count = 0;
  return h;
}

void expect_eof(std::istream& is, const std::filesystem::path& path) {
  char extra;
  if (is.read(&extra, 1))
    throw FormatError("trailing bytes after payload in " + path.string());
}

}  // namespace

void save_array(const std::filesystem::path& path, const ComplexArray& a) {
  std::ofstream os = open_out(path);
  write_header(os, ElementType::complex128, a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    put_f64(os, a[i].real());
    put_f64(os, a[i].imag());
  }
  if (!os) throw FormatError("write failed: " + path.string());
}

ElementType peek_element_type(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  return read_header(is, path).type;
}

ComplexArray load_array(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  const Header h = read_header(is, path);
  if (h.type != ElementType::complex64 && h.type != ElementType::complex128)
    throw FormatError("expected a complex array in " + path.string());
  std::vector<cdouble> data(h.count);
  for (std::size_t i = 0; i < h.count; ++i) {
    if (h.type == ElementType::complex128) {
      const double re = get_f64(is, "payload");
      const double im = get_f64(is, "payload");
      data[i] = cdouble{re, im};
    } else {
      const float re = get_f32(is, "payload");
      const float im = get_f32(is, "payload");
      data[i] = cdouble{re, im};
    }
  }
  expect_eof(is, path);
  return ComplexArray(h.shape, std::move(data));
}

void save_real_array(const std::filesystem::path& path,
                     const std::vector<std::size_t>& shape,
                     const std::vector<double>& values) {
  if (values.size() != shape_size(shape))
    throw ArgumentError("save_real_array: shape/data mismatch");
  std::ofstream os = open_out(path);
  write_header(os, ElementType::float64, shape);
  for (double v : values) put_f64(os, v);
  if (!os) throw FormatError("write failed: " + path.string());
}

std::pair<std::vector<std::size_t>, std::vector<double>> load_real_array(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  const Header h = read_header(is, path);
  if (h.type != ElementType::float64)
    throw FormatError("expected a float64 array in " + path.string());
  std::vector<double> data(h.count);
  for (std::size_t i = 0; i < h.count; ++i) data[i] = get_f64(is, "payload");
  expect_eof(is, path);
  return {h.shape, std::move(data)};
}

void save_bool_array(const std::filesystem::path& path,
                     const std::vector<std::size_t>& shape,
                     const std::vector<std::uint8_t>& values) {
  if (values.size() != shape_size(shape))
    throw ArgumentError("save_bool_array: shape/data mismatch");
  std::ofstream os = open_out(path);
  write_header(os, ElementType::boolean, shape);
  for (std::uint8_t v : values) {
    const char b = v ? 1 : 0;
    os.write(&b, 1);
  }
  if (!os) throw FormatError("write failed: " + path.string());
}

std::pair<std::vector<std::size_t>, std::vector<std::uint8_t>> load_bool_array(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  const Header h = read_header(is, path);
  if (h.type != ElementType::boolean)
    throw FormatError("expected a boolean array in " + path.string());
  std::vector<std::uint8_t> data(h.count);
  if (h.count > 0 &&
      !is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(h.count)))
    throw FormatError("array file: truncated payload in " + path.string());
  expect_eof(is, path);
  for (std::uint8_t& v : data) v = v ? 1 : 0;
  return {h.shape, std::move(data)};
}

void KeyValueFile::set(const std::string& key, const std::string& value) {
  for (auto& e : entries_) {
    if (e.first == key) {
      e.second = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValueFile::set_double(const std::string& key, double value) {
  set(key, format_double(value));
}

void KeyValueFile::set_int(const std::string& key, long long value) {
  set(key, std::to_string(value));
}

void KeyValueFile::set_uint(const std::string& key, unsigned long long value) {
  set(key, std::to_string(value));
}

bool KeyValueFile::contains(const std::string& key) const {
  return get(key).has_value();
}

std::optional<std::string> KeyValueFile::get(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.first == key) return e.second;
  }
  return std::nullopt;
}

std::string KeyValueFile::require(const std::string& key) const {
  auto v = get(key);
  if (!v) throw FormatError("missing key: " + key);
  return *v;
}

double KeyValueFile::require_double(const std::string& key) const {
  return parse_double(require(key));
}

long long KeyValueFile::require_int(const std::string& key) const {
  const std::string v = require(key);
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw FormatError("key " + key + " is not an integer: " + v);
  }
  if (pos != v.size()) throw FormatError("key " + key + " is not an integer: " + v);
  return out;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open: " + path.string());
  KeyValueFile kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key=value");
    kv.entries_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return kv;
}

void KeyValueFile::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  for (const auto& e : entries_) os << e.first << '=' << e.second << '\n';
  if (!os) throw FormatError("write failed: " + path.string());
}

std::string format_shape(const std::vector<std::size_t>& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

std::vector<std::size_t> parse_shape(const std::string& text) {
  std::vector<std::size_t> shape;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find('x', pos);
    if (next == std::string::npos) next = text.size();
    const std::string tok = text.substr(pos, next - pos);
    try {
      const long long v = std::stoll(tok);
      if (v <= 0) throw std::invalid_argument("nonpositive");
      shape.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ArgumentError("bad shape token: '" + tok + "' in '" + text + "'");
    }
    pos = next + 1;
  }
  if (shape.empty()) throw ArgumentError("empty shape: '" + text + "'");
  return shape;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0')
    throw FormatError("not a number: '" + text + "'");
  return v;
}

void save_dataset(const std::filesystem::path& dir, const SimulatedAcquisition& acq,
                  const KeyValueFile& extra) {
  std::filesystem::create_directories(dir);
  save_array(dir / "truth.rsa", acq.truth);
  save_array(dir / "maps.rsa", acq.maps.maps);
  save_bool_array(dir / "mask.rsa", {acq.mask.num_frames, acq.mask.num_lines},
                  acq.mask.lines);
  save_array(dir / "kspace.rsa", acq.y);

  KeyValueFile m;
  m.set_int("format_version", 1);
  m.set("image_shape", format_shape(acq.truth.shape()));
  m.set_uint("coils", acq.maps.num_coils());
  m.set_uint("frames", acq.mask.num_frames);
  m.set("mask_kind", to_string(acq.mask.kind));
  m.set_uint("acs_width", acq.mask.acs_width);
  m.set_double("sigma2", acq.sigma2);
  m.set_double("achieved_accel", acq.achieved_R);
  m.set_double("target_snr_db", acq.target_snr_db);
  m.set("truth", "truth.rsa");
  m.set("maps", "maps.rsa");
  m.set("mask", "mask.rsa");
  m.set("kspace", "kspace.rsa");
  for (const auto& e : extra.entries()) m.set(e.first, e.second);
  m.save(dir / "manifest.txt");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.manifest = KeyValueFile::load(dir / "manifest.txt");
  if (d.manifest.require_int("format_version") != 1)
    throw FormatError("unsupported dataset version in " + dir.string());

  const auto shape = parse_shape(d.manifest.require("image_shape"));
  if (auto truth_file = d.manifest.get("truth")) {
    d.truth = load_array(dir / *truth_file);
    if (d.truth.shape() != shape)
      throw FormatError("truth shape disagrees with manifest in " + dir.string());
  }
  d.maps.maps = load_array(dir / d.manifest.require("maps"));
  auto [mask_shape, mask_bits] = load_bool_array(dir / d.manifest.require("mask"));
  if (mask_shape.size() != 2)
    throw FormatError("mask must be [frames, lines] in " + dir.string());
  d.mask.num_frames = mask_shape[0];
  d.mask.num_lines = mask_shape[1];
  d.mask.lines = std::move(mask_bits);
  d.mask.kind = mask_kind_from_string(d.manifest.require("mask_kind"));
  d.mask.acs_width = static_cast<std::size_t>(d.manifest.require_int("acs_width"));
  d.kspace.y = load_array(dir / d.manifest.require("kspace"));
  d.kspace.sigma2 = d.manifest.require_double("sigma2");
  d.achieved_R = d.manifest.require_double("achieved_accel");
  d.target_snr_db = d.manifest.require_double("target_snr_db");

  if (static_cast<std::size_t>(d.manifest.require_int("coils")) != d.maps.num_coils())
    throw FormatError("coil count disagrees with maps in " + dir.string());
  return d;
}

}  // namespace reside

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reside/array.hpp"
#include "reside/forward_model.hpp"
#include "reside/phantom.hpp"
#include "reside/sampling.hpp"

namespace reside {

/// Element tags of the on-disk array container.
enum class ElementType : std::uint32_t {
  complex64 = 1,
  complex128 = 2,
  boolean = 3,
  float64 = 4,
};

/// Self-describing little-endian array container:
///   magic "RSARRAY\0" | u32 version | u32 element tag | u32 ndim |
///   u64 dims[ndim] | row-major payload.
/// Loaders reject any length mismatch between header and payload.
void save_array(const std::filesystem::path& path, const ComplexArray& a);
ComplexArray load_array(const std::filesystem::path& path);

/// Element tag from the header alone.
ElementType peek_element_type(const std::filesystem::path& path);

void save_real_array(const std::filesystem::path& path,
                     const std::vector<std::size_t>& shape,
                     const std::vector<double>& values);
std::pair<std::vector<std::size_t>, std::vector<double>> load_real_array(
    const std::filesystem::path& path);

void save_bool_array(const std::filesystem::path& path,
                     const std::vector<std::size_t>& shape,
                     const std::vector<std::uint8_t>& values);
std::pair<std::vector<std::size_t>, std::vector<std::uint8_t>> load_bool_array(
    const std::filesystem::path& path);

/// Order-preserving key=value text file ('#' starts a comment line).
/// Doubles are written with 17 significant digits so reruns see identical
/// values.
class KeyValueFile {
 public:
  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, long long value);
  void set_uint(const std::string& key, unsigned long long value);

  bool contains(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::string require(const std::string& key) const;  // FormatError when absent
  double require_double(const std::string& key) const;
  long long require_int(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  static KeyValueFile load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_shape(const std::vector<std::size_t>& shape);  // "128x128"
std::vector<std::size_t> parse_shape(const std::string& text);

std::string format_double(double v);
double parse_double(const std::string& text);

/// One simulated acquisition on disk: manifest.txt plus truth/maps/mask/
/// kspace array files.
struct Dataset {
  ComplexArray truth;  // empty when the manifest lists no truth file
  SensitivityMaps maps;
  SamplingMask mask;
  KSpaceData kspace;
  double achieved_R = 1.0;
  double target_snr_db = 0.0;
  KeyValueFile manifest;

  bool has_truth() const { return truth.size() > 0; }
  bool dynamic() const { return mask.num_frames > 1; }
};

/// Writes the dataset directory; `extra` entries (seed, generator settings)
/// are appended to the manifest after the core keys.
void save_dataset(const std::filesystem::path& dir, const SimulatedAcquisition& acq,
                  const KeyValueFile& extra);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace reside

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dbp/image.hpp"
#include "dbp/nn/model.hpp"

namespace dbp::io {

/// Tensor container layout:
///   "DBPT" | version 0x01 | dtype 0x01 (f64 LE) | rank (u8) | rank x u32 LE dims | payload
/// Payload is row-major, last dimension fastest, 8 bytes per element.
struct TensorBlob {
    std::vector<std::uint32_t> dims;
    std::vector<double> values;

    std::uint64_t element_count() const;
    friend bool operator==(const TensorBlob&, const TensorBlob&) = default;
};

inline constexpr char kTensorMagic[4] = {'D', 'B', 'P', 'T'};
inline constexpr char kCheckpointMagic[4] = {'D', 'B', 'P', 'M'};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::uint8_t kDtypeF64 = 0x01;

std::vector<std::uint8_t> encode_tensor(const TensorBlob& blob);

/// Decodes one container starting at `offset`, advancing it past the payload.
/// `base` is added to reported byte offsets (position of `bytes` in its file).
TensorBlob decode_tensor(std::span<const std::uint8_t> bytes, std::size_t& offset, std::uint64_t base = 0);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

void save_tensor(const std::filesystem::path& path, const TensorBlob& blob);
/// Rejects trailing bytes after the payload.
TensorBlob load_tensor(const std::filesystem::path& path);

/// Image: rank 2 (n, n).
void save_image(const std::filesystem::path& path, const Image& image);
Image load_image(const std::filesystem::path& path);

/// Sinogram values: rank 2 (channels, views). Angles are stored separately as a
/// rank-1 container so the tensor format stays metadata-free.
void save_sinogram(const std::filesystem::path& path, const Sinogram& sino);
Sinogram load_sinogram(const std::filesystem::path& path, std::span<const double> angles);

void save_vector(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> load_vector(const std::filesystem::path& path);

/// Back-projection tensor: rank 3 (views, n, n).
void save_bp_tensor(const std::filesystem::path& path, const BpTensor& tensor);
BpTensor load_bp_tensor(const std::filesystem::path& path, std::span<const double> angles);

using Metadata = std::map<std::string, std::string>;

struct Checkpoint {
    nn::Model model;
    Metadata metadata;
};

/// Checkpoint layout:
///   "DBPM" | version 0x01 | u32 LE metadata length | key=value lines (UTF-8)
///   | one tensor container per Model::state_tensors() entry, in order.
/// depth, width and views are always written from the model; other keys are
/// taken from `metadata`.
std::vector<std::uint8_t> encode_checkpoint(const nn::Model& model, const Metadata& metadata);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const nn::Model& model, const Metadata& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Binary PGM (P5, maxval 255), byte = floor(255 x + 0.5) after clamping to [0, 1].
std::vector<std::uint8_t> encode_pgm(std::span<const Image> panels);
/// Writes the images side by side, left to right.
void export_pgm(const std::filesystem::path& path, std::span<const Image> panels);
void export_pgm(const std::filesystem::path& path, const Image& image);

}  // namespace dbp::io

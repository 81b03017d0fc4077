#include "dbp/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dbp/errors.hpp"

namespace dbp::io {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

double get_f64(const std::uint8_t* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

void need(std::span<const std::uint8_t> bytes, std::size_t offset, std::size_t count, const char* field,
          std::uint64_t base) {
    if (bytes.size() < offset || bytes.size() - offset < count) {
        throw FormatError(field, base + bytes.size(),
                          "truncated input: " + std::string(field) + " needs " + std::to_string(count) +
                              " bytes at offset " + std::to_string(base + offset) + ", file ends");
    }
}

std::vector<std::uint32_t> checked_dims(std::initializer_list<std::size_t> dims) {
    std::vector<std::uint32_t> out;
    for (std::size_t d : dims) {
        if (d > UINT32_MAX) throw InvalidInput("dimension exceeds the 32-bit container limit");
        out.push_back(static_cast<std::uint32_t>(d));
    }
    return out;
}

// Shapes of Model::state_tensors(), in the same order.
std::vector<std::vector<std::uint32_t>> state_shapes(const nn::ModelConfig& c) {
    std::vector<std::vector<std::uint32_t>> shapes;
    shapes.push_back(checked_dims({c.width, c.views, 3, 3}));
    shapes.push_back(checked_dims({c.width}));
    for (std::size_t d = 0; d < c.depth; ++d) {
        shapes.push_back(checked_dims({c.width, c.width, 3, 3}));
        for (int i = 0; i < 5; ++i) shapes.push_back(checked_dims({c.width}));
    }
    shapes.push_back(checked_dims({1, c.width, 3, 3}));
    shapes.push_back(checked_dims({1}));
    return shapes;
}

std::string dims_str(const std::vector<std::uint32_t>& dims) {
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? ", " : "") + std::to_string(dims[i]);
    return s + ")";
}

std::size_t metadata_size(const Metadata& metadata, const std::string& key, std::uint64_t offset) {
    const auto it = metadata.find(key);
    if (it == metadata.end()) throw FormatError("metadata", offset, "checkpoint metadata lacks '" + key + "'");
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw FormatError("metadata", offset, "checkpoint metadata '" + key + "' is not an unsigned integer");
    }
}

}  // namespace

std::uint64_t TensorBlob::element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

std::vector<std::uint8_t> encode_tensor(const TensorBlob& blob) {
    if (blob.dims.size() > 255) throw InvalidInput("tensor rank exceeds 255");
    if (blob.element_count() != blob.values.size()) {
        throw InvalidInput("tensor payload has " + std::to_string(blob.values.size()) + " values, dims " +
                           dims_str(blob.dims) + " require " + std::to_string(blob.element_count()));
    }
    std::vector<std::uint8_t> out(kTensorMagic, kTensorMagic + 4);
    out.reserve(7 + 4 * blob.dims.size() + 8 * blob.values.size());
    out.push_back(kVersion);
    out.push_back(kDtypeF64);
    out.push_back(static_cast<std::uint8_t>(blob.dims.size()));
    for (auto d : blob.dims) put_u32(out, d);
    for (double v : blob.values) put_f64(out, v);
    return out;
}

TensorBlob decode_tensor(std::span<const std::uint8_t> bytes, std::size_t& offset, std::uint64_t base) {
    need(bytes, offset, 4, "magic", base);
    if (std::memcmp(bytes.data() + offset, kTensorMagic, 4) != 0) {
        throw FormatError("magic", base + offset, "bad tensor magic, expected 'DBPT'");
    }
    need(bytes, offset + 4, 3, "header", base);
    if (bytes[offset + 4] != kVersion) {
        throw FormatError("version", base + offset + 4,
                          "unknown tensor version " + std::to_string(bytes[offset + 4]));
    }
    if (bytes[offset + 5] != kDtypeF64) {
        throw FormatError("dtype", base + offset + 5, "unknown tensor dtype " + std::to_string(bytes[offset + 5]));
    }
    const std::size_t rank = bytes[offset + 6];
    std::size_t pos = offset + 7;
    need(bytes, pos, 4 * rank, "dims", base);

    TensorBlob blob;
    for (std::size_t i = 0; i < rank; ++i, pos += 4) blob.dims.push_back(get_u32(bytes.data() + pos));
    const std::uint64_t count = blob.element_count();
    if (count > (bytes.size() - pos) / 8) {
        throw FormatError("payload", base + bytes.size(),
                          "truncated payload: " + std::to_string(8 * count) + " bytes expected from offset " +
                              std::to_string(base + pos) + ", input ends");
    }
    blob.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i, pos += 8) blob.values[i] = get_f64(bytes.data() + pos);
    offset = pos;
    return blob;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void save_tensor(const std::filesystem::path& path, const TensorBlob& blob) { write_file(path, encode_tensor(blob)); }

TensorBlob load_tensor(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    std::size_t offset = 0;
    TensorBlob blob = decode_tensor(bytes, offset);
    if (offset != bytes.size()) {
        throw FormatError("payload", offset, "unexpected trailing bytes in '" + path.string() + "'");
    }
    return blob;
}

void save_image(const std::filesystem::path& path, const Image& image) {
    const auto data = image.data();
    save_tensor(path, {checked_dims({image.size(), image.size()}), {data.begin(), data.end()}});
}

Image load_image(const std::filesystem::path& path) {
    TensorBlob blob = load_tensor(path);
    if (blob.dims.size() != 2 || blob.dims[0] != blob.dims[1]) {
        throw FormatError("dims", 7, "'" + path.string() + "' is not a square rank-2 image, dims " + dims_str(blob.dims));
    }
    return Image(blob.dims[0], std::move(blob.values));
}

void save_sinogram(const std::filesystem::path& path, const Sinogram& sino) {
    const auto data = sino.data();
    save_tensor(path, {checked_dims({sino.channels(), sino.views()}), {data.begin(), data.end()}});
}

Sinogram load_sinogram(const std::filesystem::path& path, std::span<const double> angles) {
    TensorBlob blob = load_tensor(path);
    if (blob.dims.size() != 2 || blob.dims[1] != angles.size()) {
        throw FormatError("dims", 7, "'" + path.string() + "' dims " + dims_str(blob.dims) + " do not match " +
                                         std::to_string(angles.size()) + " view angles");
    }
    return Sinogram(blob.dims[0], {angles.begin(), angles.end()}, std::move(blob.values));
}

void save_vector(const std::filesystem::path& path, std::span<const double> values) {
    save_tensor(path, {checked_dims({values.size()}), {values.begin(), values.end()}});
}

std::vector<double> load_vector(const std::filesystem::path& path) {
    TensorBlob blob = load_tensor(path);
    if (blob.dims.size() != 1) throw FormatError("rank", 6, "'" + path.string() + "' is not a rank-1 container");
    return std::move(blob.values);
}

void save_bp_tensor(const std::filesystem::path& path, const BpTensor& tensor) {
    const auto data = tensor.data();
    save_tensor(path, {checked_dims({tensor.views(), tensor.size(), tensor.size()}), {data.begin(), data.end()}});
}

BpTensor load_bp_tensor(const std::filesystem::path& path, std::span<const double> angles) {
    TensorBlob blob = load_tensor(path);
    if (blob.dims.size() != 3 || blob.dims[0] != angles.size() || blob.dims[1] != blob.dims[2]) {
        throw FormatError("dims", 7, "'" + path.string() + "' dims " + dims_str(blob.dims) +
                                         " are not (views, n, n) for " + std::to_string(angles.size()) + " views");
    }
    BpTensor tensor(blob.dims[1], {angles.begin(), angles.end()});
    std::copy(blob.values.begin(), blob.values.end(), tensor.data().begin());
    return tensor;
}

std::vector<std::uint8_t> encode_checkpoint(const nn::Model& model, const Metadata& metadata) {
    Metadata meta = metadata;
    const auto& config = model.config();
    meta["depth"] = std::to_string(config.depth);
    meta["width"] = std::to_string(config.width);
    meta["views"] = std::to_string(config.views);

    std::string text;
    for (const auto& [key, value] : meta) {
        if (key.empty() || key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
            throw InvalidInput("metadata entry '" + key + "' cannot be encoded as a key=value line");
        }
        text += key + "=" + value + "\n";
    }

    std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
    out.push_back(kVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());

    const auto shapes = state_shapes(config);
    const auto tensors = model.state_tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const auto bytes = encode_tensor({shapes[i], {tensors[i].begin(), tensors[i].end()}});
        out.insert(out.end(), bytes.begin(), bytes.end());
    }
    return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    need(bytes, 0, 4, "magic", 0);
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw FormatError("magic", 0, "bad checkpoint magic, expected 'DBPM'");
    }
    need(bytes, 4, 1, "version", 0);
    if (bytes[4] != kVersion) throw FormatError("version", 4, "unknown checkpoint version " + std::to_string(bytes[4]));
    need(bytes, 5, 4, "metadata length", 0);
    const std::uint32_t meta_len = get_u32(bytes.data() + 5);
    need(bytes, 9, meta_len, "metadata", 0);

    Metadata metadata;
    std::istringstream lines(std::string(reinterpret_cast<const char*>(bytes.data() + 9), meta_len));
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw FormatError("metadata", 9, "malformed metadata line '" + line + "'");
        }
        metadata[line.substr(0, eq)] = line.substr(eq + 1);
    }

    nn::ModelConfig config;
    config.depth = metadata_size(metadata, "depth", 9);
    config.width = metadata_size(metadata, "width", 9);
    config.views = metadata_size(metadata, "views", 9);
    if (config.width == 0 || config.views == 0) throw FormatError("metadata", 9, "width and views must be positive");
    if (config.depth > 4096 || config.width > 4096 || config.views > 4096) {
        throw FormatError("metadata", 9, "architecture in metadata is implausibly large");
    }
    nn::Model model(config);

    const auto shapes = state_shapes(config);
    auto tensors = model.state_tensors();
    std::size_t offset = 9 + meta_len;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const std::size_t start = offset;
        TensorBlob blob = decode_tensor(bytes, offset);
        if (blob.dims != shapes[i]) {
            throw FormatError("dims", start, "checkpoint tensor " + std::to_string(i) + " has dims " +
                                                 dims_str(blob.dims) + ", expected " + dims_str(shapes[i]));
        }
        std::copy(blob.values.begin(), blob.values.end(), tensors[i].begin());
    }
    if (offset != bytes.size()) throw FormatError("payload", offset, "unexpected trailing bytes in checkpoint");
    return {std::move(model), std::move(metadata)};
}

void save_checkpoint(const std::filesystem::path& path, const nn::Model& model, const Metadata& metadata) {
    write_file(path, encode_checkpoint(model, metadata));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

std::vector<std::uint8_t> encode_pgm(std::span<const Image> panels) {
    if (panels.empty()) throw InvalidInput("nothing to export");
    const std::size_t n = panels.front().size();
    for (const auto& p : panels) {
        if (p.size() != n) throw InvalidInput("PGM panels must share one size");
    }
    const std::string header = "P5\n" + std::to_string(n * panels.size()) + " " + std::to_string(n) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(header.size() + n * n * panels.size());
    for (std::size_t r = 0; r < n; ++r) {
        for (const auto& panel : panels) {
            for (std::size_t c = 0; c < n; ++c) {
                const double v = std::clamp(panel.at(r, c), 0.0, 1.0);
                out.push_back(static_cast<std::uint8_t>(std::floor(255.0 * v + 0.5)));
            }
        }
    }
    return out;
}

void export_pgm(const std::filesystem::path& path, std::span<const Image> panels) {
    write_file(path, encode_pgm(panels));
}

void export_pgm(const std::filesystem::path& path, const Image& image) {
    export_pgm(path, std::span<const Image>(&image, 1));
}

}  // namespace dbp::io

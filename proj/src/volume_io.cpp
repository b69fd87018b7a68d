#include "discreg/volume_io.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace discreg {

static_assert(std::endian::native == std::endian::little, "raw volume I/O assumes a little-endian host");

namespace fs = std::filesystem;
using nlohmann::json;

VolumePaths volume_paths(const fs::path& path)
{
    fs::path base = path;
    if (base.extension() == ".raw" || base.extension() == ".json")
        base.replace_extension();
    fs::path header = base;
    header += ".json";
    fs::path payload = base;
    payload += ".raw";
    return {header, payload};
}

VolumeHeader read_header(const fs::path& path)
{
    const auto paths = volume_paths(path);
    std::ifstream in(paths.header);
    if (!in)
        throw Error(ErrorKind::missing_file, "cannot open header " + paths.header.string());

    VolumeHeader h;
    try {
        json j = json::parse(in);
        auto dims = j.at("dims").get<std::vector<int>>();
        if (dims.size() != 3)
            throw Error(ErrorKind::bad_header, "dims must have 3 entries");
        h.dims = {dims[0], dims[1], dims[2]};
        if (j.contains("spacing")) {
            auto sp = j.at("spacing").get<std::vector<double>>();
            if (sp.size() != 3)
                throw Error(ErrorKind::bad_header, "spacing must have 3 entries");
            h.spacing = {sp[0], sp[1], sp[2]};
        }
        h.channels = j.value("channels", 1);
        h.dtype = dtype_from_string(j.at("dtype").get<std::string>());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::bad_header, paths.header.string() + ": " + e.what());
    }
    try {
        h.validate();
    } catch (const Error& e) {
        throw Error(e.kind(), paths.header.string() + ": " + e.what());
    }
    return h;
}

namespace {

struct RawPayload {
    VolumeHeader header;
    std::vector<char> bytes;
};

RawPayload read_payload(const fs::path& path)
{
    RawPayload raw{read_header(path), {}};
    const auto paths = volume_paths(path);
    std::ifstream in(paths.payload, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::missing_file, "cannot open payload " + paths.payload.string());
    raw.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());

    const std::size_t expected = raw.header.dims.count() * static_cast<std::size_t>(raw.header.channels)
                               * dtype_size(raw.header.dtype);
    if (raw.bytes.size() != expected)
        throw Error(ErrorKind::length_mismatch, paths.payload.string() + ": payload has " + std::to_string(raw.bytes.size())
                                                    + " bytes, header implies " + std::to_string(expected));
    return raw;
}

template <typename T>
std::vector<T> decode_as(const RawPayload& raw)
{
    const std::size_t n = raw.bytes.size() / dtype_size(raw.header.dtype);
    std::vector<T> out(n);
    auto convert = [&](auto tag) {
        using S = decltype(tag);
        for (std::size_t i = 0; i < n; ++i) {
            S v;
            std::memcpy(&v, raw.bytes.data() + i * sizeof(S), sizeof(S));
            out[i] = static_cast<T>(v);
        }
    };
    switch (raw.header.dtype) {
    case DType::float32: convert(float{}); break;
    case DType::uint8: convert(std::uint8_t{}); break;
    case DType::uint16: convert(std::uint16_t{}); break;
    case DType::int32: convert(std::int32_t{}); break;
    }
    return out;
}

std::vector<float> decode_real(const RawPayload& raw, const fs::path& path)
{
    auto data = decode_as<float>(raw);
    for (float v : data) {
        if (!std::isfinite(v))
            throw Error(ErrorKind::non_finite, volume_paths(path).payload.string() + ": payload contains NaN or Inf");
    }
    return data;
}

void write_files(const VolumeHeader& h, const void* bytes, std::size_t nbytes, const fs::path& path)
{
    h.validate();
    const auto paths = volume_paths(path);
    json j;
    j["dims"] = {h.dims.x, h.dims.y, h.dims.z};
    j["spacing"] = {h.spacing[0], h.spacing[1], h.spacing[2]};
    j["channels"] = h.channels;
    j["dtype"] = to_string(h.dtype);

    std::ofstream payload(paths.payload, std::ios::binary | std::ios::trunc);
    if (!payload)
        throw Error(ErrorKind::io, "cannot write " + paths.payload.string());
    payload.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(nbytes));
    if (!payload)
        throw Error(ErrorKind::io, "short write to " + paths.payload.string());

    std::ofstream header(paths.header, std::ios::trunc);
    if (!header)
        throw Error(ErrorKind::io, "cannot write " + paths.header.string());
    header << j.dump() << '\n';
    if (!header)
        throw Error(ErrorKind::io, "short write to " + paths.header.string());
}

template <typename T>
std::vector<char> encode_labels(std::span<const std::int32_t> data)
{
    std::vector<char> bytes(data.size() * sizeof(T));
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i] > static_cast<std::int64_t>(std::numeric_limits<T>::max()))
            throw Error(ErrorKind::invalid_argument, "label " + std::to_string(data[i]) + " does not fit the label dtype");
        const T v = static_cast<T>(data[i]);
        std::memcpy(bytes.data() + i * sizeof(T), &v, sizeof(T));
    }
    return bytes;
}

} // namespace

AnyVolume load_volume(const fs::path& path)
{
    const VolumeHeader h = read_header(path);
    if (h.channels > 1)
        return load_features(path);
    if (is_integer(h.dtype))
        return load_labels(path);
    return load_scalar(path);
}

ScalarVolume load_scalar(const fs::path& path)
{
    RawPayload raw = read_payload(path);
    if (raw.header.channels != 1)
        throw Error(ErrorKind::channel_mismatch, path.string() + ": scalar volume must have 1 channel");
    return ScalarVolume(raw.header.dims, raw.header.spacing, decode_real(raw, path));
}

FeatureVolume load_features(const fs::path& path)
{
    RawPayload raw = read_payload(path);
    return FeatureVolume(raw.header.dims, raw.header.spacing, raw.header.channels, decode_real(raw, path));
}

LabelVolume load_labels(const fs::path& path)
{
    RawPayload raw = read_payload(path);
    if (raw.header.channels != 1)
        throw Error(ErrorKind::channel_mismatch, path.string() + ": label volume must have 1 channel");
    if (!is_integer(raw.header.dtype))
        throw Error(ErrorKind::bad_header, path.string() + ": label volume must have an integer dtype");
    return LabelVolume(raw.header.dims, raw.header.spacing, decode_as<std::int32_t>(raw), raw.header.dtype);
}

DisplacementField load_field(const fs::path& path)
{
    return field_from_feature(load_features(path));
}

void save_volume(const ScalarVolume& vol, const fs::path& path)
{
    write_files(vol.header(), vol.data().data(), vol.data().size_bytes(), path);
}

void save_volume(const FeatureVolume& vol, const fs::path& path)
{
    write_files(vol.header(), vol.data().data(), vol.data().size_bytes(), path);
}

void save_volume(const LabelVolume& vol, const fs::path& path)
{
    std::vector<char> bytes;
    switch (vol.dtype()) {
    case DType::uint8: bytes = encode_labels<std::uint8_t>(vol.data()); break;
    case DType::uint16: bytes = encode_labels<std::uint16_t>(vol.data()); break;
    case DType::int32: bytes = encode_labels<std::int32_t>(vol.data()); break;
    case DType::float32: throw Error(ErrorKind::bad_header, "label volume cannot be float32");
    }
    write_files(vol.header(), bytes.data(), bytes.size(), path);
}

void save_volume(const DisplacementField& field, const fs::path& path)
{
    static_assert(sizeof(Vec3) == 3 * sizeof(float));
    write_files(field.header(), field.data().data(), field.data().size_bytes(), path);
}

void save_volume(const AnyVolume& vol, const fs::path& path)
{
    std::visit([&](const auto& v) { save_volume(v, path); }, vol);
}

} // namespace discreg

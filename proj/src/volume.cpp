#include "discreg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace discreg {

const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::missing_file: return "missing file";
    case ErrorKind::bad_header: return "bad header";
    case ErrorKind::length_mismatch: return "length mismatch";
    case ErrorKind::non_finite: return "non-finite value";
    case ErrorKind::dim_mismatch: return "dimension mismatch";
    case ErrorKind::channel_mismatch: return "channel mismatch";
    case ErrorKind::too_small: return "volume too small";
    case ErrorKind::degenerate: return "degenerate input";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::budget: return "memory budget";
    case ErrorKind::io: return "i/o error";
    }
    return "unknown";
}

std::string to_string(const Dims& d)
{
    return std::to_string(d.x) + "x" + std::to_string(d.y) + "x" + std::to_string(d.z);
}

const char* to_string(DType t)
{
    switch (t) {
    case DType::float32: return "float32";
    case DType::uint8: return "uint8";
    case DType::uint16: return "uint16";
    case DType::int32: return "int32";
    }
    return "float32";
}

DType dtype_from_string(const std::string& s)
{
    if (s == "float32") return DType::float32;
    if (s == "uint8") return DType::uint8;
    if (s == "uint16") return DType::uint16;
    if (s == "int32") return DType::int32;
    throw Error(ErrorKind::bad_header, "unknown dtype '" + s + "'");
}

std::size_t dtype_size(DType t)
{
    switch (t) {
    case DType::float32: return 4;
    case DType::uint8: return 1;
    case DType::uint16: return 2;
    case DType::int32: return 4;
    }
    return 4;
}

bool is_integer(DType t)
{
    return t != DType::float32;
}

void VolumeHeader::validate() const
{
    if (dims.x < 1 || dims.y < 1 || dims.z < 1)
        throw Error(ErrorKind::bad_header, "dims must be positive, got " + to_string(dims));
    for (double s : spacing) {
        if (!(s > 0.0) || !std::isfinite(s))
            throw Error(ErrorKind::bad_header, "spacing must be positive and finite");
    }
    if (channels < 1)
        throw Error(ErrorKind::bad_header, "channels must be >= 1");
}

namespace {

void check_dims(const Dims& dims, const Spacing& spacing)
{
    VolumeHeader{dims, spacing, 1, DType::float32}.validate();
}

void check_finite(std::span<const float> data, const char* what)
{
    for (float v : data) {
        if (!std::isfinite(v))
            throw Error(ErrorKind::non_finite, std::string(what) + " contains NaN or Inf");
    }
}

} // namespace

ScalarVolume::ScalarVolume(Dims dims, Spacing spacing, std::vector<float> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data))
{
    check_dims(dims_, spacing_);
    if (data_.size() != dims_.count())
        throw Error(ErrorKind::length_mismatch, "scalar volume data length " + std::to_string(data_.size())
                                                    + " != " + std::to_string(dims_.count()));
    check_finite(data_, "scalar volume");
}

ScalarVolume::ScalarVolume(Dims dims, Spacing spacing, float value)
    : ScalarVolume(dims, spacing, std::vector<float>(dims.count(), value))
{
}

FeatureVolume::FeatureVolume(Dims dims, Spacing spacing, int channels, std::vector<float> data)
    : dims_(dims), spacing_(spacing), channels_(channels), data_(std::move(data))
{
    VolumeHeader{dims_, spacing_, channels_, DType::float32}.validate();
    if (data_.size() != dims_.count() * static_cast<std::size_t>(channels_))
        throw Error(ErrorKind::length_mismatch, "feature volume data length " + std::to_string(data_.size())
                                                    + " != channels*voxels");
    check_finite(data_, "feature volume");
}

LabelVolume::LabelVolume(Dims dims, Spacing spacing, std::vector<std::int32_t> data, DType dtype)
    : dims_(dims), spacing_(spacing), dtype_(dtype), data_(std::move(data))
{
    check_dims(dims_, spacing_);
    if (!is_integer(dtype_))
        throw Error(ErrorKind::bad_header, "label volume needs an integer dtype");
    if (data_.size() != dims_.count())
        throw Error(ErrorKind::length_mismatch, "label volume data length mismatch");
    if (std::any_of(data_.begin(), data_.end(), [](std::int32_t v) { return v < 0; }))
        throw Error(ErrorKind::invalid_argument, "labels must be non-negative");
}

std::vector<std::int32_t> LabelVolume::label_set() const
{
    std::set<std::int32_t> s(data_.begin(), data_.end());
    return {s.begin(), s.end()};
}

DisplacementField::DisplacementField(Dims dims, Spacing spacing)
    : DisplacementField(dims, spacing, std::vector<Vec3>(dims.count()))
{
}

DisplacementField::DisplacementField(Dims dims, Spacing spacing, std::vector<Vec3> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data))
{
    check_dims(dims_, spacing_);
    if (data_.size() != dims_.count())
        throw Error(ErrorKind::length_mismatch, "displacement field length mismatch");
    for (const Vec3& v : data_) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
            throw Error(ErrorKind::non_finite, "displacement field contains NaN or Inf");
    }
}

DisplacementField DisplacementField::constant(Dims dims, Vec3 v, Spacing spacing)
{
    return DisplacementField(dims, spacing, std::vector<Vec3>(dims.count(), v));
}

bool DisplacementField::is_zero() const
{
    return std::all_of(data_.begin(), data_.end(),
                       [](const Vec3& v) { return v.x == 0.0f && v.y == 0.0f && v.z == 0.0f; });
}

FeatureVolume as_feature(const ScalarVolume& v)
{
    return FeatureVolume(v.dims(), v.spacing(), 1, std::vector<float>(v.data().begin(), v.data().end()));
}

FeatureVolume field_as_feature(const DisplacementField& f)
{
    std::vector<float> data;
    data.reserve(f.data().size() * 3);
    for (const Vec3& v : f.data()) {
        data.push_back(v.x);
        data.push_back(v.y);
        data.push_back(v.z);
    }
    return FeatureVolume(f.dims(), f.spacing(), 3, std::move(data));
}

DisplacementField field_from_feature(const FeatureVolume& f)
{
    if (f.channels() != 3)
        throw Error(ErrorKind::channel_mismatch, "displacement field file must have 3 channels, got "
                                                     + std::to_string(f.channels()));
    std::vector<Vec3> data(f.dims().count());
    for (std::size_t n = 0; n < data.size(); ++n) {
        auto v = f.at(n);
        data[n] = {v[0], v[1], v[2]};
    }
    return DisplacementField(f.dims(), f.spacing(), std::move(data));
}

} // namespace discreg

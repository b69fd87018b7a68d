#pragma once

#include "discreg/error.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace discreg {

struct Dims {
    int x = 1;
    int y = 1;
    int z = 1;

    std::size_t count() const {
        return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
    }
    // x varies fastest, then y, then z.
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * static_cast<std::size_t>(y) + static_cast<std::size_t>(j))
                   * static_cast<std::size_t>(x)
             + static_cast<std::size_t>(i);
    }
    int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
    bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

using Spacing = std::array<double, 3>;

enum class DType { float32, uint8, uint16, int32 };

const char* to_string(DType t);
DType dtype_from_string(const std::string& s);
std::size_t dtype_size(DType t);
bool is_integer(DType t);

struct VolumeHeader {
    Dims dims;
    Spacing spacing{1.0, 1.0, 1.0};
    int channels = 1;
    DType dtype = DType::float32;

    /// Throws Error(bad_header) when a dimension, spacing or channel count is
    /// not positive.
    void validate() const;

    bool operator==(const VolumeHeader&) const = default;
};

struct Vec3 {
    float x = 0.0f;
    float y = 0.0f;
    float z = 0.0f;

    float operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
    bool operator==(const Vec3&) const = default;
};

/// Single-channel real-valued volume (fixed or moving image).
class ScalarVolume {
public:
    ScalarVolume() = default;
    ScalarVolume(Dims dims, Spacing spacing, std::vector<float> data);
    /// Constant-filled volume.
    ScalarVolume(Dims dims, Spacing spacing, float value = 0.0f);

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    VolumeHeader header() const { return {dims_, spacing_, 1, DType::float32}; }
    std::span<const float> data() const { return data_; }
    std::size_t size() const { return data_.size(); }

    float operator()(int i, int j, int k) const { return data_[dims_.index(i, j, k)]; }
    float operator[](std::size_t n) const { return data_[n]; }

private:
    Dims dims_;
    Spacing spacing_{1.0, 1.0, 1.0};
    std::vector<float> data_;
};

/// Multi-channel per-voxel feature vectors, channel-contiguous per voxel.
class FeatureVolume {
public:
    FeatureVolume() = default;
    FeatureVolume(Dims dims, Spacing spacing, int channels, std::vector<float> data);

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    int channels() const { return channels_; }
    VolumeHeader header() const { return {dims_, spacing_, channels_, DType::float32}; }
    std::span<const float> data() const { return data_; }

    /// Feature vector at linear voxel index n.
    std::span<const float> at(std::size_t n) const {
        return std::span<const float>(data_).subspan(n * static_cast<std::size_t>(channels_),
                                                     static_cast<std::size_t>(channels_));
    }
    std::span<const float> at(int i, int j, int k) const { return at(dims_.index(i, j, k)); }

private:
    Dims dims_;
    Spacing spacing_{1.0, 1.0, 1.0};
    int channels_ = 1;
    std::vector<float> data_;
};

/// Integer segmentation, 0 = background.
class LabelVolume {
public:
    LabelVolume() = default;
    LabelVolume(Dims dims, Spacing spacing, std::vector<std::int32_t> data,
                DType dtype = DType::uint16);

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    DType dtype() const { return dtype_; }
    VolumeHeader header() const { return {dims_, spacing_, 1, dtype_}; }
    std::span<const std::int32_t> data() const { return data_; }

    std::int32_t operator()(int i, int j, int k) const { return data_[dims_.index(i, j, k)]; }
    std::int32_t operator[](std::size_t n) const { return data_[n]; }

    /// Sorted distinct labels, background included if present.
    std::vector<std::int32_t> label_set() const;

private:
    Dims dims_;
    Spacing spacing_{1.0, 1.0, 1.0};
    DType dtype_ = DType::uint16;
    std::vector<std::int32_t> data_;
};

/// Per-voxel displacement in voxel units of the fixed grid.
class DisplacementField {
public:
    DisplacementField() = default;
    /// Zero field.
    DisplacementField(Dims dims, Spacing spacing = {1.0, 1.0, 1.0});
    DisplacementField(Dims dims, Spacing spacing, std::vector<Vec3> data);

    static DisplacementField constant(Dims dims, Vec3 v, Spacing spacing = {1.0, 1.0, 1.0});

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    VolumeHeader header() const { return {dims_, spacing_, 3, DType::float32}; }
    std::span<const Vec3> data() const { return data_; }

    const Vec3& operator()(int i, int j, int k) const { return data_[dims_.index(i, j, k)]; }
    const Vec3& operator[](std::size_t n) const { return data_[n]; }

    bool is_zero() const;

private:
    Dims dims_;
    Spacing spacing_{1.0, 1.0, 1.0};
    std::vector<Vec3> data_;
};

FeatureVolume as_feature(const ScalarVolume& v);
FeatureVolume field_as_feature(const DisplacementField& f);
DisplacementField field_from_feature(const FeatureVolume& f);

} // namespace discreg

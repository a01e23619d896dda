#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ggan/network.hpp"

namespace ggan {

inline constexpr std::string_view kCheckpointMagic = "GGAN";
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { Parameters = 1, TrainState = 2 };

/// Little-endian encoder for checkpoint payloads.
class BinaryWriter {
public:
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void bytes(std::string_view s);
    /// Length-prefixed string.
    void string(std::string_view s);
    void tensor(const Tensor& t);
    void parameters(const ParameterSet& p);

    const std::string& buffer() const { return buf_; }

private:
    std::string buf_;
};

/// Bounds-checked decoder; any overrun is reported as a corrupted file.
class BinaryReader {
public:
    explicit BinaryReader(std::string_view data) : data_(data) {}

    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string_view bytes(std::size_t n);
    std::string string();
    void tensor_into(Tensor& t);
    void parameters_into(ParameterSet& p);

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

/// Writes magic, version and kind.
void write_checkpoint_preamble(BinaryWriter& w, CheckpointKind kind);
/// Validates magic, version and kind.
void read_checkpoint_preamble(BinaryReader& r, CheckpointKind expected);

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::string_view bytes);

/// Standalone parameter checkpoint: preamble, spec echo as JSON, then every
/// weight and bias as little-endian doubles in flat layer order.
std::string serialize_parameters(const NetworkSpec& spec, const ParameterSet& params);
/// Refuses to load when the echoed spec differs from `expected`.
ParameterSet deserialize_parameters(std::string_view bytes, const NetworkSpec& expected);

}  // namespace ggan

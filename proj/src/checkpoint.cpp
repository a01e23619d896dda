#include "ggan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ggan/error.hpp"

namespace ggan {

namespace {

template <typename T>
void put_le(std::string& buf, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf.push_back(static_cast<char>(static_cast<unsigned char>(v >> (8 * i))));
    }
}

[[noreturn]] void corrupted(const std::string& what) {
    fail(ErrorKind::ArtifactMismatch, "corrupted checkpoint: " + what);
}

}  // namespace

void BinaryWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void BinaryWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }
void BinaryWriter::bytes(std::string_view s) { buf_.append(s); }

void BinaryWriter::string(std::string_view s) {
    u64(s.size());
    bytes(s);
}

void BinaryWriter::tensor(const Tensor& t) {
    for (const double x : t.data) f64(x);
}

void BinaryWriter::parameters(const ParameterSet& p) {
    for (const auto& l : p.layers) {
        tensor(l.weight);
        tensor(l.bias);
    }
}

std::string_view BinaryReader::bytes(std::size_t n) {
    if (n > remaining()) corrupted("unexpected end of file");
    const auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
}

std::uint32_t BinaryReader::u32() {
    const auto b = bytes(4);
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

std::uint64_t BinaryReader::u64() {
    const auto b = bytes(8);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::string() {
    const auto n = u64();
    return std::string(bytes(n));
}

void BinaryReader::tensor_into(Tensor& t) {
    for (auto& x : t.data) x = f64();
}

void BinaryReader::parameters_into(ParameterSet& p) {
    for (auto& l : p.layers) {
        tensor_into(l.weight);
        tensor_into(l.bias);
    }
}

void write_checkpoint_preamble(BinaryWriter& w, CheckpointKind kind) {
    w.bytes(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(kind));
}

void read_checkpoint_preamble(BinaryReader& r, CheckpointKind expected) {
    if (r.remaining() < kCheckpointMagic.size() || r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
        corrupted("bad magic");
    }
    const auto version = r.u32();
    if (version != kCheckpointVersion) {
        fail(ErrorKind::ArtifactMismatch, "checkpoint format version " + std::to_string(version) +
                                              " is not supported (expected " +
                                              std::to_string(kCheckpointVersion) + ")");
    }
    const auto kind = r.u32();
    if (kind != static_cast<std::uint32_t>(expected)) {
        fail(ErrorKind::ArtifactMismatch, "checkpoint holds a different artifact kind");
    }
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Parse, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Usage, "cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string serialize_parameters(const NetworkSpec& spec, const ParameterSet& params) {
    BinaryWriter w;
    write_checkpoint_preamble(w, CheckpointKind::Parameters);
    w.string(to_json(spec).dump());
    w.u64(params.parameter_count());
    w.parameters(params);
    return w.buffer();
}

ParameterSet deserialize_parameters(std::string_view bytes, const NetworkSpec& expected) {
    BinaryReader r(bytes);
    read_checkpoint_preamble(r, CheckpointKind::Parameters);
    NetworkSpec echoed;
    try {
        echoed = network_spec_from_json(nlohmann::json::parse(r.string()));
    } catch (const nlohmann::json::exception&) {
        corrupted("unreadable network spec");
    } catch (const Error&) {
        corrupted("unreadable network spec");
    }
    if (!(echoed == expected)) fail(ErrorKind::ArtifactMismatch, "checkpoint network spec does not match");
    auto params = zero_parameters(expected);
    if (r.u64() != params.parameter_count()) corrupted("parameter count mismatch");
    r.parameters_into(params);
    if (r.remaining() != 0) corrupted("trailing bytes");
    return params;
}

}  // namespace ggan

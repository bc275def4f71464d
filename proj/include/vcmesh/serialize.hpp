#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcmesh/sampling.hpp"

namespace vcmesh {

// Little-endian byte stream, independent of host endianness.
class ByteWriter {
public:
    void u8(uint8_t v) { bytes_.push_back(v); }
    void u32(uint32_t v);
    void u64(uint64_t v);
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
    void f64(double v);
    void str(const std::string& s);  // u64 length + raw bytes
    void i32_vec(const std::vector<int>& v);
    void f64_vec(const std::vector<double>& v);
    void magic(const char tag[4]);

    const std::vector<uint8_t>& bytes() const { return bytes_; }
    void save(const std::string& path) const;

private:
    std::vector<uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<uint8_t> bytes) : bytes_(std::move(bytes)) {}
    static ByteReader load(const std::string& path);

    uint8_t u8();
    uint32_t u32();
    uint64_t u64();
    int32_t i32() { return static_cast<int32_t>(u32()); }
    int64_t i64() { return static_cast<int64_t>(u64()); }
    double f64();
    std::string str();
    std::vector<int> i32_vec();
    std::vector<double> f64_vec();
    void magic(const char tag[4]);  // throws ParseError on mismatch

    bool done() const { return pos_ == bytes_.size(); }
    void expect_done() const;

private:
    void need(size_t n) const;
    std::vector<uint8_t> bytes_;
    size_t pos_ = 0;
};

uint64_t fnv1a64(const std::vector<uint8_t>& bytes);

void save_hierarchy(const SamplingHierarchy& hierarchy, const std::string& path);
SamplingHierarchy load_hierarchy(const std::string& path);

// Stable digest of a serialized hierarchy; checkpoints and latent codes embed
// it so a model is never applied across mismatched sampling structures.
uint64_t hierarchy_fingerprint(const SamplingHierarchy& hierarchy);

}  // namespace vcmesh

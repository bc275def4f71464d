#include "vcmesh/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vcmesh/error.hpp"

namespace vcmesh {

namespace {
constexpr char kHierarchyMagic[4] = {'V', 'M', 'S', 'H'};
constexpr uint32_t kHierarchyVersion = 1;
}  // namespace

void ByteWriter::u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) {
    u64(std::bit_cast<uint64_t>(v));
}

void ByteWriter::str(const std::string& s) {
    u64(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::i32_vec(const std::vector<int>& v) {
    u64(v.size());
    for (int x : v) i32(x);
}

void ByteWriter::f64_vec(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
}

void ByteWriter::magic(const char tag[4]) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<uint8_t>(tag[i]));
}

void ByteWriter::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw InputError("failed writing " + path);
}

ByteReader ByteReader::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw InputError("failed reading " + path);
    return ByteReader(std::move(bytes));
}

void ByteReader::need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("byte stream truncated");
}

uint8_t ByteReader::u8() {
    need(1);
    return bytes_[pos_++];
}

uint32_t ByteReader::u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
}

uint64_t ByteReader::u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
}

double ByteReader::f64() {
    return std::bit_cast<double>(u64());
}

std::string ByteReader::str() {
    uint64_t n = u64();
    need(n);
    std::string s(bytes_.begin() + static_cast<ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
}

std::vector<int> ByteReader::i32_vec() {
    uint64_t n = u64();
    need(n * 4);
    std::vector<int> v(n);
    for (auto& x : v) x = i32();
    return v;
}

std::vector<double> ByteReader::f64_vec() {
    uint64_t n = u64();
    need(n * 8);
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
}

void ByteReader::magic(const char tag[4]) {
    need(4);
    for (int i = 0; i < 4; ++i) {
        if (bytes_[pos_ + static_cast<size_t>(i)] != static_cast<uint8_t>(tag[i]))
            throw ParseError(std::string("bad magic, expected ") + std::string(tag, 4));
    }
    pos_ += 4;
}

void ByteReader::expect_done() const {
    if (!done()) throw ParseError("trailing bytes after payload");
}

uint64_t fnv1a64(const std::vector<uint8_t>& bytes) {
    uint64_t h = 14695981039346656037ull;
    for (uint8_t b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

void write_topology(ByteWriter& w, const MeshTopology& t) {
    w.i32(t.num_vertices());
    for (int v = 0; v < t.num_vertices(); ++v) w.i32_vec(t.neighbors(v));
}

MeshTopology read_topology(ByteReader& r) {
    int n = r.i32();
    if (n < 0) throw ParseError("negative vertex count");
    std::vector<std::vector<int>> adj(static_cast<size_t>(n));
    for (auto& row : adj) row = r.i32_vec();
    return MeshTopology(n, std::move(adj));
}

void write_map(ByteWriter& w, const SamplingMap& m) {
    w.u8(static_cast<uint8_t>(m.direction()));
    w.i32(m.stride());
    w.i32(m.radius());
    w.i32(m.in_vertices());
    w.i32(m.out_vertices());
    w.i32_vec(m.flat_offsets());
    w.i32_vec(m.flat_indices());
}

SamplingMap read_map(ByteReader& r) {
    uint8_t dir = r.u8();
    if (dir > 1) throw ParseError("bad sampling map direction");
    int stride = r.i32();
    int radius = r.i32();
    int in_vertices = r.i32();
    int out_vertices = r.i32();
    std::vector<int> offsets = r.i32_vec();
    std::vector<int> indices = r.i32_vec();
    if (out_vertices < 0 || offsets.size() != static_cast<size_t>(out_vertices) + 1 || offsets.front() != 0 ||
        offsets.back() != static_cast<int>(indices.size()))
        throw ParseError("inconsistent sampling map offsets");
    std::vector<std::vector<int>> rows(static_cast<size_t>(out_vertices));
    for (int i = 0; i < out_vertices; ++i) {
        if (offsets[static_cast<size_t>(i)] > offsets[static_cast<size_t>(i) + 1])
            throw ParseError("inconsistent sampling map offsets");
        rows[static_cast<size_t>(i)].assign(indices.begin() + offsets[static_cast<size_t>(i)],
                                            indices.begin() + offsets[static_cast<size_t>(i) + 1]);
    }
    return SamplingMap(static_cast<MapDirection>(dir), stride, radius, in_vertices, std::move(rows));
}

ByteWriter encode_hierarchy(const SamplingHierarchy& h) {
    ByteWriter w;
    w.magic(kHierarchyMagic);
    w.u32(kHierarchyVersion);
    write_topology(w, h.base());
    w.i32(h.depth());
    for (int i = 0; i < h.depth(); ++i) {
        const auto& level = h.level(i);
        w.i32(level.stride);
        w.i32(level.radius);
        w.i32_vec(level.selected);
        write_topology(w, level.coarse);
        write_map(w, level.down);
        write_map(w, level.up);
    }
    return w;
}

}  // namespace

void save_hierarchy(const SamplingHierarchy& hierarchy, const std::string& path) {
    encode_hierarchy(hierarchy).save(path);
}

SamplingHierarchy load_hierarchy(const std::string& path) {
    ByteReader r = ByteReader::load(path);
    r.magic(kHierarchyMagic);
    uint32_t version = r.u32();
    if (version != kHierarchyVersion)
        throw ParseError("unsupported hierarchy file version " + std::to_string(version));
    MeshTopology base = read_topology(r);
    int depth = r.i32();
    if (depth < 0) throw ParseError("negative hierarchy depth");
    std::vector<HierarchyLevel> levels;
    levels.reserve(static_cast<size_t>(depth));
    for (int i = 0; i < depth; ++i) {
        int stride = r.i32();
        int radius = r.i32();
        std::vector<int> selected = r.i32_vec();
        MeshTopology coarse = read_topology(r);
        SamplingMap down = read_map(r);
        SamplingMap up = read_map(r);
        levels.push_back(HierarchyLevel{stride, radius, std::move(selected), std::move(coarse),
                                        std::move(down), std::move(up)});
    }
    r.expect_done();
    return SamplingHierarchy(std::move(base), std::move(levels));
}

uint64_t hierarchy_fingerprint(const SamplingHierarchy& hierarchy) {
    return fnv1a64(encode_hierarchy(hierarchy).bytes());
}

}  // namespace vcmesh

#pragma once
// Single-file model container. Layout: magic, format version, section
// count, then named sections, each carrying its own length and CRC so a
// reader can load just the gate or one forest and corruption is pinned to
// a section by name. All numerics are little-endian and fixed width; the
// byte layout is documented in docs/format.md and must stay in sync.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/edge_forest.hpp"
#include "sobd/gating.hpp"
#include "sobd/gmm.hpp"
#include "sobd/linalg.hpp"
#include "sobd/pca.hpp"
#include "sobd/situations.hpp"
#include "sobd/svm_sgd.hpp"

namespace sobd {

inline constexpr char kContainerMagic[8] = {'S', 'O', 'B', 'D', 'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct ModelContainer {
    std::map<std::string, std::string> meta;  // sorted on disk, key=value lines
    std::optional<PcaModel> pca;
    std::optional<GmmModel> gmm;
    std::optional<SituationPartition> partition;
    std::optional<GatingModel> gate;
    std::vector<EdgeForest> forests;  // indexed by situation id when present

    // Cross-section consistency; presence of individual sections is up to
    // the pipeline stage that wrote the file.
    void validate() const {
        if (!forests.empty()) {
            require(partition.has_value(), "container: forests without a partition");
            require(static_cast<int>(forests.size()) == partition->k(),
                    "container: ", forests.size(), " forests for ", partition->k(),
                    " situations");
        }
        if (gate.has_value()) {
            require(partition.has_value(), "container: gate without a partition");
            require(gate->situation_count() == partition->k(),
                    "container: gate covers ", gate->situation_count(), " of ",
                    partition->k(), " situations");
        }
    }
};

namespace detail {

struct ByteWriter {
    std::string bytes;

    void u8(std::uint8_t v) { bytes.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

struct ByteReader {
    const std::uint8_t* data = nullptr;
    std::size_t size = 0;
    std::size_t pos = 0;
    std::string section;  // names the offender in error messages

    void need(std::size_t n) const {
        require(pos + n <= size, "container: section '", section, "' truncated");
    }
    std::uint8_t u8() {
        need(1);
        return data[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(data[pos++]) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos++]) << (8 * i);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    void done() const {
        require(pos == size, "container: section '", section, "' has trailing bytes");
    }
};

inline void write_f64s(ByteWriter& w, const std::vector<double>& v) {
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (double x : v) w.f64(x);
}
inline std::vector<double> read_f64s(ByteReader& r) {
    std::vector<double> v(r.u32());
    for (double& x : v) x = r.f64();
    return v;
}
inline void write_f32s(ByteWriter& w, const std::vector<float>& v) {
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (float x : v) w.f32(x);
}
inline std::vector<float> read_f32s(ByteReader& r) {
    std::vector<float> v(r.u32());
    for (float& x : v) x = r.f32();
    return v;
}
inline void write_i32s(ByteWriter& w, const std::vector<int>& v) {
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (int x : v) w.i32(x);
}
inline std::vector<int> read_i32s(ByteReader& r) {
    std::vector<int> v(r.u32());
    for (int& x : v) x = r.i32();
    return v;
}
inline void write_matrix(ByteWriter& w, const MatrixD& m) {
    w.u32(static_cast<std::uint32_t>(m.rows));
    w.u32(static_cast<std::uint32_t>(m.cols));
    for (double x : m.data) w.f64(x);
}
inline MatrixD read_matrix(ByteReader& r) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    MatrixD m(rows, cols);
    for (double& x : m.data) x = r.f64();
    return m;
}

inline std::string encode_meta(const std::map<std::string, std::string>& meta) {
    std::string out;
    for (const auto& [key, value] : meta) {
        require(!key.empty() && key.find('=') == std::string::npos &&
                    key.find('\n') == std::string::npos,
                "container: invalid meta key '", key, "'");
        require(value.find('\n') == std::string::npos,
                "container: meta value for '", key, "' contains a newline");
        out += key;
        out += '=';
        out += value;
        out += '\n';
    }
    return out;
}

inline std::map<std::string, std::string> decode_meta(const std::string& text) {
    std::map<std::string, std::string> meta;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        require(end != std::string::npos, "container: meta line without newline");
        const std::string line = text.substr(start, end - start);
        const std::size_t eq = line.find('=');
        require(eq != std::string::npos && eq > 0, "container: malformed meta line '",
                line, "'");
        meta[line.substr(0, eq)] = line.substr(eq + 1);
        start = end + 1;
    }
    return meta;
}

inline std::string encode_pca(const PcaModel& m) {
    ByteWriter w;
    write_f64s(w, m.mean);
    write_matrix(w, m.basis);
    return std::move(w.bytes);
}
inline PcaModel decode_pca(ByteReader& r) {
    PcaModel m;
    m.mean = read_f64s(r);
    m.basis = read_matrix(r);
    return m;
}

inline std::string encode_gmm(const GmmModel& m) {
    ByteWriter w;
    write_f64s(w, m.weights);
    write_matrix(w, m.means);
    write_matrix(w, m.variances);
    return std::move(w.bytes);
}
inline GmmModel decode_gmm(ByteReader& r) {
    GmmModel m;
    m.weights = read_f64s(r);
    m.means = read_matrix(r);
    m.variances = read_matrix(r);
    return m;
}

inline std::string encode_partition(const SituationPartition& p) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(p.kind));
    w.u32(static_cast<std::uint32_t>(p.situations.size()));
    for (const Situation& s : p.situations) {
        w.i32(s.id);
        w.u8(static_cast<std::uint8_t>(s.kind));
        w.i32(s.class_id);
        write_i32s(w, s.member_images);
        write_f32s(w, s.centroid);
    }
    return std::move(w.bytes);
}
inline SituationPartition decode_partition(ByteReader& r) {
    SituationPartition p;
    p.kind = static_cast<SituationKind>(r.u8());
    p.situations.resize(r.u32());
    for (Situation& s : p.situations) {
        s.id = r.i32();
        s.kind = static_cast<SituationKind>(r.u8());
        s.class_id = r.i32();
        s.member_images = read_i32s(r);
        s.centroid = read_f32s(r);
    }
    return p;
}

inline std::string encode_gate(const GatingModel& g) {
    ByteWriter w;
    w.f64(g.temperature);
    w.u32(static_cast<std::uint32_t>(g.models.size()));
    for (const LinearModel& m : g.models) {
        write_f32s(w, m.weights);
        w.f64(m.bias);
    }
    return std::move(w.bytes);
}
inline GatingModel decode_gate(ByteReader& r) {
    GatingModel g;
    g.temperature = r.f64();
    g.models.resize(r.u32());
    for (LinearModel& m : g.models) {
        m.weights = read_f32s(r);
        m.bias = r.f64();
    }
    return g;
}

inline std::string encode_forest(const EdgeForest& f) {
    ByteWriter w;
    w.u32(f.feature_layout);
    w.u32(static_cast<std::uint32_t>(f.stride));
    w.u32(static_cast<std::uint32_t>(f.trees.size()));
    for (const EdgeTree& t : f.trees) {
        const std::size_t n = t.feature.size();
        require(t.threshold.size() == n && t.left.size() == n && t.right.size() == n &&
                    t.count.size() == n && t.mask.size() == n,
                "container: ragged tree arrays");
        w.u32(static_cast<std::uint32_t>(n));
        for (std::int32_t v : t.feature) w.i32(v);
        for (float v : t.threshold) w.f32(v);
        for (std::int32_t v : t.left) w.i32(v);
        for (std::int32_t v : t.right) w.i32(v);
        for (std::uint32_t v : t.count) w.u32(v);
        for (const Bits256& b : t.mask)
            for (std::uint64_t word : b.w) w.u64(word);
    }
    return std::move(w.bytes);
}
inline EdgeForest decode_forest(ByteReader& r) {
    EdgeForest f;
    f.feature_layout = r.u32();
    f.stride = static_cast<int>(r.u32());
    f.trees.resize(r.u32());
    for (EdgeTree& t : f.trees) {
        const std::uint32_t n = r.u32();
        t.feature.resize(n);
        t.threshold.resize(n);
        t.left.resize(n);
        t.right.resize(n);
        t.count.resize(n);
        t.mask.resize(n);
        for (std::int32_t& v : t.feature) v = r.i32();
        for (float& v : t.threshold) v = r.f32();
        for (std::int32_t& v : t.left) v = r.i32();
        for (std::int32_t& v : t.right) v = r.i32();
        for (std::uint32_t& v : t.count) v = r.u32();
        for (Bits256& b : t.mask)
            for (std::uint64_t& word : b.w) word = r.u64();
    }
    return f;
}

inline std::uint32_t payload_crc(const std::string& payload) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
                static_cast<uInt>(payload.size())));
}

inline void append_section(ByteWriter& w, const std::string& name,
                           const std::string& payload) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes += name;
    w.u64(payload.size());
    w.u32(payload_crc(payload));
    w.bytes += payload;
}

}  // namespace detail

// Atomic save: temp file in the target directory, then rename.
inline void save_container(const ModelContainer& c, const std::string& path) {
    c.validate();
    detail::ByteWriter w;
    w.bytes.append(kContainerMagic, sizeof kContainerMagic);
    w.u32(kContainerVersion);

    std::vector<std::pair<std::string, std::string>> sections;
    sections.emplace_back("meta", detail::encode_meta(c.meta));
    if (c.pca) sections.emplace_back("pca", detail::encode_pca(*c.pca));
    if (c.gmm) sections.emplace_back("gmm", detail::encode_gmm(*c.gmm));
    if (c.partition)
        sections.emplace_back("partition", detail::encode_partition(*c.partition));
    if (c.gate) sections.emplace_back("gate", detail::encode_gate(*c.gate));
    for (std::size_t k = 0; k < c.forests.size(); ++k)
        sections.emplace_back(str_cat("forest.", k), detail::encode_forest(c.forests[k]));

    w.u32(static_cast<std::uint32_t>(sections.size()));
    for (const auto& [name, payload] : sections) detail::append_section(w, name, payload);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "container: cannot write ", tmp);
        out.write(w.bytes.data(), static_cast<std::streamsize>(w.bytes.size()));
        require(out.good(), "container: failed writing ", tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    require(!ec, "container: rename to ", path, " failed: ", ec.message());
}

inline ModelContainer load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "container: cannot open ", path);
    std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

    detail::ByteReader header;
    header.data = reinterpret_cast<const std::uint8_t*>(bytes.data());
    header.size = bytes.size();
    header.section = "header";
    header.need(sizeof kContainerMagic);
    require(std::equal(kContainerMagic, kContainerMagic + sizeof kContainerMagic,
                       bytes.data()),
            "container: ", path, " is not a model container (bad magic)");
    header.pos = sizeof kContainerMagic;
    const std::uint32_t version = header.u32();
    require(version == kContainerVersion, "container: version ", version,
            " unsupported, expected ", kContainerVersion);
    const std::uint32_t section_count = header.u32();

    ModelContainer c;
    std::map<std::size_t, EdgeForest> forests_by_id;
    for (std::uint32_t s = 0; s < section_count; ++s) {
        const std::uint16_t name_len = header.u16();
        header.need(name_len);
        const std::string name(bytes.data() + header.pos, name_len);
        header.pos += name_len;
        header.section = name;
        const std::uint64_t payload_len = header.u64();
        const std::uint32_t crc = header.u32();
        header.need(payload_len);

        const std::string payload(bytes.data() + header.pos, payload_len);
        header.pos += payload_len;
        require(detail::payload_crc(payload) == crc,
                "container: checksum mismatch in section '", name, "'");

        detail::ByteReader r;
        r.data = reinterpret_cast<const std::uint8_t*>(payload.data());
        r.size = payload.size();
        r.section = name;
        if (name == "meta") {
            c.meta = detail::decode_meta(payload);
        } else if (name == "pca") {
            c.pca = detail::decode_pca(r);
            r.done();
        } else if (name == "gmm") {
            c.gmm = detail::decode_gmm(r);
            r.done();
        } else if (name == "partition") {
            c.partition = detail::decode_partition(r);
            r.done();
        } else if (name == "gate") {
            c.gate = detail::decode_gate(r);
            r.done();
        } else if (name.rfind("forest.", 0) == 0) {
            const std::size_t id = std::stoul(name.substr(7));
            require(!forests_by_id.count(id), "container: duplicate section '", name, "'");
            forests_by_id[id] = detail::decode_forest(r);
            r.done();
        } else {
            fail("container: unknown section '", name, "'");
        }
    }
    header.section = "header";
    header.done();

    if (!forests_by_id.empty()) {
        require(forests_by_id.rbegin()->first == forests_by_id.size() - 1,
                "container: forest sections are not contiguous from 0");
        c.forests.resize(forests_by_id.size());
        for (auto& [id, forest] : forests_by_id) c.forests[id] = std::move(forest);
    }
    c.validate();
    return c;
}

}  // namespace sobd

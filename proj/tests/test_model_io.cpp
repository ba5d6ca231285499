#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sobd/model_io.hpp"
#include "sobd/random.hpp"

using namespace sobd;

namespace {

std::string scratch_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "sobd_model_io_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    REQUIRE(out.good());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Exercises signed zero, subnormals, and irrational fractions so value
// equality would not paper over byte-level drift.
ModelContainer sample_container() {
    ModelContainer c;
    c.meta = {{"stage", "full"}, {"seed", "7"}, {"kind", "subclass"}};

    PcaModel pca;
    pca.mean = {0.1, -0.0, 5e-324, 3.141592653589793};
    pca.basis = MatrixD(4, 2);
    Rng prng(11);
    for (double& v : pca.basis.data) v = prng.normal();
    c.pca = pca;

    GmmModel gmm;
    gmm.weights = {0.25, 0.75};
    gmm.means = MatrixD(2, 3);
    gmm.variances = MatrixD(2, 3, 1e-6);
    for (std::size_t i = 0; i < gmm.means.data.size(); ++i)
        gmm.means.data[i] = 0.3 * static_cast<double>(i) - 0.7;
    c.gmm = gmm;

    SituationPartition part;
    part.kind = SituationKind::subclass;
    for (int j = 0; j < 2; ++j) {
        Situation s;
        s.id = j;
        s.kind = SituationKind::subclass;
        s.class_id = j + 1;
        s.member_images = {j, j + 2, j + 4};
        s.centroid = {0.5f, -0.0f, 1.25f * j};
        part.situations.push_back(s);
    }
    c.partition = part;

    GatingModel gate;
    gate.temperature = 0.7310585786300049;
    for (int j = 0; j < 2; ++j) {
        LinearModel m;
        m.weights = {0.1f, -2.5f, 3e-40f, 0.0f, 1.0f};
        m.bias = -0.25 + j;
        gate.models.push_back(m);
    }
    c.gate = gate;

    for (int f = 0; f < 2; ++f) {
        EdgeTree tree;
        tree.feature = {100 + f, -1, -1};
        tree.threshold = {0.125f, 0.0f, 0.0f};
        tree.left = {1, -1, -1};
        tree.right = {2, -1, -1};
        tree.count = {16, 9, 7};
        Bits256 a, b;
        for (int i = 0; i < 256; i += 3 + f) a.set(i);
        for (int i = 1; i < 256; i += 5) b.set(i);
        tree.mask = {Bits256{}, a, b};
        EdgeForest forest;
        forest.trees = {tree};
        c.forests.push_back(forest);
    }
    return c;
}

void require_equal(const ModelContainer& a, const ModelContainer& b) {
    REQUIRE(a.meta == b.meta);
    REQUIRE(a.pca.has_value() == b.pca.has_value());
    if (a.pca) {
        REQUIRE(a.pca->mean.size() == b.pca->mean.size());
        for (std::size_t i = 0; i < a.pca->mean.size(); ++i)
            REQUIRE(std::bit_cast<std::uint64_t>(a.pca->mean[i]) ==
                    std::bit_cast<std::uint64_t>(b.pca->mean[i]));
        REQUIRE(a.pca->basis.rows == b.pca->basis.rows);
        REQUIRE(a.pca->basis.cols == b.pca->basis.cols);
        REQUIRE(a.pca->basis.data == b.pca->basis.data);
    }
    REQUIRE(a.gmm.has_value() == b.gmm.has_value());
    if (a.gmm) {
        REQUIRE(a.gmm->weights == b.gmm->weights);
        REQUIRE(a.gmm->means.data == b.gmm->means.data);
        REQUIRE(a.gmm->variances.data == b.gmm->variances.data);
    }
    REQUIRE(a.partition.has_value() == b.partition.has_value());
    if (a.partition) {
        REQUIRE(a.partition->kind == b.partition->kind);
        REQUIRE(a.partition->situations.size() == b.partition->situations.size());
        for (std::size_t j = 0; j < a.partition->situations.size(); ++j) {
            const Situation& sa = a.partition->situations[j];
            const Situation& sb = b.partition->situations[j];
            REQUIRE(sa.id == sb.id);
            REQUIRE(sa.kind == sb.kind);
            REQUIRE(sa.class_id == sb.class_id);
            REQUIRE(sa.member_images == sb.member_images);
            REQUIRE(sa.centroid.size() == sb.centroid.size());
            for (std::size_t i = 0; i < sa.centroid.size(); ++i)
                REQUIRE(std::bit_cast<std::uint32_t>(sa.centroid[i]) ==
                        std::bit_cast<std::uint32_t>(sb.centroid[i]));
        }
    }
    REQUIRE(a.gate.has_value() == b.gate.has_value());
    if (a.gate) {
        REQUIRE(std::bit_cast<std::uint64_t>(a.gate->temperature) ==
                std::bit_cast<std::uint64_t>(b.gate->temperature));
        REQUIRE(a.gate->models.size() == b.gate->models.size());
        for (std::size_t j = 0; j < a.gate->models.size(); ++j) {
            REQUIRE(a.gate->models[j].weights == b.gate->models[j].weights);
            REQUIRE(a.gate->models[j].bias == b.gate->models[j].bias);
        }
    }
    REQUIRE(a.forests.size() == b.forests.size());
    for (std::size_t f = 0; f < a.forests.size(); ++f) {
        REQUIRE(a.forests[f].feature_layout == b.forests[f].feature_layout);
        REQUIRE(a.forests[f].stride == b.forests[f].stride);
        REQUIRE(a.forests[f].trees.size() == b.forests[f].trees.size());
        for (std::size_t t = 0; t < a.forests[f].trees.size(); ++t) {
            const EdgeTree& ta = a.forests[f].trees[t];
            const EdgeTree& tb = b.forests[f].trees[t];
            REQUIRE(ta.feature == tb.feature);
            REQUIRE(ta.threshold == tb.threshold);
            REQUIRE(ta.left == tb.left);
            REQUIRE(ta.right == tb.right);
            REQUIRE(ta.count == tb.count);
            REQUIRE(ta.mask.size() == tb.mask.size());
            for (std::size_t n = 0; n < ta.mask.size(); ++n)
                REQUIRE(ta.mask[n].w == tb.mask[n].w);
        }
    }
}

}  // namespace

TEST_CASE("container round-trips every section bit-exactly") {
    const std::string path = scratch_path("roundtrip.sobd");
    const ModelContainer original = sample_container();
    save_container(original, path);
    const ModelContainer loaded = load_container(path);
    require_equal(original, loaded);
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
}

TEST_CASE("saving is deterministic and save-load-save is identity") {
    const std::string pa = scratch_path("det_a.sobd");
    const std::string pb = scratch_path("det_b.sobd");
    const ModelContainer c = sample_container();
    save_container(c, pa);
    save_container(c, pb);
    REQUIRE(file_bytes(pa) == file_bytes(pb));

    const std::string pc = scratch_path("det_c.sobd");
    save_container(load_container(pa), pc);
    REQUIRE(file_bytes(pa) == file_bytes(pc));
}

TEST_CASE("partial containers round-trip") {
    const std::string path = scratch_path("partial.sobd");
    ModelContainer c;
    c.meta["stage"] = "features";
    c.pca = sample_container().pca;
    c.gmm = sample_container().gmm;
    save_container(c, path);
    const ModelContainer loaded = load_container(path);
    require_equal(c, loaded);
    CHECK_FALSE(loaded.partition.has_value());
    CHECK(loaded.forests.empty());
}

TEST_CASE("truncated files name the damaged section") {
    const std::string path = scratch_path("trunc.sobd");
    save_container(sample_container(), path);
    const std::string bytes = file_bytes(path);

    const std::string cut = scratch_path("trunc_cut.sobd");
    write_bytes(cut, bytes.substr(0, bytes.size() - 7));
    CHECK_THROWS_WITH(load_container(cut),
                      Catch::Matchers::ContainsSubstring("truncated") &&
                          Catch::Matchers::ContainsSubstring("forest.1"));
}

TEST_CASE("corrupted payload bytes fail the section checksum") {
    const std::string path = scratch_path("corrupt.sobd");
    save_container(sample_container(), path);
    std::string bytes = file_bytes(path);

    // Flip one byte inside the gate payload: name, length, crc, then data.
    const std::size_t name_pos = bytes.find("gate");
    REQUIRE(name_pos != std::string::npos);
    const std::size_t payload_pos = name_pos + 4 + 8 + 4;
    bytes[payload_pos + 3] = static_cast<char>(bytes[payload_pos + 3] ^ 0x40);
    const std::string bad = scratch_path("corrupt_bad.sobd");
    write_bytes(bad, bytes);
    CHECK_THROWS_WITH(load_container(bad),
                      Catch::Matchers::ContainsSubstring("checksum mismatch") &&
                          Catch::Matchers::ContainsSubstring("gate"));
}

TEST_CASE("version and magic gates") {
    const std::string path = scratch_path("version.sobd");
    save_container(sample_container(), path);
    std::string bytes = file_bytes(path);

    std::string wrong_version = bytes;
    wrong_version[8] = 2;
    const std::string vp = scratch_path("version_bad.sobd");
    write_bytes(vp, wrong_version);
    CHECK_THROWS_WITH(load_container(vp),
                      Catch::Matchers::ContainsSubstring("version 2 unsupported"));

    std::string wrong_magic = bytes;
    wrong_magic[0] = 'X';
    const std::string mp = scratch_path("magic_bad.sobd");
    write_bytes(mp, wrong_magic);
    CHECK_THROWS_WITH(load_container(mp),
                      Catch::Matchers::ContainsSubstring("not a model container"));

    CHECK_THROWS_AS(load_container(scratch_path("missing.sobd")), Error);
}

TEST_CASE("inconsistent containers refuse to save") {
    ModelContainer no_partition;
    no_partition.forests.resize(1);
    CHECK_THROWS_WITH(save_container(no_partition, scratch_path("bad1.sobd")),
                      Catch::Matchers::ContainsSubstring("without a partition"));

    ModelContainer mismatch = sample_container();
    mismatch.forests.resize(1);
    CHECK_THROWS_WITH(save_container(mismatch, scratch_path("bad2.sobd")),
                      Catch::Matchers::ContainsSubstring("situations"));

    ModelContainer gate_mismatch = sample_container();
    gate_mismatch.gate->models.resize(1);
    CHECK_THROWS_WITH(save_container(gate_mismatch, scratch_path("bad3.sobd")),
                      Catch::Matchers::ContainsSubstring("gate"));

    ModelContainer bad_meta;
    bad_meta.meta["a=b"] = "x";
    CHECK_THROWS_AS(save_container(bad_meta, scratch_path("bad4.sobd")), Error);
}

TEST_CASE("a trained forest predicts identically after a round-trip") {
    std::vector<Image> images;
    std::vector<LabeledSegmentation> segs;
    Rng rng(99);
    for (int i = 0; i < 4; ++i) {
        Image img(64, 64);
        LabeledSegmentation seg(64, 64);
        seg.map_segment_to_class(1, 3);
        const int split = 24 + i * 4;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const int base = x < split ? 70 : 180;
                const int v = std::clamp(
                    base + static_cast<int>(rng.uniform_int(21)) - 10, 0, 255);
                img.set(x, y, static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v),
                        static_cast<std::uint8_t>(v));
                if (x >= split) seg.set_segment(x, y, 1);
            }
        images.push_back(img);
        segs.push_back(seg);
    }
    std::vector<ForestTrainImage> train_input;
    for (int i = 0; i < 4; ++i) train_input.push_back({&images[i], &segs[i]});

    ForestConfig cfg;
    cfg.trees = 2;
    cfg.patch_budget = 300;
    const EdgeForest forest = train_forest(train_input, cfg, 1234);

    ModelContainer c;
    c.meta["stage"] = "forests";
    SituationPartition part;
    part.kind = SituationKind::monolithic;
    Situation s;
    s.id = 0;
    s.member_images = {0, 1, 2, 3};
    part.situations.push_back(s);
    c.partition = part;
    c.forests.push_back(forest);

    const std::string path = scratch_path("forest_roundtrip.sobd");
    save_container(c, path);
    const ModelContainer loaded = load_container(path);

    const BoundaryMap before = predict(forest, images[0]);
    const BoundaryMap after = predict(loaded.forests[0], images[0]);
    REQUIRE(before.values == after.values);
}

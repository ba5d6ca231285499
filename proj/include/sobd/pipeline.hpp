#pragma once

// Pipeline stages shared by the CLI subcommands and the end-to-end tests:
// feature model fitting, dataset encoding, partition building, per-situation
// forest training, gated prediction, and deterministic result serialization.
//
// Every stage derives its randomness from (seed, stage tag), so a fixed seed
// and corpus reproduce the same artifacts byte for byte regardless of which
// subcommands ran in between.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/boundaries.hpp"
#include "sobd/channels.hpp"
#include "sobd/dense_sift.hpp"
#include "sobd/edge_forest.hpp"
#include "sobd/fisher.hpp"
#include "sobd/fusion.hpp"
#include "sobd/gating.hpp"
#include "sobd/gmm.hpp"
#include "sobd/manifest.hpp"
#include "sobd/model_io.hpp"
#include "sobd/pca.hpp"
#include "sobd/pr_eval.hpp"
#include "sobd/situations.hpp"

namespace sobd {

// Stage tags for seed derivation. Forest seeds also mix in the situation id,
// so the monolithic model is literally the one-situation special case.
inline constexpr std::uint64_t kSeedFeatures = 0x66656174;  // "feat"
inline constexpr std::uint64_t kSeedSample = 0x73616d70;    // "samp"
inline constexpr std::uint64_t kSeedPartition = 0x70617274; // "part"
inline constexpr std::uint64_t kSeedGate = 0x67617465;      // "gate"
inline constexpr std::uint64_t kSeedForests = 0x666f7273;   // "fors"

struct DescriptorConfig {
    SiftParams sift;
    int pca_dim = 32;
    int gmm_components = 16;
    std::size_t fit_sample_budget = 60000;  // local descriptors for PCA+GMM fitting
};

struct FeatureModels {
    PcaModel pca;
    GmmModel gmm;
};

// Fits PCA and the GMM vocabulary on a seeded subsample of training-image
// descriptors. Rows are gathered in (image, grid position) order, so the fit
// is independent of thread count.
inline FeatureModels fit_feature_models(const DatasetManifest& manifest,
                                        const DescriptorConfig& cfg, std::uint64_t seed,
                                        const WarnSink& sink = {}) {
    const std::vector<int> train = manifest.split_indices(Split::train);
    require(!train.empty(), "features: no training images");
    require(cfg.pca_dim > 0, "features: PCA dim must be positive");
    require(cfg.gmm_components > 0, "features: GMM component count must be positive");
    require(cfg.fit_sample_budget >= static_cast<std::size_t>(10) * cfg.gmm_components,
            "features: sample budget ", cfg.fit_sample_budget, " below GMM minimum ",
            10 * cfg.gmm_components);

    const std::size_t quota =
        (cfg.fit_sample_budget + train.size() - 1) / train.size();
    std::vector<MatrixF> picked(train.size());
    parallel_for(0, static_cast<std::int64_t>(train.size()), [&](std::int64_t i) {
        const ManifestEntry& entry = manifest.entries[train[i]];
        const Image img = load_image_checked(entry.image_path);
        const LocalDescriptorField field = dense_descriptors(img, cfg.sift);
        const std::size_t n = static_cast<std::size_t>(field.count());

        std::vector<std::uint32_t> idx(n);
        for (std::size_t j = 0; j < n; ++j) idx[j] = static_cast<std::uint32_t>(j);
        std::size_t take = n;
        if (n > quota) {
            // Partial Fisher-Yates, then ascending order for determinism.
            Rng rng(derive_seed(seed, kSeedSample, static_cast<std::uint64_t>(train[i])));
            for (std::size_t j = 0; j < quota; ++j)
                std::swap(idx[j], idx[j + rng.uniform_int(n - j)]);
            take = quota;
            std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
        }
        MatrixF& out = picked[i];
        out = MatrixF(take, field.dim());
        for (std::size_t j = 0; j < take; ++j) {
            const float* src = field.descriptors.row(idx[j]);
            std::copy(src, src + field.dim(), out.row(j));
        }
    });

    std::size_t total = 0;
    for (const MatrixF& m : picked) total += m.rows;
    require(total > static_cast<std::size_t>(cfg.pca_dim),
            "features: ", total, " sampled descriptors cannot fit a ", cfg.pca_dim,
            "-dim PCA");
    MatrixF samples(total, picked[0].cols);
    std::size_t at = 0;
    for (const MatrixF& m : picked) {
        std::copy(m.data.begin(), m.data.end(), samples.row(at));
        at += m.rows;
    }

    FeatureModels models;
    models.pca = fit_pca(samples, cfg.pca_dim);

    MatrixD proj(total, cfg.pca_dim);
    parallel_for(0, static_cast<std::int64_t>(total), [&](std::int64_t r) {
        models.pca.project(samples.row(r), proj.row(r));
    });
    models.gmm = fit_gmm(proj, cfg.gmm_components, derive_seed(seed, 0x676d6dfe), nullptr, sink);
    return models;
}

inline GlobalDescriptor encode_image(const Image& img, const PcaModel& pca, const GmmModel& gmm,
                                     const SiftParams& sift = {}) {
    return fisher_encode(dense_descriptors(img, sift), pca, gmm);
}

// Global descriptor per manifest entry (train and test rows alike). The
// outer loop stays serial; the per-image encoder parallelizes internally.
inline MatrixF encode_dataset(const DatasetManifest& manifest, const FeatureModels& models,
                              const SiftParams& sift = {}) {
    require(!manifest.entries.empty(), "features: empty manifest");
    const int dim = fisher_dim(models.gmm.components(), models.gmm.dim());
    MatrixF out(manifest.entries.size(), dim);
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const Image img = load_image_checked(manifest.entries[i].image_path);
        const GlobalDescriptor d = encode_image(img, models.pca, models.gmm, sift);
        require(static_cast<int>(d.size()) == dim, "features: descriptor dim drift");
        std::copy(d.begin(), d.end(), out.row(i));
    }
    return out;
}

struct PartitionConfig {
    SituationKind kind = SituationKind::class_specific;
    int subclasses_per_class = 2;  // subclass kind
    int cluster_count = 8;         // agnostic kind
    int min_situation_size = 3;    // below this, fold into nearest centroid
};

inline SituationPartition build_partition(const DatasetManifest& manifest,
                                          const MatrixF& descriptors, const PartitionConfig& cfg,
                                          std::uint64_t seed, const WarnSink& sink = {}) {
    SituationPartition p;
    switch (cfg.kind) {
        case SituationKind::monolithic:
            p = build_monolithic_situations(manifest);
            break;
        case SituationKind::class_specific:
            p = build_class_situations(manifest);
            break;
        case SituationKind::subclass:
            p = build_subclass_situations(manifest, descriptors, cfg.subclasses_per_class, seed);
            break;
        case SituationKind::agnostic:
            p = build_agnostic_situations(manifest, descriptors, cfg.cluster_count, seed);
            break;
    }
    if (cfg.min_situation_size > 1)
        p = merge_small_situations(std::move(p), descriptors, cfg.min_situation_size, sink);
    validate_partition(p, manifest);
    return p;
}

// One forest per situation, trained on the situation's member images. Forest
// j depends only on (seed, j) and its member set; a monolithic partition
// therefore yields exactly the forest train_forest() gives on the full
// training split with derive_seed(seed, kSeedForests, 0).
inline std::vector<EdgeForest> train_situation_forests(
    const DatasetManifest& manifest, const SituationPartition& partition,
    const ForestConfig& cfg, std::uint64_t seed, const WarnSink& sink = {},
    std::vector<ForestTrainReport>* reports = nullptr) {
    validate_partition(partition, manifest);

    std::set<int> needed;
    for (const Situation& s : partition.situations)
        needed.insert(s.member_images.begin(), s.member_images.end());
    const std::vector<int> order(needed.begin(), needed.end());

    std::vector<Image> images(manifest.entries.size());
    std::vector<LabeledSegmentation> segs(manifest.entries.size());
    parallel_for(0, static_cast<std::int64_t>(order.size()), [&](std::int64_t i) {
        const ManifestEntry& e = manifest.entries[order[i]];
        images[order[i]] = load_image_checked(e.image_path);
        segs[order[i]] = load_segmentation(e.segmentation_path);
    });

    if (reports) reports->assign(partition.k(), {});
    std::vector<EdgeForest> forests(partition.k());
    for (const Situation& s : partition.situations) {
        std::vector<ForestTrainImage> input;
        input.reserve(s.member_images.size());
        for (int m : s.member_images) input.push_back({&images[m], &segs[m]});
        forests[s.id] =
            train_forest(input, cfg, derive_seed(seed, kSeedForests, static_cast<std::uint64_t>(s.id)),
                         sink, reports ? &(*reports)[s.id] : nullptr);
    }
    return forests;
}

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    require(res.ec == std::errc{}, "format_double: conversion failed");
    return std::string(buf, res.ptr);
}

inline void stamp_pipeline_meta(ModelContainer& c, const DescriptorConfig& cfg,
                                std::uint64_t seed) {
    c.meta["sift.patch"] = std::to_string(cfg.sift.patch);
    c.meta["sift.stride"] = std::to_string(cfg.sift.stride);
    c.meta["sift.cells"] = std::to_string(cfg.sift.cells);
    c.meta["sift.bins"] = std::to_string(cfg.sift.bins);
    c.meta["sift.clamp"] = format_double(cfg.sift.clamp);
    c.meta["pca.dim"] = std::to_string(cfg.pca_dim);
    c.meta["gmm.k"] = std::to_string(cfg.gmm_components);
    c.meta["seed"] = std::to_string(seed);
}

inline SiftParams sift_params_from_meta(const std::map<std::string, std::string>& meta) {
    SiftParams p;
    auto get_int = [&](const char* key, int& out) {
        auto it = meta.find(key);
        if (it != meta.end()) out = std::stoi(it->second);
    };
    get_int("sift.patch", p.patch);
    get_int("sift.stride", p.stride);
    get_int("sift.cells", p.cells);
    get_int("sift.bins", p.bins);
    if (auto it = meta.find("sift.clamp"); it != meta.end()) p.clamp = std::stod(it->second);
    return p;
}

enum class GateMode { learned, oracle };

inline GateMode parse_gate_mode(const std::string& s) {
    if (s == "learned") return GateMode::learned;
    if (s == "oracle") return GateMode::oracle;
    throw Error(str_cat("unknown gate mode '", s, "' (expected learned or oracle)"));
}

inline std::vector<const EdgeForest*> forest_pointers(const ModelContainer& model) {
    std::vector<const EdgeForest*> ptrs;
    ptrs.reserve(model.forests.size());
    for (const EdgeForest& f : model.forests) ptrs.push_back(&f);
    return ptrs;
}

// Gate distribution for one image. A one-situation container needs no gate;
// its probability vector is trivially {1}.
inline std::vector<double> model_gate_probabilities(const ModelContainer& model, const Image& img,
                                                    GateMode mode,
                                                    const std::vector<int>& class_labels = {}) {
    require(model.partition.has_value(), "predict: container has no partition");
    if (model.partition->k() == 1) return {1.0};
    if (mode == GateMode::oracle)
        return oracle_gate_probabilities(*model.partition, class_labels);
    require(model.pca && model.gmm && model.gate,
            "predict: container lacks the descriptor or gate sections a learned gate needs");
    return gate_probabilities(*model.gate,
                              encode_image(img, *model.pca, *model.gmm,
                                           sift_params_from_meta(model.meta)));
}

struct ImagePrediction {
    BoundaryMap map;
    std::vector<double> probs;  // full gate distribution, situation-id order
    SelectionLog log;
};

inline ImagePrediction predict_image(const ModelContainer& model, const Image& img,
                                     const SelectionRule& rule,
                                     GateMode mode = GateMode::learned,
                                     const std::vector<int>& class_labels = {}) {
    require(!model.forests.empty(), "predict: container has no forests");
    std::vector<double> probs = model_gate_probabilities(model, img, mode, class_labels);
    FusedPrediction fused =
        fused_situational_predict(img, probs, forest_pointers(model), rule);
    return {std::move(fused.map), std::move(probs), std::move(fused.log)};
}

inline BoundaryMap class_contour(const ModelContainer& model, const ChannelStack& stack,
                                 const std::vector<double>& probs, int class_id) {
    require(model.partition.has_value(), "predict: container has no partition");
    return semantic_contour(stack, *model.partition, probs, forest_pointers(model), class_id);
}

// Ground truth for matching. The raw extraction marks both sides of each
// segment transition (two-pixel curves); thinning collapses them to the
// single-pixel curves one-to-one correspondence expects.
inline BoundaryMap evaluation_ground_truth(const LabeledSegmentation& seg,
                                           const BoundaryMode& mode = BoundaryMode::all_classes()) {
    return boundary_thin(extract_gt_boundaries(seg, mode), 0.5);
}

// ---- Full training drive --------------------------------------------------

struct TrainConfig {
    DescriptorConfig descriptor;
    PartitionConfig partition;
    GatingConfig gate;
    ForestConfig forest;
    std::uint64_t seed = 7;
    bool with_gate = true;  // ignored for one-situation partitions
};

struct TrainOutput {
    ModelContainer model;
    MatrixF descriptors;  // fisher rows for every manifest entry
};

inline TrainOutput train_pipeline(const DatasetManifest& manifest, const TrainConfig& cfg,
                                  const WarnSink& sink = {}) {
    TrainOutput out;
    FeatureModels fm =
        fit_feature_models(manifest, cfg.descriptor, derive_seed(cfg.seed, kSeedFeatures), sink);
    out.descriptors = encode_dataset(manifest, fm, cfg.descriptor.sift);
    SituationPartition partition = build_partition(
        manifest, out.descriptors, cfg.partition, derive_seed(cfg.seed, kSeedPartition), sink);

    ModelContainer& c = out.model;
    c.pca = std::move(fm.pca);
    c.gmm = std::move(fm.gmm);
    if (cfg.with_gate && partition.k() > 1)
        c.gate = train_gate(partition, out.descriptors, cfg.gate,
                            derive_seed(cfg.seed, kSeedGate), sink);
    c.forests = train_situation_forests(manifest, partition, cfg.forest,
                                        cfg.seed, sink);
    c.partition = std::move(partition);
    stamp_pipeline_meta(c, cfg.descriptor, cfg.seed);
    c.meta["partition.kind"] = to_string(c.partition->kind);
    return out;
}

// ---- Descriptor cache -----------------------------------------------------

// Sidecar file for the per-image global descriptors, so clustering and gate
// training subcommands don't recompute them. Same byte conventions as the
// model container: little-endian fixed-width fields, one crc32 over the data.
inline constexpr char kDescriptorMagic[9] = "SOBDDESC";

inline void save_descriptor_cache(const std::string& path, const MatrixF& m) {
    detail::ByteWriter w;
    w.bytes.append(kDescriptorMagic, 8);
    w.u32(1);
    w.u64(m.rows);
    w.u64(m.cols);
    detail::ByteWriter payload;
    for (float v : m.data) payload.f32(v);
    w.u32(detail::payload_crc(payload.bytes));
    w.bytes += payload.bytes;

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "descriptor cache: cannot write ", tmp);
        out.write(w.bytes.data(), static_cast<std::streamsize>(w.bytes.size()));
        require(out.good(), "descriptor cache: failed writing ", tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    require(!ec, "descriptor cache: rename to ", path, " failed: ", ec.message());
}

inline MatrixF load_descriptor_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "descriptor cache: cannot open ", path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    detail::ByteReader r{reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size(), 0,
                         "descriptors"};
    r.need(8);
    require(std::equal(kDescriptorMagic, kDescriptorMagic + 8, bytes.data()),
            path, " is not a descriptor cache (bad magic)");
    r.pos += 8;
    const std::uint32_t version = r.u32();
    require(version == 1, "descriptor cache: version ", version, " unsupported, expected 1");
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    const std::uint32_t crc = r.u32();
    r.need(rows * cols * 4);
    require(detail::payload_crc(bytes.substr(r.pos)) == crc,
            "descriptor cache: checksum mismatch");
    MatrixF m(rows, cols);
    for (float& v : m.data) v = r.f32();
    r.done();
    return m;
}

// ---- Result serialization ---------------------------------------------------

// The evaluation reports are JSON written with fixed key order and
// shortest-round-trip number formatting, so equal results are equal bytes.
inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    return out;
}

inline std::string json_number(double v) {
    require(std::isfinite(v), "json: non-finite number");
    return format_double(v);
}

inline std::string json_array(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += json_number(v[i]);
    }
    out += "]";
    return out;
}

inline std::string curve_json_fields(const PRCurve& c, const char* indent) {
    std::string out;
    out += str_cat(indent, "\"ap\": ", json_number(c.ap), ",\n");
    out += str_cat(indent, "\"p_at_20\": ", json_number(c.p_at_20), ",\n");
    out += str_cat(indent, "\"p_at_50\": ", json_number(c.p_at_50), ",\n");
    out += str_cat(indent, "\"thresholds\": ", json_array(c.thresholds), ",\n");
    out += str_cat(indent, "\"precision\": ", json_array(c.precision), ",\n");
    out += str_cat(indent, "\"recall\": ", json_array(c.recall));
    return out;
}

inline std::string dataset_eval_json(const PRCurve& c, double tol_frac, std::size_t images) {
    std::string out = "{\n";
    out += curve_json_fields(c, "  ");
    out += ",\n";
    out += str_cat("  \"tolerance_frac\": ", json_number(tol_frac), ",\n");
    out += str_cat("  \"images\": ", images, "\n");
    out += "}\n";
    return out;
}

inline std::string sbd_eval_json(const SbdResult& r, double tol_frac) {
    std::string out = "{\n  \"classes\": [\n";
    for (std::size_t i = 0; i < r.classes.size(); ++i) {
        out += "    {\n";
        out += str_cat("      \"class_id\": ", r.classes[i].class_id, ",\n");
        out += curve_json_fields(r.classes[i].curve, "      ");
        out += "\n    }";
        out += i + 1 < r.classes.size() ? ",\n" : "\n";
    }
    out += "  ],\n  \"excluded_classes\": [";
    for (std::size_t i = 0; i < r.excluded_classes.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(r.excluded_classes[i]);
    }
    out += "],\n";
    out += str_cat("  \"mean_ap\": ", json_number(r.mean_ap), ",\n");
    out += str_cat("  \"tolerance_frac\": ", json_number(tol_frac), "\n");
    out += "}\n";
    return out;
}

// One JSONL line per predicted image: which situations fired and with what
// mass. `image` is the manifest image path.
inline std::string prediction_log_json(const std::string& image, const ImagePrediction& pred) {
    std::string out = "{\"image\": \"" + json_escape(image) + "\", \"selected\": [";
    for (std::size_t i = 0; i < pred.log.selected.size(); ++i) {
        if (i) out += ", ";
        out += str_cat("{\"id\": ", pred.log.selected[i].id, ", \"p\": ",
                       json_number(pred.log.selected[i].probability), "}");
    }
    out += str_cat("], \"z\": ", json_number(pred.log.z), ", \"probs\": ",
                   json_array(pred.probs), "}");
    return out;
}

inline std::string pr_table_text(const PRCurve& c) {
    std::string out = "threshold  precision  recall\n";
    char line[64];
    for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
        std::snprintf(line, sizeof line, "%9.4f  %9.4f  %6.4f\n", c.thresholds[i],
                      c.precision[i], c.recall[i]);
        out += line;
    }
    std::snprintf(line, sizeof line, "AP %.4f  P@20 %.4f  P@50 %.4f\n", c.ap, c.p_at_20,
                  c.p_at_50);
    out += line;
    return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot write ", tmp);
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        require(out.good(), "failed writing ", tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    require(!ec, "rename to ", path, " failed: ", ec.message());
}

}  // namespace sobd

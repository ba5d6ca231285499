// Command-line driver for the boundary detection pipeline. Subcommands map
// one-to-one onto the pipeline stages; every stochastic stage takes --seed
// and reruns with the same inputs overwrite their outputs byte-identically.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sobd/sobd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

sobd::WarnSink stderr_sink() {
    return [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
}

std::string scratch_base() {
    if (const char* env = std::getenv("SOBD_SCRATCH")) return env;
    return ".";
}

std::string image_stem(const sobd::ManifestEntry& entry) {
    return fs::path(entry.image_path).stem().string();
}

std::string pred_path(const std::string& dir, const sobd::ManifestEntry& entry) {
    return (fs::path(dir) / (image_stem(entry) + "_pred.png")).string();
}

std::string contour_path(const std::string& dir, const sobd::ManifestEntry& entry, int cls) {
    return (fs::path(dir) / (image_stem(entry) + "_c" + std::to_string(cls) + ".png")).string();
}

std::vector<int> split_entries(const sobd::DatasetManifest& manifest, const std::string& split) {
    if (split == "train") return manifest.split_indices(sobd::Split::train);
    if (split == "test") return manifest.split_indices(sobd::Split::test);
    if (split == "all") {
        std::vector<int> all(manifest.entries.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        return all;
    }
    throw sobd::Error(sobd::str_cat("unknown split '", split, "' (expected train, test or all)"));
}

sobd::SynthTexture parse_texture(const std::string& s) {
    if (s == "striped") return sobd::SynthTexture::striped;
    if (s == "plain") return sobd::SynthTexture::plain;
    if (s == "dotted") return sobd::SynthTexture::dotted;
    throw sobd::Error(sobd::str_cat("unknown texture '", s, "'"));
}

sobd::SynthBackground parse_background(const std::string& s) {
    if (s == "smooth") return sobd::SynthBackground::smooth;
    if (s == "cluttered") return sobd::SynthBackground::cluttered;
    throw sobd::Error(sobd::str_cat("unknown background '", s, "'"));
}

sobd::SynthShape parse_shape(const std::string& s) {
    if (s == "ellipse") return sobd::SynthShape::ellipse;
    if (s == "capsule") return sobd::SynthShape::capsule;
    throw sobd::Error(sobd::str_cat("unknown shape '", s, "'"));
}

sobd::SynthSpec parse_synth_spec(const std::string& path) {
    std::ifstream in(path);
    sobd::require(in.good(), "cannot open spec file ", path);
    json j = json::parse(in);

    sobd::SynthSpec spec;
    if (j.contains("images_per_class")) spec.images_per_class = j["images_per_class"].get<int>();
    if (j.contains("image_size")) spec.image_size = j["image_size"].get<int>();
    if (j.contains("noise_sigma")) spec.noise_sigma = j["noise_sigma"].get<double>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    sobd::require(j.contains("classes") && j["classes"].is_array(),
                  "spec file needs a 'classes' array");
    for (const json& c : j["classes"]) {
        sobd::SynthClassSpec cls;
        if (c.contains("texture")) cls.texture = parse_texture(c["texture"].get<std::string>());
        if (c.contains("background"))
            cls.background = parse_background(c["background"].get<std::string>());
        if (c.contains("shape")) cls.shape = parse_shape(c["shape"].get<std::string>());
        spec.classes.push_back(cls);
    }
    return spec;
}

// ---- subcommand option blocks ----------------------------------------------

struct SynthOpts {
    std::string out;
    std::string spec_file;
    int images_per_class = 0;  // 0 keeps the spec/default value
    int image_size = 0;
    double noise = -1.0;
    std::uint64_t seed = 7;
    bool seed_given = false;
};

struct FeaturesOpts {
    std::string manifest;
    std::string out;
    std::string cache;
    int pca_dim = 32;
    int gmm_k = 16;
    std::uint64_t budget = 60000;
    int sift_patch = 16;
    int sift_stride = 4;
    std::uint64_t seed = 7;
};

struct ClusterOpts {
    std::string manifest;
    std::string model;
    std::string cache;
    std::string kind = "class";
    std::string out;
    int subclasses = 2;
    int clusters = 8;
    int min_size = 3;
    std::uint64_t seed = 7;
};

struct TrainGateOpts {
    std::string manifest;
    std::string model;
    std::string cache;
    std::string out;
    int folds = 3;
    int epochs = 10;
    double holdout = 0.2;
    double temperature = 0.0;
    std::uint64_t seed = 7;
};

struct TrainForestsOpts {
    std::string manifest;
    std::string model;
    std::string out;
    int trees = 8;
    int budget = 25000;
    std::uint64_t seed = 7;
};

struct PredictOpts {
    std::string manifest;
    std::string model;
    std::string out;
    std::string split = "test";
    std::string mode = "learned";
    std::string log_file;
    int n = 5;
    double mass = 0.7;
    bool use_mass = false;
    bool class_contours = false;
};

struct EvalOpts {
    std::string manifest;
    std::string pred_dir;
    std::string out;
    std::string split = "test";
    double tol_frac = sobd::kDefaultToleranceFrac;
    bool table = false;
};

struct InfoOpts {
    std::string model;
};

// ---- subcommand bodies -------------------------------------------------------

int run_synth(const SynthOpts& o) {
    sobd::SynthSpec spec =
        o.spec_file.empty() ? sobd::default_synth_spec() : parse_synth_spec(o.spec_file);
    if (o.images_per_class > 0) spec.images_per_class = o.images_per_class;
    if (o.image_size > 0) spec.image_size = o.image_size;
    if (o.noise >= 0.0) spec.noise_sigma = o.noise;
    if (o.seed_given || o.spec_file.empty()) spec.seed = o.seed;

    const sobd::DatasetManifest manifest = sobd::generate(spec, o.out);
    std::cout << "wrote " << manifest.entries.size() << " images ("
              << manifest.split_indices(sobd::Split::train).size() << " train, "
              << manifest.split_indices(sobd::Split::test).size() << " test) to " << o.out
              << "\nmanifest: " << (fs::path(o.out) / "manifest.tsv").string() << "\n";
    return 0;
}

int run_features(const FeaturesOpts& o) {
    const sobd::DatasetManifest manifest = sobd::load_manifest(o.manifest, stderr_sink());

    sobd::DescriptorConfig cfg;
    cfg.pca_dim = o.pca_dim;
    cfg.gmm_components = o.gmm_k;
    cfg.fit_sample_budget = o.budget;
    cfg.sift.patch = o.sift_patch;
    cfg.sift.stride = o.sift_stride;

    const sobd::FeatureModels models = sobd::fit_feature_models(
        manifest, cfg, sobd::derive_seed(o.seed, sobd::kSeedFeatures), stderr_sink());
    const sobd::MatrixF descriptors = sobd::encode_dataset(manifest, models, cfg.sift);

    sobd::ModelContainer c;
    c.pca = models.pca;
    c.gmm = models.gmm;
    sobd::stamp_pipeline_meta(c, cfg, o.seed);
    c.meta["stage"] = "features";
    sobd::save_container(c, o.out);

    const std::string cache = o.cache.empty() ? o.out + ".desc" : o.cache;
    sobd::save_descriptor_cache(cache, descriptors);
    std::cout << "features: " << descriptors.rows << " descriptors of dim " << descriptors.cols
              << "\nmodel: " << o.out << "\ndescriptor cache: " << cache << "\n";
    return 0;
}

int run_cluster(const ClusterOpts& o) {
    const sobd::DatasetManifest manifest = sobd::load_manifest(o.manifest, stderr_sink());
    sobd::ModelContainer c = sobd::load_container(o.model);

    sobd::PartitionConfig cfg;
    cfg.kind = sobd::parse_situation_kind(o.kind);
    cfg.subclasses_per_class = o.subclasses;
    cfg.cluster_count = o.clusters;
    cfg.min_situation_size = o.min_size;

    sobd::MatrixF descriptors;
    if (!o.cache.empty()) {
        descriptors = sobd::load_descriptor_cache(o.cache);
    } else {
        sobd::require(cfg.kind == sobd::SituationKind::monolithic ||
                          cfg.kind == sobd::SituationKind::class_specific,
                      "clustering by appearance needs --desc-cache");
    }

    c.partition = sobd::build_partition(manifest, descriptors, cfg,
                                        sobd::derive_seed(o.seed, sobd::kSeedPartition),
                                        stderr_sink());
    // A stale gate or forest set would no longer line up with the partition.
    c.gate.reset();
    c.forests.clear();
    c.meta["partition.kind"] = sobd::to_string(c.partition->kind);
    c.meta["stage"] = "partition";
    sobd::save_container(c, o.out.empty() ? o.model : o.out);

    std::cout << "partition: kind=" << sobd::to_string(c.partition->kind)
              << " situations=" << c.partition->k() << "\n";
    for (const sobd::Situation& s : c.partition->situations)
        std::cout << "  situation " << s.id << ": class=" << s.class_id
                  << " members=" << s.member_images.size() << "\n";
    return 0;
}

int run_train_gate(const TrainGateOpts& o) {
    const sobd::DatasetManifest manifest = sobd::load_manifest(o.manifest, stderr_sink());
    sobd::ModelContainer c = sobd::load_container(o.model);
    sobd::require(c.partition.has_value(), "model has no partition; run cluster first");
    sobd::validate_partition(*c.partition, manifest);
    sobd::require(c.partition->k() > 1, "a one-situation model needs no gate");

    const sobd::MatrixF descriptors = sobd::load_descriptor_cache(o.cache);

    sobd::GatingConfig cfg;
    cfg.cv_folds = o.folds;
    cfg.epochs = o.epochs;
    cfg.calibration_holdout = o.holdout;
    cfg.temperature_override = o.temperature;

    c.gate = sobd::train_gate(*c.partition, descriptors, cfg,
                              sobd::derive_seed(o.seed, sobd::kSeedGate), stderr_sink());
    c.meta["stage"] = "gate";
    sobd::save_container(c, o.out.empty() ? o.model : o.out);
    std::cout << "gate: " << c.gate->situation_count() << " situations, temperature "
              << c.gate->temperature << "\n";
    return 0;
}

int run_train_forests(const TrainForestsOpts& o) {
    const sobd::DatasetManifest manifest = sobd::load_manifest(o.manifest, stderr_sink());
    sobd::ModelContainer c = sobd::load_container(o.model);
    sobd::require(c.partition.has_value(), "model has no partition; run cluster first");

    sobd::ForestConfig cfg;
    cfg.trees = o.trees;
    cfg.patch_budget = o.budget;

    c.forests = sobd::train_situation_forests(manifest, *c.partition, cfg, o.seed, stderr_sink());
    c.meta["forest.trees"] = std::to_string(cfg.trees);
    c.meta["forest.budget"] = std::to_string(cfg.patch_budget);
    c.meta["stage"] = "forests";
    sobd::save_container(c, o.out.empty() ? o.model : o.out);

    std::size_t nodes = 0;
    for (const sobd::EdgeForest& f : c.forests)
        for (const sobd::EdgeTree& t : f.trees) nodes += t.feature.size();
    std::cout << "forests: " << c.forests.size() << " x " << cfg.trees << " trees, " << nodes
              << " nodes total\n";
    return 0;
}

int run_predict(const PredictOpts& o) {
    const sobd::DatasetManifest manifest = sobd::load_manifest(o.manifest, stderr_sink());
    const sobd::ModelContainer model = sobd::load_container(o.model);
    sobd::require(!model.forests.empty(), "model has no forests; run train-forests first");
    const sobd::GateMode mode = sobd::parse_gate_mode(o.mode);

    sobd::SelectionRule rule;
    if (o.use_mass) {
        rule.mode = sobd::SelectionMode::mass;
        rule.mass = o.mass;
    } else {
        rule.n = o.n;
    }

    fs::create_directories(o.out);
    std::string log_lines;
    const std::vector<int> entries = split_entries(manifest, o.split);
    sobd::require(!entries.empty(), "no entries in split '", o.split, "'");

    for (int idx : entries) {
        const sobd::ManifestEntry& entry = manifest.entries[idx];
        const sobd::Image img = sobd::load_image_checked(entry.image_path);
        const sobd::ImagePrediction pred =
            sobd::predict_image(model, img, rule, mode, entry.class_labels);
        sobd::write_boundary_map_png(pred_path(o.out, entry), pred.map);

        if (o.class_contours) {
            const sobd::ChannelStack stack = sobd::compute_channels(img);
            for (const sobd::Situation& s : model.partition->situations)
                sobd::write_boundary_map_png(
                    contour_path(o.out, entry, s.class_id),
                    sobd::class_contour(model, stack, pred.probs, s.class_id));
        }
        log_lines += sobd::prediction_log_json(entry.image_path, pred);
        log_lines += "\n";
    }
    const std::string log_path =
        o.log_file.empty() ? (fs::path(o.out) / "predictions.jsonl").string() : o.log_file;
    sobd::write_text_file(log_path, log_lines);
    std::cout << "predicted " << entries.size() << " images to " << o.out << "\nlog: " << log_path
              << "\n";
    return 0;
}

int run_evaluate(const EvalOpts& o) {
    const sobd::DatasetManifest manifest = sobd::load_manifest(o.manifest, stderr_sink());
    const std::vector<int> entries = split_entries(manifest, o.split);
    sobd::require(!entries.empty(), "no entries in split '", o.split, "'");

    std::vector<sobd::BoundaryMap> preds, gts;
    for (int idx : entries) {
        const sobd::ManifestEntry& entry = manifest.entries[idx];
        preds.push_back(sobd::read_boundary_map_png(pred_path(o.pred_dir, entry)));
        gts.push_back(
            sobd::evaluation_ground_truth(sobd::load_segmentation(entry.segmentation_path)));
    }
    const sobd::PRCurve curve =
        sobd::dataset_eval(preds, gts, o.tol_frac, sobd::default_thresholds(), stderr_sink());

    if (!o.out.empty())
        sobd::write_text_file(o.out, sobd::dataset_eval_json(curve, o.tol_frac, preds.size()));
    if (o.table || o.out.empty()) std::cout << sobd::pr_table_text(curve);
    if (!o.out.empty()) std::cout << "results: " << o.out << "\n";
    return 0;
}

int run_sbd_eval(const EvalOpts& o) {
    const sobd::DatasetManifest manifest = sobd::load_manifest(o.manifest, stderr_sink());
    const std::vector<int> entries = split_entries(manifest, o.split);
    sobd::require(!entries.empty(), "no entries in split '", o.split, "'");

    std::set<int> class_set;
    for (int idx : entries)
        class_set.insert(manifest.entries[idx].class_labels.begin(),
                         manifest.entries[idx].class_labels.end());
    sobd::require(!class_set.empty(), "split '", o.split, "' has no class labels");

    std::vector<sobd::SbdClassInput> inputs;
    for (int cls : class_set) {
        sobd::SbdClassInput input;
        input.class_id = cls;
        for (int idx : entries) {
            const sobd::ManifestEntry& entry = manifest.entries[idx];
            input.preds.push_back(
                sobd::read_boundary_map_png(contour_path(o.pred_dir, entry, cls)));
            input.gts.push_back(sobd::evaluation_ground_truth(
                sobd::load_segmentation(entry.segmentation_path),
                sobd::BoundaryMode::only_class(cls)));
        }
        inputs.push_back(std::move(input));
    }
    const sobd::SbdResult result =
        sobd::sbd_eval(inputs, o.tol_frac, sobd::default_thresholds(), stderr_sink());

    for (const sobd::SbdClassResult& c : result.classes)
        std::cout << "class " << c.class_id << ": AP " << c.ap << "\n";
    std::cout << "mean AP " << result.mean_ap << "\n";
    if (!o.out.empty()) {
        sobd::write_text_file(o.out, sobd::sbd_eval_json(result, o.tol_frac));
        std::cout << "results: " << o.out << "\n";
    }
    return 0;
}

int run_info(const InfoOpts& o) {
    const sobd::ModelContainer c = sobd::load_container(o.model);
    std::cout << "sections:";
    std::cout << " meta";
    if (c.pca) std::cout << " pca";
    if (c.gmm) std::cout << " gmm";
    if (c.partition) std::cout << " partition";
    if (c.gate) std::cout << " gate";
    if (!c.forests.empty()) std::cout << " forest x" << c.forests.size();
    std::cout << "\nmeta:\n";
    for (const auto& [k, v] : c.meta) std::cout << "  " << k << " = " << v << "\n";
    if (c.pca)
        std::cout << "pca: " << c.pca->input_dim() << " -> " << c.pca->output_dim() << "\n";
    if (c.gmm) std::cout << "gmm: K=" << c.gmm->components() << " d=" << c.gmm->dim() << "\n";
    if (c.partition) {
        std::cout << "partition: kind=" << sobd::to_string(c.partition->kind)
                  << " situations=" << c.partition->k() << "\n";
        for (const sobd::Situation& s : c.partition->situations)
            std::cout << "  situation " << s.id << ": kind=" << sobd::to_string(s.kind)
                      << " class=" << s.class_id << " members=" << s.member_images.size()
                      << "\n";
    }
    if (c.gate)
        std::cout << "gate: dim=" << c.gate->dim() << " temperature=" << c.gate->temperature
                  << "\n";
    for (std::size_t f = 0; f < c.forests.size(); ++f) {
        std::size_t nodes = 0;
        for (const sobd::EdgeTree& t : c.forests[f].trees) nodes += t.feature.size();
        std::cout << "forest " << f << ": " << c.forests[f].trees.size() << " trees, " << nodes
                  << " nodes, stride " << c.forests[f].stride << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"situational object boundary detection"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: SOBD_THREADS or hardware)");

    SynthOpts synth;
    synth.out = scratch_base() + "/synth";
    CLI::App* s_synth = app.add_subcommand("synth", "generate the synthetic corpus");
    s_synth->fallthrough();
    s_synth->add_option("--out", synth.out, "output directory");
    s_synth->add_option("--spec", synth.spec_file, "corpus spec JSON");
    s_synth->add_option("--images-per-class", synth.images_per_class, "override image count");
    s_synth->add_option("--size", synth.image_size, "override image side length");
    s_synth->add_option("--noise", synth.noise, "override noise sigma");
    auto* synth_seed = s_synth->add_option("--seed", synth.seed, "corpus seed");

    FeaturesOpts feat;
    CLI::App* s_feat = app.add_subcommand("features", "fit PCA+GMM and encode global descriptors");
    s_feat->fallthrough();
    s_feat->add_option("--manifest", feat.manifest, "dataset manifest")->required();
    s_feat->add_option("--out", feat.out, "output model container")->required();
    s_feat->add_option("--desc-cache", feat.cache, "descriptor cache path (default <out>.desc)");
    s_feat->add_option("--pca-dim", feat.pca_dim, "PCA output dimension");
    s_feat->add_option("--gmm-k", feat.gmm_k, "GMM component count");
    s_feat->add_option("--budget", feat.budget, "local descriptor sample budget");
    s_feat->add_option("--sift-patch", feat.sift_patch, "descriptor patch side");
    s_feat->add_option("--sift-stride", feat.sift_stride, "descriptor grid stride");
    s_feat->add_option("--seed", feat.seed, "pipeline seed");

    ClusterOpts clus;
    CLI::App* s_clus = app.add_subcommand("cluster", "build the situation partition");
    s_clus->fallthrough();
    s_clus->add_option("--manifest", clus.manifest, "dataset manifest")->required();
    s_clus->add_option("--model", clus.model, "model container to update")->required();
    s_clus->add_option("--desc-cache", clus.cache, "descriptor cache from features");
    s_clus->add_option("--kind", clus.kind, "monolithic | class | subclass | agnostic");
    s_clus->add_option("--subclasses", clus.subclasses, "subclasses per class");
    s_clus->add_option("--clusters", clus.clusters, "agnostic cluster count");
    s_clus->add_option("--min-size", clus.min_size, "merge situations smaller than this");
    s_clus->add_option("--out", clus.out, "output container (default: in place)");
    s_clus->add_option("--seed", clus.seed, "pipeline seed");

    TrainGateOpts gate;
    CLI::App* s_gate = app.add_subcommand("train-gate", "train the situation gate");
    s_gate->fallthrough();
    s_gate->add_option("--manifest", gate.manifest, "dataset manifest")->required();
    s_gate->add_option("--model", gate.model, "model container to update")->required();
    s_gate->add_option("--desc-cache", gate.cache, "descriptor cache from features")->required();
    s_gate->add_option("--folds", gate.folds, "cross-validation folds");
    s_gate->add_option("--epochs", gate.epochs, "SGD epochs");
    s_gate->add_option("--holdout", gate.holdout, "calibration holdout fraction");
    s_gate->add_option("--temperature", gate.temperature, "fixed softmax temperature (skip fit)");
    s_gate->add_option("--out", gate.out, "output container (default: in place)");
    s_gate->add_option("--seed", gate.seed, "pipeline seed");

    TrainForestsOpts forests;
    CLI::App* s_for = app.add_subcommand("train-forests", "train per-situation edge forests");
    s_for->fallthrough();
    s_for->add_option("--manifest", forests.manifest, "dataset manifest")->required();
    s_for->add_option("--model", forests.model, "model container to update")->required();
    s_for->add_option("--trees", forests.trees, "trees per forest");
    s_for->add_option("--budget", forests.budget, "training patches per tree");
    s_for->add_option("--out", forests.out, "output container (default: in place)");
    s_for->add_option("--seed", forests.seed, "pipeline seed");

    PredictOpts pred;
    pred.out = scratch_base() + "/predictions";
    CLI::App* s_pred = app.add_subcommand("predict", "run gated boundary prediction");
    s_pred->fallthrough();
    s_pred->add_option("--manifest", pred.manifest, "dataset manifest")->required();
    s_pred->add_option("--model", pred.model, "trained model container")->required();
    s_pred->add_option("--out", pred.out, "output directory");
    s_pred->add_option("--split", pred.split, "train | test | all");
    s_pred->add_option("--mode", pred.mode, "learned | oracle gating");
    s_pred->add_option("--log", pred.log_file, "JSONL log path (default <out>/predictions.jsonl)");
    auto* opt_n = s_pred->add_option("--n", pred.n, "fuse the top-n situations");
    auto* opt_mass =
        s_pred->add_option("--mass", pred.mass, "fuse situations covering this probability mass");
    opt_n->excludes(opt_mass);
    s_pred->add_flag("--class-contours", pred.class_contours,
                     "also write one contour map per class");

    EvalOpts eval;
    CLI::App* s_eval = app.add_subcommand("evaluate", "PR evaluation against the manifest");
    s_eval->fallthrough();
    s_eval->add_option("--manifest", eval.manifest, "dataset manifest")->required();
    s_eval->add_option("--pred-dir", eval.pred_dir, "directory holding *_pred.png")->required();
    s_eval->add_option("--split", eval.split, "train | test | all");
    s_eval->add_option("--tol-frac", eval.tol_frac, "match tolerance as a diagonal fraction");
    s_eval->add_option("--out", eval.out, "results JSON path");
    s_eval->add_flag("--table", eval.table, "print the PR table even when --out is set");

    EvalOpts sbd;
    CLI::App* s_sbd = app.add_subcommand("sbd-eval", "per-class semantic contour evaluation");
    s_sbd->fallthrough();
    s_sbd->add_option("--manifest", sbd.manifest, "dataset manifest")->required();
    s_sbd->add_option("--pred-dir", sbd.pred_dir, "directory holding *_c<class>.png")->required();
    s_sbd->add_option("--split", sbd.split, "train | test | all");
    s_sbd->add_option("--tol-frac", sbd.tol_frac, "match tolerance as a diagonal fraction");
    s_sbd->add_option("--out", sbd.out, "results JSON path");

    InfoOpts info;
    CLI::App* s_info = app.add_subcommand("info", "print a model container's contents");
    s_info->fallthrough();
    s_info->add_option("model", info.model, "model container path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    if (threads > 0) sobd::set_thread_count(threads);
    synth.seed_given = synth_seed->count() > 0;

    try {
        if (app.got_subcommand(s_synth)) return run_synth(synth);
        if (app.got_subcommand(s_feat)) return run_features(feat);
        if (app.got_subcommand(s_clus)) return run_cluster(clus);
        if (app.got_subcommand(s_gate)) return run_train_gate(gate);
        if (app.got_subcommand(s_for)) return run_train_forests(forests);
        if (app.got_subcommand(s_pred)) return run_predict(pred);
        if (app.got_subcommand(s_eval)) return run_evaluate(eval);
        if (app.got_subcommand(s_sbd)) return run_sbd_eval(sbd);
        if (app.got_subcommand(s_info)) return run_info(info);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 2;
}

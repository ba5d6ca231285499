#pragma once

// Situation gating: one-vs-rest linear SVMs over global descriptors with
// cross-validated hyperparameters, converted to a distribution over
// situations by a temperature-calibrated softmax.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/fisher.hpp"
#include "sobd/situations.hpp"
#include "sobd/svm_sgd.hpp"

namespace sobd {

struct GatingConfig {
    std::vector<double> lambda_grid = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
    std::vector<double> pos_freq_grid = {0.1, 0.25, 0.5};
    int epochs = 10;
    int cv_folds = 3;
    double calibration_holdout = 0.2;  // fraction of train rows reserved for T
    double temperature_override = 0.0; // > 0 skips calibration
};

struct GatingModel {
    double temperature = 1.0;
    std::vector<LinearModel> models;  // indexed by situation id

    int situation_count() const { return static_cast<int>(models.size()); }
    int dim() const { return models.empty() ? 0 : models[0].dim(); }

    std::vector<double> scores(const GlobalDescriptor& x) const {
        require(!models.empty(), "gating: empty model");
        require(static_cast<int>(x.size()) == dim(), "gating: descriptor dim ", x.size(),
                " != model dim ", dim());
        std::vector<double> s(models.size());
        for (std::size_t j = 0; j < models.size(); ++j) s[j] = models[j].score(x.data());
        return s;
    }
};

// softmax(s / T); always a valid distribution for finite scores.
inline std::vector<double> softmax_temperature(const std::vector<double>& scores, double t) {
    require(t > 0.0, "softmax temperature must be positive");
    require(!scores.empty(), "softmax of empty score vector");
    double max_s = -std::numeric_limits<double>::infinity();
    for (double s : scores) max_s = std::max(max_s, s);
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp((scores[i] - max_s) / t);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

inline std::vector<double> gate_probabilities(const GatingModel& model,
                                              const GlobalDescriptor& x) {
    return softmax_temperature(model.scores(x), model.temperature);
}

// Oracle gate used by the "ground-truth gating" evaluation mode: probability
// mass goes entirely to the situations of the image's true classes.
inline std::vector<double> oracle_gate_probabilities(const SituationPartition& partition,
                                                     const std::vector<int>& class_labels) {
    std::vector<double> probs(partition.k(), 0.0);
    if (partition.kind == SituationKind::monolithic) {
        probs[0] = 1.0;
        return probs;
    }
    require(partition.kind == SituationKind::class_specific ||
                partition.kind == SituationKind::subclass,
            "oracle gating needs class-labeled situations (kind is ",
            to_string(partition.kind), ")");
    require(!class_labels.empty(), "oracle gating: image has no class labels");
    std::vector<int> hits;
    for (const Situation& s : partition.situations)
        if (std::find(class_labels.begin(), class_labels.end(), s.class_id) !=
            class_labels.end())
            hits.push_back(s.id);
    require(!hits.empty(), "oracle gating: no situation matches the image's classes");
    for (int id : hits) probs[id] = 1.0 / static_cast<double>(hits.size());
    return probs;
}

struct SelectedSituation {
    int id = 0;
    double probability = 0.0;
};

// n highest-probability situations, descending; ties by ascending id.
inline std::vector<SelectedSituation> top_n_situations(const std::vector<double>& probs,
                                                       int n) {
    const int k = static_cast<int>(probs.size());
    require(n >= 1 && n <= k, "top_n_situations: need 1 <= n <= ", k, ", got ", n);
    std::vector<int> order(k);
    for (int i = 0; i < k; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return a < b;
    });
    std::vector<SelectedSituation> out;
    for (int i = 0; i < n; ++i) out.push_back({order[i], probs[order[i]]});
    return out;
}

// Shortest descending-order prefix whose cumulative mass exceeds m; the full
// list when no prefix does (so m=1 equals n=k exactly).
inline std::vector<SelectedSituation> top_mass_situations(const std::vector<double>& probs,
                                                          double m) {
    require(m > 0.0 && m <= 1.0, "top_mass_situations: need mass in (0,1], got ", m);
    std::vector<SelectedSituation> all =
        top_n_situations(probs, static_cast<int>(probs.size()));
    double cum = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        cum += all[i].probability;
        if (cum > m) return {all.begin(), all.begin() + i + 1};
    }
    return all;
}

namespace detail {

// Deterministic (labels, descriptors) -> per-situation positive mask.
inline std::vector<std::uint8_t> situation_mask(const Situation& s,
                                                const std::vector<int>& rows) {
    std::vector<std::uint8_t> mask(rows.size(), 0);
    std::size_t j = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        while (j < s.member_images.size() && s.member_images[j] < rows[i]) ++j;
        if (j < s.member_images.size() && s.member_images[j] == rows[i]) mask[i] = 1;
    }
    return mask;
}

inline MatrixF gather_rows(const MatrixF& descriptors, const std::vector<int>& rows) {
    MatrixF out(rows.size(), descriptors.cols, 0.0f);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const float* src = descriptors.row(rows[i]);
        std::copy(src, src + descriptors.cols, out.row(i));
    }
    return out;
}

// Negative log-likelihood of the (row, situation) membership events under
// softmax(scores/T).
inline double calibration_nll(const MatrixD& scores,
                              const std::vector<std::vector<int>>& memberships, double t) {
    double nll = 0.0;
    std::size_t events = 0;
    for (std::size_t i = 0; i < scores.rows; ++i) {
        std::vector<double> row(scores.row(i), scores.row(i) + scores.cols);
        const std::vector<double> p = softmax_temperature(row, t);
        for (int s : memberships[i]) {
            nll -= std::log(std::max(p[s], 1e-300));
            ++events;
        }
    }
    return events ? nll / static_cast<double>(events) : 0.0;
}

}  // namespace detail

struct GateTrainReport {
    std::vector<SvmConfig> chosen;  // per situation
    std::vector<double> cv_ap;      // best cross-validated AP per situation
};

// Trains the one-vs-rest gate on the partition's training images.
// Hyperparameters (lambda, pos_freq) are picked per situation by k-fold
// cross-validated ranking AP on an 80% SVM split; the softmax temperature is
// fitted by NLL on the remaining calibration rows via golden-section search
// over log T in [-3, 3].
inline GatingModel train_gate(const SituationPartition& partition, const MatrixF& descriptors,
                              const GatingConfig& cfg, std::uint64_t seed,
                              const WarnSink& sink = {}, GateTrainReport* report = nullptr) {
    require(partition.k() >= 1, "train_gate: empty partition");
    require(!cfg.lambda_grid.empty() && !cfg.pos_freq_grid.empty(), "train_gate: empty grids");
    require(cfg.cv_folds >= 2, "train_gate: need >= 2 CV folds");

    // Union of members = the gate's training rows, ascending entry order.
    std::vector<int> rows;
    for (const Situation& s : partition.situations)
        rows.insert(rows.end(), s.member_images.begin(), s.member_images.end());
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    require(!rows.empty(), "train_gate: no training rows");
    for (int r : rows)
        require(r >= 0 && static_cast<std::size_t>(r) < descriptors.rows,
                "train_gate: descriptor row ", r, " out of range");

    GatingModel gate;
    gate.models.resize(partition.k());

    const bool trivial = partition.k() == 1;

    // Split rows into SVM-training and calibration parts, seeded.
    std::vector<int> shuffled = rows;
    {
        Rng rng(derive_seed(seed, 0x63616cULL));
        rng.shuffle(shuffled);
    }
    std::size_t cal_count =
        trivial || cfg.temperature_override > 0.0
            ? 0
            : static_cast<std::size_t>(cfg.calibration_holdout * shuffled.size());
    std::vector<int> svm_rows(shuffled.begin() + cal_count, shuffled.end());
    std::vector<int> cal_rows(shuffled.begin(), shuffled.begin() + cal_count);

    // Every situation needs at least one positive among the SVM rows; pull
    // rows back from the calibration set when the split starved one.
    for (const Situation& s : partition.situations) {
        auto hits = [&](const std::vector<int>& set) {
            std::size_t c = 0;
            for (int r : set)
                if (std::binary_search(s.member_images.begin(), s.member_images.end(), r)) ++c;
            return c;
        };
        while (hits(svm_rows) == 0 && !cal_rows.empty()) {
            for (std::size_t i = 0; i < cal_rows.size(); ++i) {
                if (std::binary_search(s.member_images.begin(), s.member_images.end(),
                                       cal_rows[i])) {
                    warn(sink, str_cat("train_gate: moving entry ", cal_rows[i],
                                       " from calibration to SVM split for situation ", s.id));
                    svm_rows.push_back(cal_rows[i]);
                    cal_rows.erase(cal_rows.begin() + i);
                    break;
                }
            }
            if (hits(svm_rows) == 0) break;  // situation has no rows at all
        }
        require(hits(svm_rows) > 0, "train_gate: situation ", s.id,
                " has no positive training descriptor");
    }
    std::sort(svm_rows.begin(), svm_rows.end());
    std::sort(cal_rows.begin(), cal_rows.end());

    const MatrixF svm_x = detail::gather_rows(descriptors, svm_rows);

    // Fold id per SVM row, seeded round-robin over a shuffle.
    std::vector<int> fold(svm_rows.size());
    {
        std::vector<std::size_t> order(svm_rows.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(derive_seed(seed, 0x666f6cULL));
        rng.shuffle(order);
        for (std::size_t i = 0; i < order.size(); ++i)
            fold[order[i]] = static_cast<int>(i % cfg.cv_folds);
    }

    for (int sj = 0; sj < partition.k(); ++sj) {
        const Situation& s = partition.situations[sj];
        const std::vector<std::uint8_t> labels = detail::situation_mask(s, svm_rows);

        SvmConfig best;
        best.epochs = cfg.epochs;
        double best_ap = -1.0;
        if (!trivial) {
            for (double lambda : cfg.lambda_grid)
                for (double pf : cfg.pos_freq_grid) {
                    SvmConfig cand{lambda, pf, cfg.epochs};
                    double ap_sum = 0.0;
                    int ap_n = 0;
                    for (int f = 0; f < cfg.cv_folds; ++f) {
                        std::vector<int> tr, ho;
                        for (std::size_t i = 0; i < svm_rows.size(); ++i)
                            (fold[i] == f ? ho : tr).push_back(static_cast<int>(i));
                        std::size_t tr_pos = 0, ho_pos = 0;
                        for (int i : tr) tr_pos += labels[i];
                        for (int i : ho) ho_pos += labels[i];
                        if (tr_pos == 0 || ho_pos == 0) continue;

                        MatrixF xf(tr.size(), svm_x.cols, 0.0f);
                        std::vector<std::uint8_t> lf(tr.size());
                        for (std::size_t i = 0; i < tr.size(); ++i) {
                            const float* src = svm_x.row(tr[i]);
                            std::copy(src, src + svm_x.cols, xf.row(i));
                            lf[i] = labels[tr[i]];
                        }
                        LinearModel mdl = train_linear_svm(
                            xf, lf, cand, derive_seed(seed, sj, f, 1));
                        std::vector<double> scores(ho.size());
                        std::vector<std::uint8_t> ho_labels(ho.size());
                        for (std::size_t i = 0; i < ho.size(); ++i) {
                            scores[i] = mdl.score(svm_x.row(ho[i]));
                            ho_labels[i] = labels[ho[i]];
                        }
                        ap_sum += ranking_average_precision(scores, ho_labels);
                        ++ap_n;
                    }
                    const double ap = ap_n ? ap_sum / ap_n : 0.0;
                    if (ap > best_ap) {
                        best_ap = ap;
                        best = cand;
                    }
                }
        }

        gate.models[sj] = train_linear_svm(svm_x, labels, best, derive_seed(seed, sj, 0xfULL));
        if (report) {
            report->chosen.push_back(best);
            report->cv_ap.push_back(best_ap);
        }
    }

    // Temperature calibration.
    if (cfg.temperature_override > 0.0) {
        gate.temperature = cfg.temperature_override;
    } else if (trivial || cal_rows.empty()) {
        gate.temperature = 1.0;
    } else {
        MatrixD cal_scores(cal_rows.size(), partition.k(), 0.0);
        std::vector<std::vector<int>> memberships(cal_rows.size());
        for (std::size_t i = 0; i < cal_rows.size(); ++i) {
            const float* x = descriptors.row(cal_rows[i]);
            for (int j = 0; j < partition.k(); ++j)
                cal_scores.at(i, j) = gate.models[j].score(x);
            for (const Situation& s : partition.situations)
                if (std::binary_search(s.member_images.begin(), s.member_images.end(),
                                       cal_rows[i]))
                    memberships[i].push_back(s.id);
        }
        // Golden-section over log T.
        const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double lo = -3.0, hi = 3.0;
        double m1 = hi - phi * (hi - lo), m2 = lo + phi * (hi - lo);
        double f1 = detail::calibration_nll(cal_scores, memberships, std::exp(m1));
        double f2 = detail::calibration_nll(cal_scores, memberships, std::exp(m2));
        for (int it = 0; it < 80; ++it) {
            if (f1 <= f2) {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - phi * (hi - lo);
                f1 = detail::calibration_nll(cal_scores, memberships, std::exp(m1));
            } else {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + phi * (hi - lo);
                f2 = detail::calibration_nll(cal_scores, memberships, std::exp(m2));
            }
        }
        gate.temperature = std::exp(0.5 * (lo + hi));
    }
    return gate;
}

}  // namespace sobd

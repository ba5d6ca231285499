#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <numeric>

#include "sobd/dense_sift.hpp"
#include "sobd/fisher.hpp"
#include "sobd/gmm.hpp"
#include "sobd/pca.hpp"
#include "sobd/random.hpp"

using namespace sobd;

static Image constant_image(int w, int h, std::uint8_t v) {
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.set(x, y, v, v, v);
    return img;
}

TEST_CASE("dense descriptors of a constant image are all zero") {
    LocalDescriptorField f = dense_descriptors(constant_image(32, 32, 128));
    CHECK(f.count() == 25);  // 5x5 grid
    for (int i = 0; i < f.count(); ++i)
        for (int j = 0; j < f.dim(); ++j) REQUIRE(f.descriptors.at(i, j) == 0.0f);
}

TEST_CASE("16x16 image yields exactly one grid position") {
    LocalDescriptorField f = dense_descriptors(constant_image(16, 16, 0));
    CHECK(f.count() == 1);
    CHECK(f.xs[0] == 0);
    CHECK(f.ys[0] == 0);
}

TEST_CASE("grid arithmetic covers interior positions only") {
    LocalDescriptorField f = dense_descriptors(constant_image(33, 17, 0));
    CHECK(f.count() == 5 * 1);
    for (int i = 0; i < f.count(); ++i) {
        CHECK(f.xs[i] + 16 <= 33);
        CHECK(f.ys[i] + 16 <= 17);
    }
}

TEST_CASE("descriptors are too small below one patch") {
    CHECK_THROWS_WITH(dense_descriptors(constant_image(15, 40, 0)),
                      Catch::Matchers::ContainsSubstring("too small"));
}

TEST_CASE("vertical step edge concentrates mass in the rightward orientation bin") {
    // Left half dark, right half bright: gx > 0 and gy = 0 along the edge,
    // so the full-circle histogram piles into bin 0.
    Image img(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const std::uint8_t v = x < 16 ? 40 : 200;
            img.set(x, y, v, v, v);
        }
    LocalDescriptorField f = dense_descriptors(img);

    std::vector<double> bin_mass(8, 0.0);
    for (int i = 0; i < f.count(); ++i)
        for (int j = 0; j < f.dim(); ++j) bin_mass[j % 8] += f.descriptors.at(i, j);
    double others = 0.0;
    for (int b = 1; b < 8; ++b) others += bin_mass[b];
    CHECK(bin_mass[0] > 10.0 * others);
}

TEST_CASE("nonzero descriptors are unit length") {
    Image img(40, 40);
    Rng rng(55);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x) {
            const auto v = static_cast<std::uint8_t>(rng.uniform_int(256));
            img.set(x, y, v, v, v);
        }
    LocalDescriptorField f = dense_descriptors(img);
    for (int i = 0; i < f.count(); ++i) {
        double norm = 0.0;
        for (int j = 0; j < f.dim(); ++j) {
            const double v = f.descriptors.at(i, j);
            norm += v * v;
        }
        REQUIRE(std::sqrt(norm) == Catch::Approx(1.0).margin(1e-5));
    }
}

static MatrixD gaussian_cloud(std::size_t n, int dim, std::uint64_t seed) {
    MatrixD m(n, dim, 0.0);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) m.at(i, j) = rng.normal();
    return m;
}

TEST_CASE("pca recovers an exact 2-D subspace with zero error") {
    const int D = 6;
    MatrixD samples(300, D, 0.0);
    Rng rng(8);
    for (std::size_t i = 0; i < samples.rows; ++i) {
        const double a = rng.normal(), b = rng.normal();
        for (int j = 0; j < D; ++j)
            samples.at(i, j) = a * (j + 1) + b * std::pow(-1.0, j) + 2.0;
    }
    PcaModel pca = fit_pca(samples, 2);
    for (std::size_t i = 0; i < samples.rows; ++i) {
        std::vector<double> x(samples.row(i), samples.row(i) + D);
        std::vector<double> rec = pca.reconstruct(pca.project(x));
        for (int j = 0; j < D; ++j) REQUIRE(rec[j] == Catch::Approx(x[j]).margin(1e-9));
    }
}

TEST_CASE("pca basis is orthonormal and matches an independent eigensolver") {
    const int D = 10;
    MatrixD samples = gaussian_cloud(2000, D, 21);
    // Stretch two directions so the spectrum has a clear order.
    for (std::size_t i = 0; i < samples.rows; ++i) {
        samples.at(i, 0) *= 5.0;
        samples.at(i, 1) *= 3.0;
    }
    const int d = 3;
    PcaModel pca = fit_pca(samples, d);

    // Orthonormality.
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            double s = 0.0;
            for (int i = 0; i < D; ++i) s += pca.basis.at(i, a) * pca.basis.at(i, b);
            REQUIRE(s == Catch::Approx(a == b ? 1.0 : 0.0).margin(1e-8));
        }

    // Covariance eigendecomposition via the independent solver.
    Eigen::MatrixXd X(samples.rows, D);
    for (std::size_t i = 0; i < samples.rows; ++i)
        for (int j = 0; j < D; ++j) X(i, j) = samples.at(i, j);
    Eigen::RowVectorXd mean = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - mean;
    Eigen::MatrixXd cov = centered.transpose() * centered / double(samples.rows);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    REQUIRE(solver.info() == Eigen::Success);

    // Top-d directions agree up to sign.
    for (int j = 0; j < d; ++j) {
        Eigen::VectorXd ref = solver.eigenvectors().col(D - 1 - j);  // ascending order
        double dot_ref = 0.0;
        for (int i = 0; i < D; ++i) dot_ref += pca.basis.at(i, j) * ref(i);
        CHECK(std::abs(dot_ref) == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("pca with d = D reconstructs exactly") {
    const int D = 5;
    MatrixD samples = gaussian_cloud(100, D, 33);
    PcaModel pca = fit_pca(samples, D);
    std::vector<double> x(samples.row(7), samples.row(7) + D);
    std::vector<double> rec = pca.reconstruct(pca.project(x));
    for (int j = 0; j < D; ++j) CHECK(rec[j] == Catch::Approx(x[j]).margin(1e-9));
}

TEST_CASE("pca reconstruction error is non-increasing in d") {
    const int D = 8;
    MatrixD samples = gaussian_cloud(500, D, 44);
    double prev = std::numeric_limits<double>::infinity();
    for (int d = 1; d <= D; ++d) {
        PcaModel pca = fit_pca(samples, d);
        double err = 0.0;
        for (std::size_t i = 0; i < samples.rows; ++i) {
            std::vector<double> x(samples.row(i), samples.row(i) + D);
            std::vector<double> rec = pca.reconstruct(pca.project(x));
            for (int j = 0; j < D; ++j) err += (rec[j] - x[j]) * (rec[j] - x[j]);
        }
        CHECK(err <= prev + 1e-9);
        prev = err;
    }
}

TEST_CASE("pca rejects insufficient samples") {
    MatrixD samples(3, 8, 1.0);
    CHECK_THROWS_WITH(fit_pca(samples, 3),
                      Catch::Matchers::ContainsSubstring("insufficient samples"));
}

TEST_CASE("gmm with K=1 equals the closed-form mean and variance") {
    const int d = 4;
    MatrixD samples = gaussian_cloud(64, d, 9);
    GmmModel g = fit_gmm(samples, 1, 123);

    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < samples.rows; ++i)
        for (int j = 0; j < d; ++j) mean[j] += samples.at(i, j);
    for (int j = 0; j < d; ++j) mean[j] /= double(samples.rows);
    for (std::size_t i = 0; i < samples.rows; ++i)
        for (int j = 0; j < d; ++j) {
            const double z = samples.at(i, j) - mean[j];
            var[j] += z * z;
        }
    for (int j = 0; j < d; ++j) var[j] /= double(samples.rows);

    CHECK(g.weights[0] == Catch::Approx(1.0).margin(1e-12));
    for (int j = 0; j < d; ++j) {
        CHECK(g.means.at(0, j) == Catch::Approx(mean[j]).margin(1e-10));
        CHECK(g.variances.at(0, j) == Catch::Approx(var[j]).margin(1e-10));
    }
}

TEST_CASE("gmm separates two well-separated clusters") {
    const int d = 3;
    MatrixD samples(400, d, 0.0);
    Rng rng(10);
    for (std::size_t i = 0; i < samples.rows; ++i) {
        const double base = i < 200 ? -5.0 : 5.0;
        for (int j = 0; j < d; ++j) samples.at(i, j) = base + 0.5 * rng.normal();
    }
    GmmModel g = fit_gmm(samples, 2, 77);
    std::vector<double> centers = {g.means.at(0, 0), g.means.at(1, 0)};
    std::sort(centers.begin(), centers.end());
    CHECK(centers[0] == Catch::Approx(-5.0).margin(0.05));  // 0.1 * sigma = 0.05
    CHECK(centers[1] == Catch::Approx(5.0).margin(0.05));
}

TEST_CASE("gmm log-likelihood is non-decreasing over EM iterations") {
    MatrixD samples = gaussian_cloud(300, 5, 14);
    GmmFitReport report;
    fit_gmm(samples, 4, 5, &report);
    REQUIRE(report.loglik_history.size() >= 2);
    CHECK(report.reseeded_components == 0);
    for (std::size_t i = 1; i < report.loglik_history.size(); ++i)
        REQUIRE(report.loglik_history[i] >= report.loglik_history[i - 1] - 1e-9);
}

TEST_CASE("gmm fit is deterministic per seed") {
    MatrixD samples = gaussian_cloud(200, 4, 15);
    GmmModel a = fit_gmm(samples, 3, 42);
    GmmModel b = fit_gmm(samples, 3, 42);
    CHECK(a.weights == b.weights);
    CHECK(a.means.data == b.means.data);
    CHECK(a.variances.data == b.variances.data);
}

TEST_CASE("gmm enforces the variance floor and sample requirement") {
    MatrixD identical(40, 2, 3.0);  // zero variance data
    GmmModel g = fit_gmm(identical, 2, 6);
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j) REQUIRE(g.variances.at(k, j) >= 1e-6);

    MatrixD few(19, 2, 0.0);
    CHECK_THROWS_WITH(fit_gmm(few, 2, 1),
                      Catch::Matchers::ContainsSubstring("insufficient samples"));
}

// Small hand-built models for the Fisher tests.
static GmmModel toy_gmm() {
    GmmModel g;
    g.weights = {0.4, 0.6};
    g.means = MatrixD(2, 3, 0.0);
    g.variances = MatrixD(2, 3, 0.0);
    const double means[2][3] = {{0.0, 1.0, -1.0}, {2.0, -0.5, 0.5}};
    const double vars[2][3] = {{0.5, 1.2, 0.8}, {1.5, 0.6, 1.0}};
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 3; ++j) {
            g.means.at(k, j) = means[k][j];
            g.variances.at(k, j) = vars[k][j];
        }
    return g;
}

static double avg_loglik(const GmmModel& g, const MatrixD& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) s += g.log_density(x.row(i));
    return s / double(x.rows);
}

TEST_CASE("fisher raw block matches finite differences of the average log-likelihood") {
    GmmModel g = toy_gmm();
    const int K = 2, d = 3;
    MatrixD x(5, d, 0.0);
    Rng rng(3);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (int j = 0; j < d; ++j) x.at(i, j) = rng.normal() * 1.5;

    MatrixD gamma(x.rows, K, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) g.posteriors(x.row(i), gamma.row(i));
    std::vector<std::size_t> all = {0, 1, 2, 3, 4};
    std::vector<double> raw = fisher_raw_block(g, x, gamma, all);

    const double h = 1e-5;
    for (int k = 0; k < K; ++k)
        for (int j = 0; j < d; ++j) {
            // Mean derivative: raw = (sigma / sqrt(w)) * dLL/dmu.
            GmmModel gp = g, gm = g;
            gp.means.at(k, j) += h;
            gm.means.at(k, j) -= h;
            const double dmu = (avg_loglik(gp, x) - avg_loglik(gm, x)) / (2 * h);
            const double sigma = std::sqrt(g.variances.at(k, j));
            const double expected_mean = sigma / std::sqrt(g.weights[k]) * dmu;
            const double got_mean = raw[static_cast<std::size_t>(k) * d + j];
            REQUIRE(got_mean == Catch::Approx(expected_mean).epsilon(1e-4).margin(1e-8));

            // Deviation derivative: raw = (sigma / sqrt(2w)) * dLL/dsigma.
            GmmModel sp = g, sm = g;
            sp.variances.at(k, j) = (sigma + h) * (sigma + h);
            sm.variances.at(k, j) = (sigma - h) * (sigma - h);
            const double dsig = (avg_loglik(sp, x) - avg_loglik(sm, x)) / (2 * h);
            const double expected_std = sigma / std::sqrt(2.0 * g.weights[k]) * dsig;
            const double got_std = raw[static_cast<std::size_t>(K + k) * d + j];
            REQUIRE(got_std == Catch::Approx(expected_std).epsilon(1e-4).margin(1e-8));
        }
}

TEST_CASE("signed sqrt is odd and composes to the fourth root") {
    std::vector<double> v = {-4.0, -1.0, 0.0, 0.25, 9.0};
    std::vector<double> once = v;
    signed_sqrt(once.data(), once.size());
    CHECK(once[0] == Catch::Approx(-2.0));
    CHECK(once[3] == Catch::Approx(0.5));
    std::vector<double> twice = once;
    signed_sqrt(twice.data(), twice.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double expect =
            (v[i] >= 0 ? 1.0 : -1.0) * std::pow(std::abs(v[i]), 0.25);
        CHECK(twice[i] == Catch::Approx(expect).margin(1e-12));
    }
}

// Synthetic field wrapper: descriptors with chosen center rows.
static LocalDescriptorField make_field(const MatrixF& descriptors, std::vector<int> ys,
                                       int image_h) {
    LocalDescriptorField f;
    f.params.patch = 16;
    f.image_width = 64;
    f.image_height = image_h;
    f.descriptors = descriptors;
    f.ys = std::move(ys);
    f.xs.assign(f.ys.size(), 0);
    return f;
}

static PcaModel identity_pca(int d) {
    PcaModel pca;
    pca.mean.assign(d, 0.0);
    pca.basis = MatrixD(d, d, 0.0);
    for (int i = 0; i < d; ++i) pca.basis.at(i, i) = 1.0;
    return pca;
}

TEST_CASE("fisher encode emits unit blocks per region and zero empty blocks") {
    GmmModel g = toy_gmm();
    PcaModel pca = identity_pca(3);
    Rng rng(12);
    MatrixF desc(6, 3, 0.0f);
    for (std::size_t i = 0; i < desc.rows; ++i)
        for (int j = 0; j < 3; ++j) desc.at(i, j) = static_cast<float>(rng.normal());

    // Heights chosen so band 0 and band 1 are hit but band 2 stays empty:
    // centers at y0+8; image height 90 -> bands split at 30 and 60.
    LocalDescriptorField f = make_field(desc, {0, 4, 8, 24, 30, 40}, 90);
    GlobalDescriptor out = fisher_encode(f, pca, g);
    const std::size_t block = 2 * 2 * 3;
    REQUIRE(out.size() == block * 4);

    auto block_norm = [&](int r) {
        double n = 0.0;
        for (std::size_t i = 0; i < block; ++i) {
            const double v = out[block * r + i];
            n += v * v;
        }
        return std::sqrt(n);
    };
    CHECK(block_norm(0) == Catch::Approx(1.0).margin(1e-6));
    CHECK(block_norm(1) == Catch::Approx(1.0).margin(1e-6));
    CHECK(block_norm(2) == Catch::Approx(1.0).margin(1e-6));
    CHECK(block_norm(3) == 0.0);  // empty band keeps a zero block
}

TEST_CASE("fisher encoding is invariant to descriptor order within a region") {
    GmmModel g = toy_gmm();
    PcaModel pca = identity_pca(3);
    Rng rng(18);
    MatrixF desc(8, 3, 0.0f);
    for (std::size_t i = 0; i < desc.rows; ++i)
        for (int j = 0; j < 3; ++j) desc.at(i, j) = static_cast<float>(rng.normal());

    // All patches in one band; permuting rows must not change the encoding.
    LocalDescriptorField f = make_field(desc, {0, 0, 0, 0, 0, 0, 0, 0}, 48);
    GlobalDescriptor a = fisher_encode(f, pca, g);

    MatrixF permuted(8, 3, 0.0f);
    const int perm[8] = {5, 2, 7, 0, 3, 6, 1, 4};
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 3; ++j) permuted.at(i, j) = desc.at(perm[i], j);
    LocalDescriptorField f2 = make_field(permuted, {0, 0, 0, 0, 0, 0, 0, 0}, 48);
    GlobalDescriptor b = fisher_encode(f2, pca, g);

    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        REQUIRE(a[i] == Catch::Approx(b[i]).margin(1e-6));
}

TEST_CASE("mean gradients vanish for descriptors at component means") {
    GmmModel g;
    g.weights = {0.5, 0.5};
    g.means = MatrixD(2, 3, 0.0);
    g.variances = MatrixD(2, 3, 0.1);
    for (int j = 0; j < 3; ++j) {
        g.means.at(0, j) = -20.0;
        g.means.at(1, j) = 20.0;
    }

    MatrixD x(2, 3, 0.0);
    for (int j = 0; j < 3; ++j) {
        x.at(0, j) = -20.0;
        x.at(1, j) = 20.0;
    }
    MatrixD gamma(2, 2, 0.0);
    for (int i = 0; i < 2; ++i) g.posteriors(x.row(i), gamma.row(i));

    std::vector<double> raw = fisher_raw_block(g, x, gamma, {0, 1});
    for (int i = 0; i < 6; ++i) CHECK(std::abs(raw[i]) < 1e-9);  // mean part
}

TEST_CASE("fisher dimension formula") {
    CHECK(fisher_dim(64, 84) == 43008);
    CHECK(fisher_dim(2, 3) == 48);
}

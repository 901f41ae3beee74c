#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

#include "doctest.h"
#include "dsi/datasets.hpp"
#include "dsi/predictor.hpp"

using namespace dsi;

TEST_CASE("fig2: deterministic under seed, rejects degenerate specs") {
    const auto a = gen_fig2_1d({}, 9);
    const auto b = gen_fig2_1d({}, 9);
    CHECK(std::memcmp(a.train.samples.data(), b.train.samples.data(),
                      a.train.samples.size() * 8) == 0);
    CHECK(a.test.labels == b.test.labels);

    const auto c = gen_fig2_1d({}, 10);
    CHECK(std::memcmp(a.train.samples.data(), c.train.samples.data(),
                      a.train.samples.size() * 8) != 0);

    Fig2Config bad;
    bad.source_sd = 0.0;
    CHECK_THROWS_AS(gen_fig2_1d(bad, 1), std::invalid_argument);
}

TEST_CASE("fig2 default source has a deep density gap at zero") {
    const auto data = gen_fig2_1d({}, 1);
    const double at_zero = data.source.density(std::vector<double>{0.0}.data());
    const double at_mode = data.source.density(std::vector<double>{2.0}.data());
    CHECK(at_zero / at_mode < 1e-5);
}

TEST_CASE("fig2 target modes sit between the source modes at low density") {
    const auto data = gen_fig2_1d({}, 2);
    for (double mode : {-0.9, 0.9}) {
        CHECK(mode > -2.0);
        CHECK(mode < 2.0);
        const double dens = data.source.density(&mode);
        const double modal = data.source.density(std::vector<double>{2.0}.data());
        CHECK(dens / modal < 0.05);
    }
}

TEST_CASE("grid2d: zero shift makes all domains identical") {
    Grid2dConfig cfg;
    cfg.domain_shift = 0.0;
    cfg.domain_rotation = 0.0;
    const auto data = gen_multidomain_2d(cfg, 3);
    for (std::size_t m = 1; m < data.domain_specs.size(); ++m)
        for (std::size_t c = 0; c < data.domain_specs[0].components.size(); ++c) {
            CHECK(data.domain_specs[m].components[c].mean ==
                  data.domain_specs[0].components[c].mean);
            CHECK(data.domain_specs[m].components[c].var ==
                  data.domain_specs[0].components[c].var);
        }
    CHECK_THROWS_AS(gen_multidomain_2d({.domains = 1}, 1), std::invalid_argument);
}

TEST_CASE("grid2d: per-domain sample means match the spec within 3 SE") {
    Grid2dConfig cfg;
    cfg.n_per_domain = 4000;
    const auto data = gen_multidomain_2d(cfg, 4);
    for (std::size_t m = 0; m < cfg.domains; ++m) {
        double mean[2] = {0, 0};
        std::size_t count = 0;
        for (std::size_t i = 0; i < data.train.size(); ++i) {
            if (data.train.domain_ids[i] != static_cast<int>(m)) continue;
            mean[0] += data.train.samples(i, 0);
            mean[1] += data.train.samples(i, 1);
            ++count;
        }
        mean[0] /= count;
        mean[1] /= count;
        const auto expect = data.domain_specs[m].mean();
        // per-axis sd of the 2-class mixture is ~sqrt(radius^2/... ) bounded by
        // radius + cluster_sd; 3 SE with that bound is loose but sound
        const double bound =
            3.0 * (cfg.class_radius + cfg.cluster_sd) / std::sqrt(double(count));
        CHECK(std::abs(mean[0] - expect[0]) < bound);
        CHECK(std::abs(mean[1] - expect[1]) < bound);
    }
}

TEST_CASE("grid2d: 90-degree holdout rotation defeats the source discriminant") {
    // the mean-difference (Fisher) rule carries all class signal in this
    // construction; after a 90-degree rotation it splits each cluster ~50/50
    for (std::uint64_t seed : {5, 6, 7}) {
        Grid2dConfig cfg;
        cfg.domain_shift = 0.0;
        cfg.domain_rotation = 0.0;
        cfg.holdout_shift = 0.0;
        cfg.holdout_rotation = 1.5707963267948966;
        cfg.n_per_domain = 1500;
        const auto data = gen_multidomain_2d(cfg, seed);
        double mu0[2] = {0, 0}, mu1[2] = {0, 0};
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < data.train.size(); ++i) {
            double* mu = data.train.labels[i] == 0 ? mu0 : mu1;
            mu[0] += data.train.samples(i, 0);
            mu[1] += data.train.samples(i, 1);
            (data.train.labels[i] == 0 ? n0 : n1) += 1;
        }
        for (int j = 0; j < 2; ++j) {
            mu0[j] /= static_cast<double>(n0);
            mu1[j] /= static_cast<double>(n1);
        }
        const double w[2] = {mu1[0] - mu0[0], mu1[1] - mu0[1]};
        const double mid[2] = {0.5 * (mu0[0] + mu1[0]), 0.5 * (mu0[1] + mu1[1])};
        std::size_t hits = 0;
        for (std::size_t i = 0; i < data.test.size(); ++i) {
            const double d = w[0] * (data.test.samples(i, 0) - mid[0]) +
                             w[1] * (data.test.samples(i, 1) - mid[1]);
            hits += (d > 0.0 ? 1 : 0) == data.test.labels[i];
        }
        const double ood = static_cast<double>(hits) / data.test.size();
        CHECK(std::abs(ood - 0.5) < 0.12);

        // sanity: the same rule is near-perfect in-distribution
        std::size_t id_hits = 0;
        for (std::size_t i = 0; i < data.train.size(); ++i) {
            const double d = w[0] * (data.train.samples(i, 0) - mid[0]) +
                             w[1] * (data.train.samples(i, 1) - mid[1]);
            id_hits += (d > 0.0 ? 1 : 0) == data.train.labels[i];
        }
        CHECK(static_cast<double>(id_hits) / data.train.size() > 0.99);
    }
}

TEST_CASE("cdsprites: masks are 9 pixels and differ on most of them") {
    const auto sq = cdsprites_square_mask(16, 6, 6);
    const auto cr = cdsprites_cross_mask(16, 7, 7);  // same neighborhood
    std::size_t sq_on = 0, cr_on = 0, overlap = 0;
    for (std::size_t i = 0; i < sq.size(); ++i) {
        sq_on += sq[i];
        cr_on += cr[i];
        overlap += sq[i] && cr[i];
    }
    CHECK(sq_on == 9);
    CHECK(cr_on == 9);
    // masks differ on >= 25% of on-pixels (far more here by construction)
    const std::size_t diff = sq_on + cr_on - 2 * overlap;
    CHECK(diff >= sq_on / 4);
    CHECK(diff >= 8);
}

namespace {
// Sprite hue probe: average the 9 brightest pixels, then nearest palette id.
std::size_t nearest_color_id(const double* row, std::size_t grid,
                             const std::vector<std::array<double, 3>>& palette) {
    std::vector<std::pair<double, std::size_t>> bright;
    for (std::size_t p = 0; p < grid * grid; ++p)
        bright.push_back({row[3 * p] + row[3 * p + 1] + row[3 * p + 2], p});
    std::partial_sort(bright.begin(), bright.begin() + 9, bright.end(),
                      [](auto& a, auto& b) { return a.first > b.first; });
    double hue[3] = {0, 0, 0};
    for (int i = 0; i < 9; ++i)
        for (int ch = 0; ch < 3; ++ch) hue[ch] += row[3 * bright[i].second + ch];
    for (double& h : hue) h /= 9.0;
    std::size_t best_c = 0;
    double best_d = 1e18;
    for (std::size_t c = 0; c < palette.size(); ++c) {
        double d2 = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
            const double d = hue[ch] - palette[c][ch];
            d2 += d * d;
        }
        if (d2 < best_d) {
            best_d = d2;
            best_c = c;
        }
    }
    return best_c;
}
}  // namespace

TEST_CASE("cdsprites: rho=1 makes color predict shape inside a domain") {
    CdspritesConfig cfg;
    cfg.n_per_domain = 150;
    cfg.n_test = 50;
    const auto data = gen_mini_cdsprites(cfg, 11);
    const auto palette = cdsprites_palette();
    // construction: the drawn color id encodes shape and domain exactly
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        CHECK(data.train_color_ids[i] % 2 == data.train.labels[i]);
        CHECK(data.train_color_ids[i] / 2 == data.train.domain_ids[i]);
    }
    // and the rendered hue recovers that id despite pixel noise (>= 99%)
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.train.size(); ++i)
        hits += nearest_color_id(data.train.samples.row(i), cfg.grid, palette) ==
                static_cast<std::size_t>(data.train_color_ids[i]);
    CHECK(static_cast<double>(hits) / data.train.size() >= 0.99);
}

TEST_CASE("cdsprites: test-domain color carries no shape information") {
    CdspritesConfig cfg;
    cfg.n_test = 5000;
    cfg.n_per_domain = 10;
    const auto data = gen_mini_cdsprites(cfg, 12);
    const auto palette = cdsprites_palette();
    // empirical mutual information between nearest color id and shape
    std::vector<std::vector<double>> joint(10, std::vector<double>(2, 0.0));
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        const std::size_t cid = nearest_color_id(data.test.samples.row(i),
                                                 cfg.grid, palette);
        joint[cid][data.test.labels[i]] += 1.0;
    }
    const double n = static_cast<double>(data.test.size());
    double mi = 0.0;
    for (std::size_t c = 0; c < 10; ++c)
        for (std::size_t s = 0; s < 2; ++s) {
            const double pxy = joint[c][s] / n;
            if (pxy <= 0.0) continue;
            double px = (joint[c][0] + joint[c][1]) / n;
            double py = 0.0;
            for (std::size_t cc = 0; cc < 10; ++cc) py += joint[cc][s];
            py /= n;
            mi += pxy * std::log(pxy / (px * py));
        }
    CHECK(mi < 0.02);

    CdspritesConfig bad;
    bad.train_correlation = 0.4;
    CHECK_THROWS_AS(gen_mini_cdsprites(bad, 1), std::invalid_argument);
    CdspritesConfig small;
    small.grid = 6;
    CHECK_THROWS_AS(gen_mini_cdsprites(small, 1), std::invalid_argument);
}

TEST_CASE("dataset files round-trip through the DSD1 format") {
    const auto data = gen_fig2_1d({.n_train = 50, .n_test = 10}, 13);
    const std::string path = "/tmp/dsi_test_dataset.dsd";
    write_dataset(path, data.train);
    const LabeledDataset back = read_dataset(path);
    CHECK(back.class_count == 2);
    CHECK(back.domain_count == 1);
    CHECK(back.labels == data.train.labels);
    CHECK(std::memcmp(back.samples.data(), data.train.samples.data(),
                      back.samples.size() * 8) == 0);

    const std::string csv = dataset_csv(back);
    CHECK(csv.find("x0,label,domain") == 0);
}

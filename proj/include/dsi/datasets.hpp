#pragma once

// Desk-scale OoD benchmark generators: the 1-D two-mode illustrative setup,
// rotated/translated 2-D multi-domain mixtures, and a miniature CdSprites-
// style spurious-correlation dataset (shape label, domain color pairs).

#include <array>
#include <string>
#include <vector>

#include "dsi/gmm.hpp"
#include "dsi/matrix.hpp"

namespace dsi {

struct LabeledDataset {
    Matrix samples;
    std::vector<int> labels;
    std::vector<int> domain_ids;
    std::size_t class_count = 0;
    std::size_t domain_count = 0;

    void validate() const;
    std::size_t size() const { return samples.rows(); }
    std::size_t dim() const { return samples.cols(); }
};

void write_dataset(const std::string& path, const LabeledDataset& ds);
LabeledDataset read_dataset(const std::string& path);
std::string dataset_csv(const LabeledDataset& ds);

// ---- 1-D illustrative benchmark ------------------------------------------

struct Fig2Config {
    double source_mean = 2.0;  // class modes at +-source_mean
    double source_sd = 0.4;
    double target_mean = 0.9;  // OoD modes inside the low-density gap
    double target_sd = 0.3;
    std::size_t n_train = 4000;
    std::size_t n_test = 1000;
};

struct Fig2Data {
    LabeledDataset train;
    LabeledDataset test;
    GaussianMixtureSpec source;  // pooled class-conditional mixture
    GaussianMixtureSpec target;
};

Fig2Data gen_fig2_1d(const Fig2Config& cfg, std::uint64_t seed);

// ---- 2-D multi-domain benchmark -------------------------------------------

struct Grid2dConfig {
    std::size_t domains = 3;  // training domains, >= 2
    std::size_t class_count = 2;
    double class_radius = 2.0;   // class means on the x-axis / circle
    double cluster_sd = 0.35;
    double domain_shift = 0.4;     // translation per training domain
    double domain_rotation = 0.2;  // radians per training domain
    double holdout_shift = 0.8;    // held-out domain gets the larger shift
    double holdout_rotation = 0.7;
    std::size_t n_per_domain = 1200;
    std::size_t n_test = 800;
};

struct Grid2dData {
    LabeledDataset train;  // all training domains pooled, domain_ids set
    LabeledDataset test;   // held-out domain
    std::vector<GaussianMixtureSpec> domain_specs;
    GaussianMixtureSpec holdout_spec;
};

Grid2dData gen_multidomain_2d(const Grid2dConfig& cfg, std::uint64_t seed);

// ---- miniature CdSprites ---------------------------------------------------

struct CdspritesConfig {
    std::size_t grid = 16;  // g >= 8
    std::size_t domains = 5;
    double train_correlation = 1.0;  // rho in (0.5, 1]
    std::size_t n_per_domain = 300;
    std::size_t n_test = 1000;
    double pixel_noise = 0.10;
    double hue_jitter = 0.03;
};

struct CdspritesData {
    LabeledDataset train;
    LabeledDataset test;
    std::vector<std::array<double, 3>> colors;  // 2 per domain: [2m]=square, [2m+1]=cross
    std::vector<int> train_color_ids;           // palette index drawn per sprite
    std::vector<int> test_color_ids;
};

CdspritesData gen_mini_cdsprites(const CdspritesConfig& cfg, std::uint64_t seed);

// Shape templates (for tests): 3x3 filled square and span-5 cross masks at a
// given anchor, both 9 pixels.
std::vector<bool> cdsprites_square_mask(std::size_t grid, std::size_t row, std::size_t col);
std::vector<bool> cdsprites_cross_mask(std::size_t grid, std::size_t row, std::size_t col);
std::vector<std::array<double, 3>> cdsprites_palette();

}  // namespace dsi

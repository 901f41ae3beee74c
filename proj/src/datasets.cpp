#include "dsi/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dsi/checkpoint.hpp"

namespace dsi {

void LabeledDataset::validate() const {
    if (samples.rows() != labels.size() || samples.rows() != domain_ids.size())
        throw std::invalid_argument("LabeledDataset: length mismatch");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= class_count)
            throw std::invalid_argument("LabeledDataset: label out of range");
    for (int d : domain_ids)
        if (d < 0 || static_cast<std::size_t>(d) >= domain_count)
            throw std::invalid_argument("LabeledDataset: domain id out of range");
}

void write_dataset(const std::string& path, const LabeledDataset& ds) {
    ds.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open for write: " + path);
    os.write("DSD1", 4);
    write_u32(os, static_cast<std::uint32_t>(ds.samples.rows()));
    write_u32(os, static_cast<std::uint32_t>(ds.samples.cols()));
    write_u32(os, static_cast<std::uint32_t>(ds.class_count));
    write_u32(os, static_cast<std::uint32_t>(ds.domain_count));
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        write_f64(os, ds.samples.data()[i]);
    for (int y : ds.labels) write_u32(os, static_cast<std::uint32_t>(y));
    for (int d : ds.domain_ids) write_u32(os, static_cast<std::uint32_t>(d));
    if (!os) throw CheckpointError("write failed: " + path);
}

LabeledDataset read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "DSD1")
        throw CheckpointError("dataset file: bad magic");
    const std::uint32_t n = read_u32(is);
    const std::uint32_t d = read_u32(is);
    LabeledDataset ds;
    ds.class_count = read_u32(is);
    ds.domain_count = read_u32(is);
    ds.samples = Matrix(n, d);
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        ds.samples.data()[i] = read_f64(is);
    ds.labels.resize(n);
    for (auto& y : ds.labels) y = static_cast<int>(read_u32(is));
    ds.domain_ids.resize(n);
    for (auto& dom : ds.domain_ids) dom = static_cast<int>(read_u32(is));
    ds.validate();
    return ds;
}

std::string dataset_csv(const LabeledDataset& ds) {
    std::ostringstream os;
    os.precision(12);
    for (std::size_t j = 0; j < ds.dim(); ++j) os << 'x' << j << ',';
    os << "label,domain\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t j = 0; j < ds.dim(); ++j) os << ds.samples(r, j) << ',';
        os << ds.labels[r] << ',' << ds.domain_ids[r] << '\n';
    }
    return os.str();
}

// ---- fig2 -------------------------------------------------------------------

namespace {
GaussianMixtureSpec two_class_mixture_1d(double mean, double sd) {
    GaussianMixtureSpec g;
    g.components.push_back({0.5, {-mean}, {sd * sd}});
    g.components.push_back({0.5, {mean}, {sd * sd}});
    g.validate();
    return g;
}

LabeledDataset draw_two_class_1d(double mean, double sd, std::size_t n,
                                 RngStream& rng) {
    LabeledDataset ds;
    ds.class_count = 2;
    ds.domain_count = 1;
    ds.samples = Matrix(n, 1);
    ds.labels.resize(n);
    ds.domain_ids.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(rng.next_below(2));
        ds.labels[i] = y;
        const double mu = y == 0 ? -mean : mean;
        ds.samples(i, 0) = mu + sd * rng.next_normal();
    }
    return ds;
}
}  // namespace

Fig2Data gen_fig2_1d(const Fig2Config& cfg, std::uint64_t seed) {
    if (!(cfg.source_sd > 0.0) || !(cfg.target_sd > 0.0))
        throw std::invalid_argument("gen_fig2_1d: degenerate (zero-variance) spec");
    if (cfg.n_train == 0 || cfg.n_test == 0)
        throw std::invalid_argument("gen_fig2_1d: empty split");
    RngStream rng = make_stream(seed, StreamKind::DataGen, 1);
    Fig2Data out;
    out.train = draw_two_class_1d(cfg.source_mean, cfg.source_sd, cfg.n_train, rng);
    out.test = draw_two_class_1d(cfg.target_mean, cfg.target_sd, cfg.n_test, rng);
    out.source = two_class_mixture_1d(cfg.source_mean, cfg.source_sd);
    out.target = two_class_mixture_1d(cfg.target_mean, cfg.target_sd);
    return out;
}

// ---- 2-D multi-domain --------------------------------------------------------

namespace {
GaussianMixtureSpec domain_spec_2d(const Grid2dConfig& cfg, double shift,
                                   double rotation) {
    GaussianMixtureSpec g;
    const double w = 1.0 / static_cast<double>(cfg.class_count);
    for (std::size_t c = 0; c < cfg.class_count; ++c) {
        // class means on a circle (x-axis for 2 classes), then rotate + translate
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(c) /
                             static_cast<double>(std::max<std::size_t>(cfg.class_count, 2));
        const double base_x = cfg.class_radius * std::cos(theta);
        const double base_y = cfg.class_radius * std::sin(theta);
        const double rx = base_x * std::cos(rotation) - base_y * std::sin(rotation);
        const double ry = base_x * std::sin(rotation) + base_y * std::cos(rotation);
        g.components.push_back(
            {w, {rx + shift, ry + shift}, {cfg.cluster_sd * cfg.cluster_sd,
                                           cfg.cluster_sd * cfg.cluster_sd}});
    }
    g.validate();
    return g;
}

void append_domain_draws(LabeledDataset& ds, const GaussianMixtureSpec& spec,
                         std::size_t n, int domain, RngStream& rng,
                         std::vector<double>& buffer) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = rng.next_below(spec.components.size());
        const auto& comp = spec.components[cls];
        for (std::size_t j = 0; j < 2; ++j)
            buffer.push_back(comp.mean[j] + std::sqrt(comp.var[j]) * rng.next_normal());
        ds.labels.push_back(static_cast<int>(cls));
        ds.domain_ids.push_back(domain);
    }
}
}  // namespace

Grid2dData gen_multidomain_2d(const Grid2dConfig& cfg, std::uint64_t seed) {
    if (cfg.domains < 2)
        throw std::invalid_argument("gen_multidomain_2d: need at least 2 domains");
    if (cfg.class_count < 2)
        throw std::invalid_argument("gen_multidomain_2d: need at least 2 classes");
    RngStream rng = make_stream(seed, StreamKind::DataGen, 2);

    Grid2dData out;
    std::vector<double> buffer;
    out.train.class_count = cfg.class_count;
    out.train.domain_count = cfg.domains;
    for (std::size_t m = 0; m < cfg.domains; ++m) {
        // symmetric spread of training-domain shifts around the origin
        const double centered =
            static_cast<double>(m) - 0.5 * static_cast<double>(cfg.domains - 1);
        const auto spec = domain_spec_2d(cfg, cfg.domain_shift * centered,
                                         cfg.domain_rotation * centered);
        out.domain_specs.push_back(spec);
        append_domain_draws(out.train, spec, cfg.n_per_domain, static_cast<int>(m),
                            rng, buffer);
    }
    out.train.samples = Matrix(out.train.labels.size(), 2, std::move(buffer));

    out.holdout_spec = domain_spec_2d(cfg, cfg.holdout_shift, cfg.holdout_rotation);
    buffer = {};
    out.test.class_count = cfg.class_count;
    out.test.domain_count = 1;
    append_domain_draws(out.test, out.holdout_spec, cfg.n_test, 0, rng, buffer);
    out.test.samples = Matrix(out.test.labels.size(), 2, std::move(buffer));
    out.train.validate();
    out.test.validate();
    return out;
}

// ---- miniature CdSprites -----------------------------------------------------

std::vector<std::array<double, 3>> cdsprites_palette() {
    // ten hues on a ring around mid-gray: distinct for a classifier at the
    // rendering noise level, close enough that recoloring costs less than
    // reshaping under the diffusion transport
    std::vector<std::array<double, 3>> colors;
    for (int i = 0; i < 10; ++i) {
        const double a = 2.0 * std::numbers::pi * i / 10.0;
        colors.push_back({std::clamp(0.55 + 0.42 * std::cos(a), 0.03, 1.0),
                          std::clamp(0.55 + 0.42 * std::sin(a), 0.03, 1.0),
                          std::clamp(0.55 - 0.294 * std::cos(a + 1.1), 0.03, 1.0)});
    }
    return colors;
}

std::vector<bool> cdsprites_square_mask(std::size_t grid, std::size_t row,
                                        std::size_t col) {
    std::vector<bool> m(grid * grid, false);
    for (std::size_t r = row; r < row + 3; ++r)
        for (std::size_t c = col; c < col + 3; ++c) m[r * grid + c] = true;
    return m;
}

std::vector<bool> cdsprites_cross_mask(std::size_t grid, std::size_t row,
                                       std::size_t col) {
    std::vector<bool> m(grid * grid, false);
    for (std::size_t r = row - 2; r <= row + 2; ++r) m[r * grid + col] = true;
    for (std::size_t c = col - 2; c <= col + 2; ++c) m[row * grid + c] = true;
    return m;
}

namespace {
void render_sprite(double* out, std::size_t grid, int shape,
                   const std::array<double, 3>& color, double pixel_noise,
                   double hue_jitter, RngStream& rng) {
    const std::size_t g = grid;
    std::array<double, 3> c = color;
    for (auto& ch : c)
        ch = std::clamp(ch + hue_jitter * rng.next_normal(), 0.0, 1.0);
    std::vector<bool> mask;
    if (shape == 0) {
        const std::size_t row = rng.next_below(g - 2);
        const std::size_t col = rng.next_below(g - 2);
        mask = cdsprites_square_mask(g, row, col);
    } else {
        const std::size_t row = 2 + rng.next_below(g - 4);
        const std::size_t col = 2 + rng.next_below(g - 4);
        mask = cdsprites_cross_mask(g, row, col);
    }
    for (std::size_t p = 0; p < g * g; ++p)
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const double base = mask[p] ? c[ch] : 0.0;
            out[p * 3 + ch] =
                std::clamp(base + pixel_noise * rng.next_normal(), 0.0, 1.0);
        }
}
}  // namespace

CdspritesData gen_mini_cdsprites(const CdspritesConfig& cfg, std::uint64_t seed) {
    if (cfg.grid < 8) throw std::invalid_argument("gen_mini_cdsprites: grid must be >= 8");
    if (!(cfg.train_correlation > 0.5) || cfg.train_correlation > 1.0)
        throw std::invalid_argument("gen_mini_cdsprites: rho must be in (0.5, 1]");
    if (cfg.domains != 5)
        throw std::invalid_argument("gen_mini_cdsprites: the palette defines 5 domains");

    RngStream rng = make_stream(seed, StreamKind::DataGen, 3);
    CdspritesData out;
    out.colors = cdsprites_palette();
    const std::size_t d = cfg.grid * cfg.grid * 3;

    out.train.class_count = 2;
    out.train.domain_count = cfg.domains;
    out.train.samples = Matrix(cfg.domains * cfg.n_per_domain, d);
    std::size_t row = 0;
    for (std::size_t m = 0; m < cfg.domains; ++m) {
        for (std::size_t i = 0; i < cfg.n_per_domain; ++i, ++row) {
            const int shape = static_cast<int>(rng.next_below(2));
            const bool correlated = rng.next_unit() < cfg.train_correlation;
            const std::size_t color_idx =
                2 * m + static_cast<std::size_t>(correlated ? shape : 1 - shape);
            render_sprite(out.train.samples.row(row), cfg.grid, shape,
                          out.colors[color_idx], cfg.pixel_noise, cfg.hue_jitter, rng);
            out.train_color_ids.push_back(static_cast<int>(color_idx));
            out.train.labels.push_back(shape);
            out.train.domain_ids.push_back(static_cast<int>(m));
        }
    }

    out.test.class_count = 2;
    out.test.domain_count = 1;
    out.test.samples = Matrix(cfg.n_test, d);
    for (std::size_t i = 0; i < cfg.n_test; ++i) {
        const int shape = static_cast<int>(rng.next_below(2));
        const std::size_t color_idx = rng.next_below(10);  // shape and color independent
        render_sprite(out.test.samples.row(i), cfg.grid, shape, out.colors[color_idx],
                      cfg.pixel_noise, cfg.hue_jitter, rng);
        out.test_color_ids.push_back(static_cast<int>(color_idx));
        out.test.labels.push_back(shape);
        out.test.domain_ids.push_back(0);
    }
    out.train.validate();
    out.test.validate();
    return out;
}

}  // namespace dsi

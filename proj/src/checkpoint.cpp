#include "dsi/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace dsi {

namespace {
template <typename T>
void write_le(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> raw;
    std::memcpy(raw.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(raw.begin(), raw.end());
    os.write(reinterpret_cast<const char*>(raw.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> raw;
    is.read(reinterpret_cast<char*>(raw.data()), sizeof(T));
    if (!is) throw CheckpointError("checkpoint: truncated read");
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(raw.begin(), raw.end());
    T v;
    std::memcpy(&v, raw.data(), sizeof(T));
    return v;
}
}  // namespace

void write_u16(std::ostream& os, std::uint16_t v) { write_le(os, v); }
void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v); }
void write_f64(std::ostream& os, double v) { write_le(os, v); }
std::uint16_t read_u16(std::istream& is) { return read_le<std::uint16_t>(is); }
std::uint32_t read_u32(std::istream& is) { return read_le<std::uint32_t>(is); }
double read_f64(std::istream& is) { return read_le<double>(is); }

void write_network_blob(std::ostream& os, const MlpNetwork& net) {
    os.write("DSI1", 4);
    write_u16(os, kCheckpointVersion);
    write_u16(os, static_cast<std::uint16_t>(net.layer_count()));
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        const Matrix& w = net.weights()[i];
        write_u32(os, static_cast<std::uint32_t>(w.rows()));
        write_u32(os, static_cast<std::uint32_t>(w.cols()));
        for (std::size_t p = 0; p < w.size(); ++p) write_f64(os, w.data()[p]);
        const Matrix& b = net.biases()[i];
        for (std::size_t p = 0; p < b.size(); ++p) write_f64(os, b.data()[p]);
    }
}

NetworkBlob read_network_blob(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DSI1", 4) != 0)
        throw CheckpointError("checkpoint: bad magic");
    const std::uint16_t version = read_u16(is);
    if (version != kCheckpointVersion)
        throw CheckpointError("checkpoint: unsupported version " +
                              std::to_string(version));
    const std::uint16_t layers = read_u16(is);
    NetworkBlob blob;
    for (std::uint16_t i = 0; i < layers; ++i) {
        const std::uint32_t rows = read_u32(is);
        const std::uint32_t cols = read_u32(is);
        Matrix w(rows, cols);
        for (std::size_t p = 0; p < w.size(); ++p) w.data()[p] = read_f64(is);
        Matrix b(1, cols);
        for (std::size_t p = 0; p < b.size(); ++p) b.data()[p] = read_f64(is);
        blob.weights.push_back(std::move(w));
        blob.biases.push_back(std::move(b));
    }
    return blob;
}

void write_network_trailer(std::ostream& os, const MlpNetwork& net) {
    os.put(net.activation() == Activation::Tanh ? 0 : 1);
    const auto& te = net.time_embedding();
    os.put(te ? 1 : 0);
    write_u16(os, static_cast<std::uint16_t>(te ? te->dim : 0));
    write_f64(os, te ? te->max_period : 0.0);
}

MlpNetwork assemble_network(NetworkBlob blob, std::istream& is) {
    const int act_raw = is.get();
    const int has_te = is.get();
    if (act_raw < 0 || has_te < 0) throw CheckpointError("checkpoint: truncated trailer");
    const std::uint16_t te_dim = read_u16(is);
    const double te_max = read_f64(is);
    std::optional<TimeEmbedding> te;
    if (has_te) te = TimeEmbedding{te_dim, te_max};

    if (blob.weights.empty()) throw CheckpointError("checkpoint: no layers");
    std::vector<std::size_t> dims;
    dims.push_back(blob.weights.front().rows() - (te ? te->dim : 0));
    for (const Matrix& w : blob.weights) dims.push_back(w.cols());
    return MlpNetwork(std::move(dims), act_raw == 0 ? Activation::Tanh : Activation::Relu,
                      te, std::move(blob.weights), std::move(blob.biases));
}

}  // namespace dsi

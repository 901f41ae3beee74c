#pragma once

// Binary checkpoint formats (all little-endian).
//
// Network blob:
//   magic "DSI1" | version u16 | layer_count u16 |
//   per layer: rows u32 | cols u32 | weights f64[rows*cols] | biases f64[cols]
//
// Predictor file:  network blob | class_count u32 | trailer
// Diffusion file:  network blob | T u32 | sigmas f64[T] |
//                  domain_id (len u32 | utf8 bytes) | trailer
//
// The trailer reconstructs what the blob alone cannot:
//   activation u8 (0 tanh, 1 relu) | has_te u8 | te_dim u16 | te_max_period f64

#include <iosfwd>
#include <string>

#include "dsi/mlp.hpp"

namespace dsi {

inline constexpr std::uint16_t kCheckpointVersion = 1;

void write_network_blob(std::ostream& os, const MlpNetwork& net);
// Reads the blob; dims/activation/te come from the trailer read separately.
struct NetworkBlob {
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;
};
NetworkBlob read_network_blob(std::istream& is);

void write_network_trailer(std::ostream& os, const MlpNetwork& net);
MlpNetwork assemble_network(NetworkBlob blob, std::istream& trailer_is);

// Little-endian primitives shared by the dataset/report writers.
void write_u16(std::ostream& os, std::uint16_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_f64(std::ostream& os, double v);
std::uint16_t read_u16(std::istream& is);
std::uint32_t read_u32(std::istream& is);
double read_f64(std::istream& is);

class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dsi

#pragma once

#include <cstdint>
#include <string>

#include "edulstm/data.hpp"
#include "edulstm/model.hpp"

namespace edulstm {

// Versioned little-endian binary checkpoint. Layout (version 1):
//   magic "EDULSTM\0", u32 version,
//   u64 init_seed, u64 train_seed,
//   model config: u64 input_dim, u64 static_dim, u64 hidden_dim,
//     u8 fuse_forget_gate, f64 dropout_rate, u32 n_tasks, u8 task id each,
//   encoding config: u64 hash_buckets, u64 static_dim,
//     f64 elapsed_mean, f64 elapsed_std, f64 loggap_mean, f64 loggap_std,
//   parameter arrays in param_spans() order, each as u64 count + raw f64s.
// Doubles are stored as raw bit patterns, so save/load round-trips bitwise.
struct Checkpoint {
    ModelConfig model;
    EncodingConfig encoding;
    std::uint64_t init_seed = 0;
    std::uint64_t train_seed = 0;
    FusedLstmParams params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace edulstm

#ifndef MACBIG_CHECKPOINT_HPP
#define MACBIG_CHECKPOINT_HPP

#include <string>

#include "macbig/model.hpp"
#include "macbig/textprep.hpp"

namespace macbig {

// File layout: 8-byte magic "MACBIG01", u32 little-endian manifest length,
// JSON manifest (format version, hyperparameters, vocabulary, ordered tensor
// table with name/shape/byte offset), then raw float32 little-endian tensor
// data in manifest order. save(load(x)) is byte-identical to x.

inline constexpr char kCheckpointMagic[8] = {'M', 'A', 'C', 'B',
                                             'I', 'G', '0', '1'};

struct LoadedCheckpoint {
  MacbigParams params;
  Vocabulary vocab;
};

void save_checkpoint(const std::string& path, const MacbigParams& params,
                     const Vocabulary& vocab);

// Throws CheckpointError with Code::bad_magic, Code::truncated or
// Code::inconsistent_manifest.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace macbig

#endif

#ifndef MACBIG_GRADCHECK_SUITE_HPP
#define MACBIG_GRADCHECK_SUITE_HPP

#include <iosfwd>

#include "macbig/model.hpp"

namespace macbig {

// Model small enough for finite differences over every parameter. The
// sentence capacity is the smallest that survives both pooling stages with
// the reduced kernel set.
HyperParams tiny_hyperparams();

constexpr std::size_t kTinyVocab = 20;

// Per-layer and end-to-end finite-difference checks (eps 1e-3, relative
// tolerance 1e-3 per tensor). `quick` runs one seed instead of three.
// Prints one line per check; returns true when every check passes.
bool run_gradcheck_suite(bool quick, std::ostream& out);

}  // namespace macbig

#endif

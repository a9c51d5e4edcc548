#pragma once

#include <map>
#include <string>

#include "debias/models.hpp"
#include "debias/optim.hpp"

namespace debias {

// Everything needed to resume or evaluate a run: the three parameter sets,
// the geometry that shaped them, and (optionally) the optimizer states keyed
// by parameter name.
struct Checkpoint {
    ArchConfig arch;
    EncoderParams enc;
    DecoderParams dec;
    AdversaryParams adv;
    std::map<std::string, AdamState> opt_main; // encoder+decoder states
    std::map<std::string, AdamState> opt_adv;  // adversary states
};

// DBCK round trip; tensors are bit-exact across save/load.
void save_checkpoint(const std::string& path, Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

} // namespace debias

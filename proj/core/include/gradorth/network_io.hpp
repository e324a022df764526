#pragma once

#include <filesystem>
#include <iosfwd>

#include "gradorth/network.hpp"

namespace gradorth {

// Text header followed by the GOMX-encoded weights of every layer:
//
//   GRADORTH-NETWORK 1
//   loss = cross_entropy
//   seed = 0
//   frozen = true
//   layers = 2
//   layer 0 kind=dense in=16 out=8 activation=relu bias=true offset=0 bytes=...
//   layer 1 kind=conv in_channels=2 out_channels=3 kernel=3 in_h=5 in_w=5 activation=identity bias=true offset=... bytes=...
//   end
//   <binary payload>
//
// Offsets count bytes from the first payload byte (just after "end\n").
void write_network(std::ostream& out, const Network& net);
Network read_network(std::istream& in);
void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);

}  // namespace gradorth

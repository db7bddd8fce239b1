#pragma once
#include <filesystem>
#include <iosfwd>

#include "kmarket/ledger.hpp"

namespace kmarket {

// Line-oriented chain export: a header record, one record per block, then one record
// per stored payload. Hashes, signatures and payload bytes are lowercase hex.
void write_chain(std::ostream& out, const Chain& chain);
void write_chain_file(const std::filesystem::path& path, const Chain& chain);

// Parses without verifying; run verify_chain on the result.
Chain read_chain(std::istream& in);
Chain read_chain_file(const std::filesystem::path& path);

}  // namespace kmarket

#include "kmarket/chain_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "kmarket/error.hpp"

namespace kmarket {

namespace {

using nlohmann::json;

constexpr int kChainFormatVersion = 1;

template <std::size_t N>
std::array<std::uint8_t, N> hex_field(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string())
    throw Error(Errc::parse_error, "line " + std::to_string(line) + ": missing field '" + key + "'");
  auto v = crypto::fixed_from_hex<N>(j[key].get<std::string>());
  if (!v) throw Error(Errc::parse_error, "line " + std::to_string(line) + ": field '" + key + "' is not valid hex");
  return *v;
}

std::uint64_t uint_field(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_number_unsigned())
    throw Error(Errc::parse_error, "line " + std::to_string(line) + ": field '" + key + "' must be an unsigned integer");
  return j[key].get<std::uint64_t>();
}

}  // namespace

void write_chain(std::ostream& out, const Chain& chain) {
  json header{{"format", "kmarket-chain"},
              {"version", kChainFormatVersion},
              {"blocks", chain.blocks().size()},
              {"payloads", chain.payloads().entries().size()}};
  out << header.dump() << '\n';
  for (const auto& b : chain.blocks()) {
    json txs = json::array();
    for (const auto& tx : b.transactions) {
      txs.push_back({{"kind", std::string(to_string(tx.kind))},
                     {"actor", tx.actor},
                     {"payload_digest", crypto::to_hex(tx.payload_digest)},
                     {"nonce", tx.nonce},
                     {"signature", crypto::to_hex(tx.signature)}});
    }
    json rec{{"type", "block"},
             {"height", b.height},
             {"timestamp", b.timestamp},
             {"prev_hash", crypto::to_hex(b.prev_hash)},
             {"tx_root", crypto::to_hex(b.tx_root)},
             {"hash", crypto::to_hex(b.hash)},
             {"transactions", std::move(txs)}};
    out << rec.dump() << '\n';
  }
  for (const auto& [digest, data] : chain.payloads().entries()) {
    json rec{{"type", "payload"}, {"digest", crypto::to_hex(digest)}, {"data", crypto::to_hex(data)}};
    out << rec.dump() << '\n';
  }
}

void write_chain_file(const std::filesystem::path& path, const Chain& chain) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  write_chain(out, chain);
  if (!out) throw Error(Errc::io_error, "write failed for " + path.string());
}

Chain read_chain(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::optional<json> {
    if (!std::getline(in, line)) return std::nullopt;
    ++line_no;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": not a JSON object");
    return j;
  };

  auto header = next();
  if (!header || header->value("format", "") != "kmarket-chain")
    throw Error(Errc::parse_error, "line 1: not a kmarket chain file");
  if (header->value("version", 0) != kChainFormatVersion)
    throw Error(Errc::parse_error, "line 1: unsupported chain format version");
  const auto block_count = uint_field(*header, "blocks", 1);
  const auto payload_count = uint_field(*header, "payloads", 1);

  std::vector<Block> blocks;
  PayloadStore store;
  for (std::uint64_t i = 0; i < block_count; ++i) {
    auto j = next();
    if (!j || j->value("type", "") != "block")
      throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": expected a block record");
    Block b;
    b.height = uint_field(*j, "height", line_no);
    b.timestamp = uint_field(*j, "timestamp", line_no);
    b.prev_hash = hex_field<32>(*j, "prev_hash", line_no);
    b.tx_root = hex_field<32>(*j, "tx_root", line_no);
    b.hash = hex_field<32>(*j, "hash", line_no);
    if (!j->contains("transactions") || !(*j)["transactions"].is_array())
      throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": missing transactions");
    for (const auto& t : (*j)["transactions"]) {
      Transaction tx;
      auto kind = tx_kind_from_string(t.value("kind", ""));
      if (!kind) throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": unknown transaction kind");
      tx.kind = *kind;
      if (!t.contains("actor") || !t["actor"].is_string())
        throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": missing actor");
      tx.actor = t["actor"].get<std::string>();
      tx.payload_digest = hex_field<32>(t, "payload_digest", line_no);
      tx.nonce = uint_field(t, "nonce", line_no);
      tx.signature = hex_field<64>(t, "signature", line_no);
      b.transactions.push_back(std::move(tx));
    }
    blocks.push_back(std::move(b));
  }
  for (std::uint64_t i = 0; i < payload_count; ++i) {
    auto j = next();
    if (!j || j->value("type", "") != "payload")
      throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": expected a payload record");
    const auto digest = hex_field<32>(*j, "digest", line_no);
    auto data = crypto::from_hex(j->value("data", ""));
    if (!data) throw Error(Errc::parse_error, "line " + std::to_string(line_no) + ": payload data is not valid hex");
    store.insert_unchecked(digest, std::move(*data));
  }
  if (std::getline(in, line) && !line.empty())
    throw Error(Errc::parse_error, "line " + std::to_string(line_no + 1) + ": unexpected trailing record");
  return Chain::from_parts(std::move(blocks), std::move(store));
}

Chain read_chain_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return read_chain(in);
}

}  // namespace kmarket

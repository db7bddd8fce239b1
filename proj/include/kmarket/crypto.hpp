#pragma once
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Thin wrappers over libsodium. SHA-256 for digests, Ed25519 for signatures,
// XSalsa20-Poly1305 (secretbox) for payload encryption.
namespace kmarket::crypto {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;
using PublicKey = std::array<std::uint8_t, 32>;
using Seed = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;
using SymmetricKey = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view text);

std::span<const std::uint8_t> as_bytes(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> data);
// Strict: lowercase hex only, even length.
std::optional<Bytes> from_hex(std::string_view hex);

template <std::size_t N>
std::optional<std::array<std::uint8_t, N>> fixed_from_hex(std::string_view hex) {
  auto bytes = from_hex(hex);
  if (!bytes || bytes->size() != N) return std::nullopt;
  std::array<std::uint8_t, N> out{};
  std::copy(bytes->begin(), bytes->end(), out.begin());
  return out;
}

class KeyPair {
public:
  static KeyPair from_seed(const Seed& seed);

  const PublicKey& public_key() const noexcept { return public_key_; }
  Signature sign(std::span<const std::uint8_t> message) const;

private:
  KeyPair() = default;
  PublicKey public_key_{};
  std::array<std::uint8_t, 64> secret_key_{};
};

bool verify(const PublicKey& key, std::span<const std::uint8_t> message, const Signature& signature);

std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message);

// Deterministic sealing: the nonce is derived from key and plaintext, so equal
// (key, plaintext) pairs give equal ciphertexts. Output is nonce || box.
Bytes seal(const SymmetricKey& key, std::span<const std::uint8_t> plaintext);
std::optional<Bytes> open(const SymmetricKey& key, std::span<const std::uint8_t> sealed);

}  // namespace kmarket::crypto

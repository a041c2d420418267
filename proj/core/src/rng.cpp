#include "wmaudit/rng.hpp"

namespace wmaudit {

std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index) noexcept {
  const std::uint64_t base = mix64(master ^ fnv1a64(tag));
  return mix64(base + 0x9e3779b97f4a7c15ULL * (index + 1));
}

}  // namespace wmaudit

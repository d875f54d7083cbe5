#include "cardioaug/rng.hpp"

namespace cardioaug {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t hash_string(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t RandomStream::next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double RandomStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

RandomStream RandomStream::split(std::uint64_t tag) const noexcept {
    return RandomStream(mix64(key_ ^ mix64(tag + kGolden)));
}

RandomStream make_stream(const SeedSpec &seed) noexcept {
    std::uint64_t key = mix64(seed.global_seed + kGolden);
    key = mix64(key ^ hash_string(seed.subject));
    key = mix64(key ^ (static_cast<std::uint64_t>(seed.slice) + 1) * kGolden);
    key = mix64(key ^ mix64((static_cast<std::uint64_t>(seed.epoch) + 1) ^ 0x5851f42d4c957f2dULL));
    return RandomStream(key);
}

} // namespace cardioaug

#include "qvr/rng.hpp"

#include "qvr/normal.hpp"

#include <stdexcept>

namespace qvr {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key)
{
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kPhiloxW0;
            key[1] += kPhiloxW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t master_seed, std::vector<std::uint64_t> path)
    : seed_(master_seed), path_(std::move(path))
{
    // Two independent hash chains over (seed, path): one becomes the Philox
    // key, the other the fixed high half of the counter.
    std::uint64_t a = mix64(seed_ ^ 0x6A09E667F3BCC908ull);
    std::uint64_t b = mix64(seed_ ^ 0xBB67AE8584CAA73Bull);
    for (std::uint64_t step : path_) {
        a = mix64(a ^ mix64(step + 0x3C6EF372FE94F82Bull));
        b = mix64(b ^ mix64(step + 0xA54FF53A5F1D36F1ull));
    }
    // Length is folded in so [] and [0] differ even if a hash collided.
    a = mix64(a + path_.size());
    key_ = {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
    prefix_ = b;
}

RngStream RngStream::child(std::uint64_t id) const
{
    auto path = path_;
    path.push_back(id);
    return RngStream(seed_, std::move(path));
}

void RngStream::refill()
{
    const Philox4x32::Counter ctr = {
        static_cast<std::uint32_t>(position_), static_cast<std::uint32_t>(position_ >> 32),
        static_cast<std::uint32_t>(prefix_), static_cast<std::uint32_t>(prefix_ >> 32)};
    ++position_;
    const auto out = Philox4x32::block(ctr, key_);
    buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    buffered_ = 2;
}

std::uint64_t RngStream::next_u64()
{
    if (buffered_ == 0) refill();
    return buffer_[2 - buffered_--];
}

double RngStream::uniform()
{
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return normal::quantile(uniform()); }

std::uint64_t RngStream::below(std::uint64_t bound)
{
    if (bound == 0) throw std::invalid_argument("RngStream::below: bound must be positive");
    // Lemire's nearly-divisionless method.
    __extension__ using u128 = unsigned __int128;
    u128 m = static_cast<u128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = -bound % bound;
        while (low < threshold) {
            m = static_cast<u128>(next_u64()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace qvr

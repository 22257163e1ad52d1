#include "owd/wta.hpp"

#include <bit>
#include <cmath>
#include <numeric>

#include "owd/parallel.hpp"
#include "owd/rng.hpp"

namespace owd {

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::int32_t bits_for_window(std::int32_t k) {
    std::int32_t b = 1;
    while ((1 << b) < k) ++b;
    return b;
}

}  // namespace

std::uint64_t WtaHasher::fingerprint() const {
    std::uint64_t f = mix64(static_cast<std::uint64_t>(d) * 0x100000001b3ULL);
    f = mix64(f ^ static_cast<std::uint64_t>(hashes));
    f = mix64(f ^ static_cast<std::uint64_t>(window));
    f = mix64(f ^ seed);
    return f;
}

WtaHasher new_hasher(std::int32_t d, std::int32_t hashes, std::int32_t window, std::uint64_t seed) {
    if (window > d) raise(Errc::window_too_large, "K=" + std::to_string(window) + " > d=" + std::to_string(d));
    if (window < 2) raise(Errc::invalid_param, "window K must be >= 2");
    if (hashes < 1) raise(Errc::invalid_param, "hash count H must be >= 1");

    WtaHasher h;
    h.d = d;
    h.hashes = hashes;
    h.window = window;
    h.seed = seed;
    h.prefixes.resize(static_cast<std::size_t>(hashes) * window);

    // First K steps of a Fisher-Yates permutation per hash; swaps undone
    // afterwards so the pool does not need re-initialising.
    Rng rng(seed, 0x7774612068617368ULL);
    std::vector<std::int32_t> pool(static_cast<std::size_t>(d));
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<std::pair<std::int32_t, std::int32_t>> undo(static_cast<std::size_t>(window));
    for (std::int32_t i = 0; i < hashes; ++i) {
        for (std::int32_t k = 0; k < window; ++k) {
            const auto j = static_cast<std::int32_t>(k + rng.below(static_cast<std::uint64_t>(d - k)));
            undo[static_cast<std::size_t>(k)] = {k, j};
            std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
            h.prefixes[static_cast<std::size_t>(i) * window + k] = pool[static_cast<std::size_t>(k)];
        }
        for (std::int32_t k = window - 1; k >= 0; --k)
            std::swap(pool[static_cast<std::size_t>(undo[static_cast<std::size_t>(k)].first)],
                      pool[static_cast<std::size_t>(undo[static_cast<std::size_t>(k)].second)]);
    }
    return h;
}

std::vector<std::uint32_t> HashCodeMatrix::unpack_row(std::int64_t i) const {
    std::vector<std::uint32_t> out(static_cast<std::size_t>(hashes));
    for (std::int32_t h = 0; h < hashes; ++h) out[static_cast<std::size_t>(h)] = get(i, h);
    return out;
}

HashCodeMatrix HashCodeMatrix::gather(std::span<const std::int64_t> rows) const {
    HashCodeMatrix out = *this;
    out.n = static_cast<std::int64_t>(rows.size());
    out.words.assign(static_cast<std::size_t>(out.n) * words_per_row, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = row(rows[i]);
        std::copy(src.begin(), src.end(),
                  out.words.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(words_per_row)));
    }
    return out;
}

HashCodeMatrix HashCodeMatrix::empty_like(const WtaHasher& hasher, std::int64_t n) {
    HashCodeMatrix m;
    m.n = n;
    m.hashes = hasher.hashes;
    m.window = hasher.window;
    m.bits = bits_for_window(hasher.window);
    m.entries_per_word = 64 / m.bits;
    m.words_per_row = (m.hashes + m.entries_per_word - 1) / m.entries_per_word;
    m.hasher_fingerprint = hasher.fingerprint();
    m.words.assign(static_cast<std::size_t>(n) * m.words_per_row, 0);
    return m;
}

namespace {

void hash_row_into(const WtaHasher& hasher, std::span<const float> x, HashCodeMatrix& out,
                   std::int64_t row) {
    for (std::int32_t h = 0; h < hasher.hashes; ++h) {
        const auto pre = hasher.prefix(h);
        std::uint32_t best = 0;
        float best_val = x[static_cast<std::size_t>(pre[0])];
        for (std::int32_t k = 1; k < hasher.window; ++k) {
            const float v = x[static_cast<std::size_t>(pre[static_cast<std::size_t>(k)])];
            if (v > best_val) {
                best_val = v;
                best = static_cast<std::uint32_t>(k);
            }
        }
        out.set(row, h, best);
    }
}

}  // namespace

std::vector<std::uint32_t> hash(const WtaHasher& hasher, std::span<const float> x) {
    if (static_cast<std::int32_t>(x.size()) != hasher.d)
        raise(Errc::dimension_mismatch, "row has dimension " + std::to_string(x.size()) +
                                            ", hasher expects " + std::to_string(hasher.d));
    HashCodeMatrix tmp = HashCodeMatrix::empty_like(hasher, 1);
    hash_row_into(hasher, x, tmp, 0);
    return tmp.unpack_row(0);
}

HashCodeMatrix hash_batch(const WtaHasher& hasher, const FeatureMatrix& x) {
    if (x.d != hasher.d)
        raise(Errc::dimension_mismatch, "matrix has d=" + std::to_string(x.d) +
                                            ", hasher expects " + std::to_string(hasher.d));
    HashCodeMatrix out = HashCodeMatrix::empty_like(hasher, x.n);
    parallel_for(x.n, 64, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) hash_row_into(hasher, x.row(i), out, i);
    });
    return out;
}

void require_compatible(const HashCodeMatrix& a, const HashCodeMatrix& b) {
    if (a.hasher_fingerprint != b.hasher_fingerprint || a.hashes != b.hashes)
        raise(Errc::incompatible_codes, "code matrices come from different hashers");
}

std::int64_t hamming_rows(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                          std::int32_t bits, std::int32_t entries_per_word, std::int32_t hashes) {
    if (bits == 1) {
        std::int64_t acc = 0;
        for (std::size_t w = 0; w < a.size(); ++w) acc += std::popcount(a[w] ^ b[w]);
        return acc;
    }
    const std::uint64_t mask = (bits == 64) ? ~0ULL : ((1ULL << bits) - 1);
    std::int64_t acc = 0;
    std::int32_t h = 0;
    for (std::size_t w = 0; w < a.size() && h < hashes; ++w) {
        std::uint64_t x = a[w], y = b[w];
        for (std::int32_t e = 0; e < entries_per_word && h < hashes; ++e, ++h) {
            acc += ((x & mask) != (y & mask));
            x >>= bits;
            y >>= bits;
        }
    }
    return acc;
}

std::int64_t hamming(const HashCodeMatrix& a, std::int64_t i, const HashCodeMatrix& b, std::int64_t j) {
    require_compatible(a, b);
    return hamming_rows(a.row(i), b.row(j), a.bits, a.entries_per_word, a.hashes);
}

}  // namespace owd

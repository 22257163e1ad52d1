#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "owd/core.hpp"

namespace owd {

// Winner-Take-All ordinal hasher: H windows, each the first K entries of an
// independent seeded permutation of [0, d). A code entry is the argmax index
// within its window, so codes are invariant to any strictly increasing
// transform of the input.
struct WtaHasher {
    std::int32_t d = 0;
    std::int32_t hashes = 0;  // H
    std::int32_t window = 0;  // K
    std::uint64_t seed = 0;
    std::vector<std::int32_t> prefixes;  // H*K window indices, row-major

    std::span<const std::int32_t> prefix(std::int32_t h) const {
        return {prefixes.data() + static_cast<std::size_t>(h) * window,
                static_cast<std::size_t>(window)};
    }
    std::uint64_t fingerprint() const;
};

WtaHasher new_hasher(std::int32_t d, std::int32_t hashes, std::int32_t window, std::uint64_t seed);

// n x H codes in [0, K), packed ceil(log2 K) bits per entry into 64-bit
// words. Entries never straddle a word; unused tail bits are zero.
struct HashCodeMatrix {
    std::vector<std::uint64_t> words;
    std::int64_t n = 0;
    std::int32_t hashes = 0;
    std::int32_t window = 0;
    std::int32_t bits = 1;             // per entry
    std::int32_t entries_per_word = 64;
    std::int32_t words_per_row = 0;
    std::uint64_t hasher_fingerprint = 0;

    std::span<const std::uint64_t> row(std::int64_t i) const {
        return {words.data() + static_cast<std::size_t>(i) * words_per_row,
                static_cast<std::size_t>(words_per_row)};
    }
    std::uint32_t get(std::int64_t i, std::int32_t h) const {
        const auto w = row(i)[static_cast<std::size_t>(h / entries_per_word)];
        const int shift = (h % entries_per_word) * bits;
        return static_cast<std::uint32_t>((w >> shift) & ((1ULL << bits) - 1));
    }
    void set(std::int64_t i, std::int32_t h, std::uint32_t v) {
        auto& w = words[static_cast<std::size_t>(i) * words_per_row + h / entries_per_word];
        const int shift = (h % entries_per_word) * bits;
        w = (w & ~(((1ULL << bits) - 1) << shift)) | (static_cast<std::uint64_t>(v) << shift);
    }
    std::vector<std::uint32_t> unpack_row(std::int64_t i) const;

    // Rows selected by `rows`, in order, same hasher fingerprint.
    HashCodeMatrix gather(std::span<const std::int64_t> rows) const;

    static HashCodeMatrix empty_like(const WtaHasher& hasher, std::int64_t n);
};

// Single-row hash; x must have dimension hasher.d and finite entries.
// Argmax ties break to the smallest window position.
std::vector<std::uint32_t> hash(const WtaHasher& hasher, std::span<const float> x);

// Row-parallel batch hash; bitwise independent of worker count.
HashCodeMatrix hash_batch(const WtaHasher& hasher, const FeatureMatrix& x);

// Positions where two code rows differ. K=2 uses XOR + popcount on packed
// words; larger windows compare decoded entries.
std::int64_t hamming(const HashCodeMatrix& a, std::int64_t i, const HashCodeMatrix& b, std::int64_t j);

// Same, over raw packed rows that share layout metadata (caller has already
// checked compatibility).
std::int64_t hamming_rows(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b,
                          std::int32_t bits, std::int32_t entries_per_word, std::int32_t hashes);

void require_compatible(const HashCodeMatrix& a, const HashCodeMatrix& b);

}  // namespace owd

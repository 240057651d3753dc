#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mst {

/// Boolean attention mask over [queries x keys]. A mask with rows == 1 applies
/// the same key restriction to every query row (the padding-mask case).
struct Mask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> allowed; // rows * cols, row-major

    Mask() = default;
    Mask(std::size_t r, std::size_t c, bool value = true)
        : rows(r), cols(c), allowed(r * c, value ? 1 : 0) {}

    bool at(std::size_t q, std::size_t k) const {
        return allowed[(rows == 1 ? 0 : q) * cols + k] != 0;
    }
    void set(std::size_t q, std::size_t k, bool v) { allowed[q * cols + k] = v ? 1 : 0; }

    /// True if every query row in a [q x cols] use of this mask has at least
    /// one allowed key.
    bool every_row_has_allowed() const;

    /// Side-by-side key concatenation (for the flat strategy). All parts must
    /// agree on the broadcast row count.
    static Mask concat_keys(const std::vector<const Mask*>& parts);
};

/// Lower-triangular self-attention mask: allowed[i][j] = (j <= i). n >= 1.
Mask causal_mask(std::size_t n);

/// One broadcast-row mask per sequence: the first `length` key positions are
/// allowed for every query. Each length must be in [1, max_len].
std::vector<Mask> padding_mask(const std::vector<std::size_t>& lengths, std::size_t max_len);

} // namespace mst

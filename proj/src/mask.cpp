#include "mst/mask.hpp"

#include <stdexcept>
#include <string>

namespace mst {

bool Mask::every_row_has_allowed() const {
    for (std::size_t q = 0; q < rows; ++q) {
        bool any = false;
        for (std::size_t k = 0; k < cols && !any; ++k) any = allowed[q * cols + k] != 0;
        if (!any) return false;
    }
    return true;
}

Mask Mask::concat_keys(const std::vector<const Mask*>& parts) {
    std::size_t rows = 1;
    std::size_t cols = 0;
    for (const Mask* m : parts) {
        if (m->rows > 1) {
            if (rows > 1 && rows != m->rows)
                throw std::invalid_argument("Mask::concat_keys: query row counts disagree");
            rows = m->rows;
        }
        cols += m->cols;
    }
    Mask out(rows, cols, false);
    for (std::size_t q = 0; q < rows; ++q) {
        std::size_t base = 0;
        for (const Mask* m : parts) {
            for (std::size_t k = 0; k < m->cols; ++k)
                out.set(q, base + k, m->at(q, k));
            base += m->cols;
        }
    }
    return out;
}

Mask causal_mask(std::size_t n) {
    if (n == 0) throw std::invalid_argument("causal_mask: n must be >= 1");
    Mask m(n, n, false);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) m.set(i, j, true);
    return m;
}

std::vector<Mask> padding_mask(const std::vector<std::size_t>& lengths, std::size_t max_len) {
    std::vector<Mask> out;
    out.reserve(lengths.size());
    for (std::size_t len : lengths) {
        if (len == 0)
            throw std::invalid_argument("padding_mask: zero-length sequence");
        if (len > max_len)
            throw std::invalid_argument("padding_mask: length " + std::to_string(len) +
                                        " exceeds max_len " + std::to_string(max_len));
        Mask m(1, max_len, false);
        for (std::size_t k = 0; k < len; ++k) m.set(0, k, true);
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace mst

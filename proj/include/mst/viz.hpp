#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mst/decode.hpp"

namespace mst {

enum class VizFormat { Csv, Pgm };

/// Selects which attention matrix to export. head < 0 means the mean over
/// heads; encoder < 0 concatenates all encoders in bundle order.
struct HeatmapSpec {
    std::size_t layer = 0;
    int head = -1;
    int encoder = -1;
    VizFormat format = VizFormat::Csv;
};

/// The matrix actually drawn for one layer: rows = decoded target positions,
/// columns = source positions (per-encoder blocks side by side, column labels
/// in bundle order). For the hierarchical strategy the per-encoder weights
/// arrive multiplied by the attention-over-contexts weights, so each full row
/// sums to 1.
struct HeatmapMatrix {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    Tensor values; // [rows x cols]
};

HeatmapMatrix heatmap_matrix(const DecodeTrace& trace, const HeatmapSpec& spec);

/// Hierarchical only: the raw attention-over-contexts distribution,
/// [target x n_encoders].
HeatmapMatrix context_matrix(const DecodeTrace& trace, const HeatmapSpec& spec);

/// UTF-8 CSV: first row carries the source labels, first column the target
/// tokens, values with 17 significant digits.
void export_attention_csv(const HeatmapMatrix& m, const std::string& path);

/// Plain PGM (P2), maxval 255, pixel = round(255 * weight) on the absolute
/// scale. Width = total source positions, height = target length.
void export_heatmap_pgm(const HeatmapMatrix& m, const std::string& path);

/// Parses back what export_attention_csv wrote (round-trip checks).
HeatmapMatrix parse_attention_csv(const std::string& path);

} // namespace mst

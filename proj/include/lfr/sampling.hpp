#pragma once

#include "lfr/core.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace lfr {

// Sparse layout over sub-light-fields of `kSubfieldViews` views each: every
// (gap + 1)-th sub-light-field is kept as input, the `gap` sub-light-fields
// between two inputs are reconstructed.
struct SamplingPattern {
    static constexpr int kSubfieldViews = 9;
    int gap = 2;

    // A -> 2, B -> 3, C -> 4.
    static SamplingPattern from_name(const std::string& name);
    std::string name() const;
    void validate() const;

    int period() const { return gap + 1; }
    int window_rows() const { return (2 + gap) * kSubfieldViews; }
};

struct SparseLightField {
    LightField field;
    std::vector<int> kept_subfields;
    std::vector<int> reconstructed_subfields;   // strictly between two inputs
    std::vector<int> excluded_subfields;        // trailing, no right-hand input

    // Per-u flag of views that lie in a reconstructed sub-light-field.
    std::vector<std::uint8_t> reconstructed_view_mask() const;
};

SparseLightField apply_pattern(const LightField& dense, const SamplingPattern& pattern);

// Recovers the sub-light-field bookkeeping of a field whose view mask was
// written by apply_pattern (e.g. after a save/load round trip).
SparseLightField sparse_from_mask(const LightField& sparse, const SamplingPattern& pattern);

// EPI rows [first_row, first_row + rows) around one blank band. The top and
// bottom `kSubfieldViews` rows come from the two inputs bounding the gap.
struct EpiWindow {
    Epi epi;
    int first_row = 0;
    int first_col = 0;
    int gap_index = 0;
};

std::vector<EpiWindow> windows(const Epi& sparse_epi, const SamplingPattern& pattern);

// Same rows as `windows` would cut, taken from a dense EPI (all rows valid).
std::vector<EpiWindow> dense_windows(const Epi& dense_epi, const SamplingPattern& pattern, int subfield_count);

// Calls `fill(window, v, t)` for every gap window of every (v, t) fiber and
// writes the blank-band rows of the returned EPI back into a copy of the
// sparse field. Views of reconstructed sub-light-fields are marked valid.
using WindowFill = std::function<Epi(const EpiWindow& window, int v, int t)>;
LightField fill_blank_bands(const SparseLightField& sparse, const SamplingPattern& pattern, const WindowFill& fill);

struct TrainingPair {
    EpiWindow incomplete;
    EpiWindow intact;
};

struct CropOptions {
    int width = 64;
    int stride = 16;
};

std::vector<TrainingPair> build_training_set(std::span<const LightField> dense_fields, const SamplingPattern& pattern,
                                             const CropOptions& crop);

// Paired window PNGs plus index.json.
void save_training_set(const std::vector<TrainingPair>& pairs, const SamplingPattern& pattern,
                       const std::filesystem::path& dir);
std::vector<TrainingPair> load_training_set(const std::filesystem::path& dir, SamplingPattern* pattern = nullptr);

} // namespace lfr

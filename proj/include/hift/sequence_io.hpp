#pragma once

#include <string>
#include <vector>

#include "hift/synth.hpp"

namespace hift {

// Standard aerial-benchmark sequence layout: a directory of numbered PGM (P5)
// or PPM (P6) frames plus groundtruth.txt with one "x,y,w,h" corner-form line
// per frame. Tracker output uses the same box format in results.txt.

void write_pgm(const std::string& path, const Image& img);
void write_ppm(const std::string& path, const Image& img);
Image read_image(const std::string& path); // dispatches on P5/P6 magic

void write_boxes(const std::string& path, const std::vector<BBox>& boxes);
std::vector<BBox> read_boxes(const std::string& path);

void write_sequence_dir(const std::string& dir, const SynthSequence& seq);

struct SequenceData {
    std::vector<std::string> frame_paths;
    std::vector<BBox> gt; // may be shorter than frames; frame 0 entry required for init
};

SequenceData read_sequence_dir(const std::string& dir);

} // namespace hift

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "corrdetect/image.hpp"

namespace corrdetect {

// Segment feature layout: per-channel mean and std (6), 8-bin normalized
// histogram per channel (24), 8x8 mean-gray downsample (64). Total 94.
constexpr std::size_t kSegmentFeatureDim = 3 * 2 + 3 * 8 + 64;

inline std::vector<double> extract_features(const SegmentView& seg) {
    if (seg.width < 1 || seg.height < 1 || seg.image == nullptr)
        throw_data("extract_features: empty segment");
    std::vector<double> f;
    f.reserve(kSegmentFeatureDim);

    const double count = static_cast<double>(seg.width) * seg.height;
    std::array<double, 3> sum{}, sumsq{};
    std::array<std::array<double, 8>, 3> hist{};
    for (int y = 0; y < seg.height; ++y) {
        for (int x = 0; x < seg.width; ++x) {
            const Rgb c = seg.get(x, y);
            const std::array<double, 3> ch{c.r / 255.0, c.g / 255.0, c.b / 255.0};
            const std::array<int, 3> bins{c.r / 32, c.g / 32, c.b / 32};
            for (int i = 0; i < 3; ++i) {
                sum[i] += ch[i];
                sumsq[i] += ch[i] * ch[i];
                hist[i][bins[i]] += 1.0;
            }
        }
    }
    for (int i = 0; i < 3; ++i) {
        const double mean = sum[i] / count;
        const double var = std::max(0.0, sumsq[i] / count - mean * mean);
        f.push_back(mean);
        f.push_back(std::sqrt(var));
    }
    for (int i = 0; i < 3; ++i)
        for (int b = 0; b < 8; ++b) f.push_back(hist[i][b] / count);

    // 8x8 downsample of mean gray. Cell (bx,by) averages the pixel block
    // [bx*w/8, (bx+1)*w/8) x [by*h/8, (by+1)*h/8); blocks cover the segment
    // exactly and degenerate to repeated pixels when the segment is < 8 wide.
    for (int by = 0; by < 8; ++by) {
        for (int bx = 0; bx < 8; ++bx) {
            int x0 = bx * seg.width / 8, x1 = (bx + 1) * seg.width / 8;
            int y0 = by * seg.height / 8, y1 = (by + 1) * seg.height / 8;
            if (x1 == x0) x1 = x0 + 1;
            if (y1 == y0) y1 = y0 + 1;
            x0 = std::min(x0, seg.width - 1);
            y0 = std::min(y0, seg.height - 1);
            x1 = std::min(x1, seg.width);
            y1 = std::min(y1, seg.height);
            double acc = 0.0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    const Rgb c = seg.get(x, y);
                    acc += (c.r + c.g + c.b) / (3.0 * 255.0);
                }
            f.push_back(acc / (static_cast<double>(x1 - x0) * (y1 - y0)));
        }
    }
    return f;
}

inline std::vector<double> extract_features(const ImageRgb& segment_pixels) {
    SegmentView v{&segment_pixels, 0, 0, segment_pixels.width(), segment_pixels.height()};
    return extract_features(v);
}

}  // namespace corrdetect
